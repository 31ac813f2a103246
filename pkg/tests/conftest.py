"""Shared fixtures and independent oracle helpers for the test suite."""

import itertools

import numpy as np
import pytest

from deaselect.data import DataSet


# ---------------------------------------------------------------------------
# Panels


@pytest.fixture
def tiny_panel():
    """Two inputs, one output, four DMUs; values chosen by hand."""
    X = np.array([[2.0, 4.0, 3.0, 5.0], [1.0, 2.0, 3.0, 1.5]])
    Y = np.array([[1.0, 2.0, 1.5, 1.0]])
    return DataSet.from_arrays(X, Y)


@pytest.fixture
def dominance_panel():
    """One input, one output; DMU 1 strictly dominated by DMU 0."""
    X = np.array([[1.0, 2.0]])
    Y = np.array([[1.0, 1.0]])
    return DataSet.from_arrays(X, Y)


def random_panel(rng, n, m, s=1, lo=0.5, hi=2.0):
    """Log-uniform positive panel of the given shape."""
    X = np.exp(rng.uniform(np.log(lo), np.log(hi), (m, n)))
    Y = np.exp(rng.uniform(np.log(lo), np.log(hi), (s, n)))
    return DataSet.from_arrays(X, Y)


def frontier_panel(rng, n, m, alpha=None):
    """Cobb-Douglas constant-returns panel with zero inefficiency.

    Every DMU sits exactly on the production surface
    y = prod_i x_i ** alpha_i with sum(alpha) == 1.
    """
    if alpha is None:
        alpha = np.full(m, 1.0 / m)
    alpha = np.asarray(alpha, dtype=float)
    assert abs(alpha.sum() - 1.0) < 1e-12
    log_x = rng.uniform(np.log(5.0), np.log(15.0), (m, n))
    log_y = alpha @ log_x
    return DataSet.from_arrays(np.exp(log_x), np.exp(log_y)[np.newaxis, :])


# ---------------------------------------------------------------------------
# Independent LP oracle: brute-force vertex enumeration
#
# For min c.x subject to A x >= b, x >= 0 (all senses ">="), a bounded LP
# with a nonempty feasible set attains its optimum at a vertex, i.e. at a
# point where some p of the q + p hyperplanes {A_i x = b_i} u {x_j = 0}
# hold with equality. Enumerating every p-subset is exponential but exact,
# and entirely independent of any simplex implementation.


def vertex_enumeration_min(c, A, b, tol=1e-9):
    """Exact optimum of min c.x s.t. A x >= b, x >= 0 (None if infeasible)."""
    c = np.asarray(c, dtype=float)
    A = np.asarray(A, dtype=float)
    b = np.asarray(b, dtype=float)
    q, p = A.shape
    rows = np.vstack([A, np.eye(p)])
    rhs = np.concatenate([b, np.zeros(p)])
    best = None
    for subset in itertools.combinations(range(q + p), p):
        M = rows[list(subset)]
        r = rhs[list(subset)]
        if abs(np.linalg.det(M)) < 1e-12:
            continue
        x = np.linalg.solve(M, r)
        if np.all(A @ x >= b - tol) and np.all(x >= -tol):
            val = float(c @ x)
            if best is None or val < best:
                best = val
    return best


# ---------------------------------------------------------------------------
# Dense view of the splitting subproblem, for finite-difference oracles


def dense_z_objective(problem, state):
    """The z-step subproblem objective as an explicit function of z.

    L(z) = c.z + (1/2mu)||As z + b - s - mu*gamma_s||^2
               + (1/2mu)||Av z - vbar - mu*gamma_v||^2
               [+ (1/2mu)||Ae z + b_e - mu*gamma_e||^2]
    """
    As = problem.dense_As()
    Av = problem.dense_Av()
    mu = state.mu

    def L(z):
        val = float(problem.c @ z)
        r1 = As @ z + problem.b - state.s - mu * state.gamma_s
        val += float(r1 @ r1) / (2.0 * mu)
        r2 = Av @ z - state.vbar - mu * state.gamma_v
        val += float(r2 @ r2) / (2.0 * mu)
        if problem.b_e is not None:
            r3 = problem.dense_Ae() @ z + problem.b_e - mu * state.gamma_e
            val += float(r3 @ r3) / (2.0 * mu)
        return val

    return L


def central_diff_gradient(f, x, h=1e-6):
    """Central-difference gradient of a scalar function."""
    x = np.asarray(x, dtype=float)
    g = np.zeros_like(x)
    for i in range(x.size):
        e = np.zeros_like(x)
        e[i] = h
        g[i] = (f(x + e) - f(x - e)) / (2.0 * h)
    return g
