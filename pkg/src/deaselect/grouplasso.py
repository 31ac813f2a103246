"""Group-sparse joint input selection for DEA panels via a tailored ADMM.

The multiplier-form DEA problem over all n DMUs at once is an LP in
z = (v, u, w): input weights v (m per DMU), output weights u (s per DMU),
and the free VRS offset w (absent for the CRS radial model). Selecting
inputs jointly means penalizing the l2 norms of the m groups that collect
each input's weight across DMUs:

    min  c.z + lam * sum_i ||group_i of v||_2
    s.t. A_s z + b = s,  s >= 0        (envelopment rows + weight bounds)
         A_v z = vbar                  (copy of v carrying the penalty)
         A_e z + b_e = 0               (radial normalization rows only)

ADMM alternates a linear z-step (fixed SPD left-hand side, factored once
per solve and cached), an orthant projection for s, block soft-thresholding
for vbar, and multiplier updates with constant penalty mu. The Gram matrix
of [A_s; A_v; A_e] is block diagonal per DMU, so the z-step costs n tiny
triangular solves instead of one huge one; for the additive model all
blocks coincide and a single factor is shared.

The solver loop works in preallocated buffers and evaluates the dual
residual only on iterations where the primal residual already passes (plus
the final iteration), which never changes the iterate sequence or the
convergence verdict: the stopping rule needs both residuals, so the dual
norm is irrelevant while the primal side fails.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import linalg as sla

from .data import DataSet
from .exceptions import InputError, StaleFactorError
from .linalg import factor_and_solve

MODELS = ("additive", "ccr", "bcc")


@dataclass
class AdmmOptions:
    """Solver knobs: constant penalty mu, iteration cap, scaled tolerances.

    Convergence requires both residual norms to fall below
    tol * sqrt(total constraint rows).
    """

    mu: float = 1.0
    max_iter: int = 5000
    primal_tol: float = 1e-6
    dual_tol: float = 1e-6
    eps_select: float = 1e-6

    def validate(self):
        if not (self.mu > 0 and self.primal_tol > 0 and self.dual_tol > 0):
            raise InputError("mu and tolerances must be positive")
        if self.max_iter < 1:
            raise InputError("max_iter must be >= 1")
        if not self.eps_select > 0:
            raise InputError("eps_select must be positive")


@dataclass
class AdmmState:
    """Iterate of the splitting: primal blocks, multipliers, diagnostics.

    residual_history holds one (iteration, primal, dual) triple per
    iteration; the dual entry is NaN on iterations where it was not
    evaluated (see module docstring).
    """

    z: np.ndarray
    s: np.ndarray
    vbar: np.ndarray
    gamma_s: np.ndarray
    gamma_v: np.ndarray
    gamma_e: np.ndarray | None
    mu: float
    iteration: int = 0
    primal_residual: float = math.inf
    dual_residual: float = math.inf
    objective: float = math.nan
    converged: bool = False
    residual_history: list = field(default_factory=list)


@dataclass
class SelectionResult:
    """A selected input set with the evidence behind it."""

    selected: tuple
    group_norms: np.ndarray
    lam: float
    method: str
    converged: bool = True
    iterations: int = 0
    metadata: dict = field(default_factory=dict)


@dataclass(frozen=True)
class ZStepCache:
    """Cholesky factors of the per-DMU Gram blocks, tied to one mu."""

    mu: float
    factors: tuple
    shared: bool


class GLProblem:
    """Assembled group-lasso DEA instance.

    Exposes the stacked maps as operator methods (`apply_As` etc.) plus
    dense materializations for small instances and tests. Instances are
    immutable after construction and safe to share read-only; all mutable
    scratch lives in the solver, never on the problem.
    """

    def __init__(self, *, c, b, b_e, groups, lam, shift, model, ops, n, m, s):
        self.c = c
        self.b = b
        self.b_e = b_e
        self.groups = tuple(np.asarray(g, dtype=int) for g in groups)
        self.lam = float(lam)
        self.shift = int(shift)
        self.model = model
        self._ops = ops
        self.n, self.m, self.s = n, m, s
        self.n_cols = c.shape[0]
        self.rows_s = b.shape[0]
        self.rows_v = ops.rows_v
        self.rows_e = 0 if b_e is None else b_e.shape[0]
        self._strided_groups = (
            n >= 1
            and m == len(self.groups)
            and self.rows_v == n * m
            and all(
                g.shape == (n,) and np.array_equal(g, np.arange(n) * m + i)
                for i, g in enumerate(self.groups)
            )
        )

    # ---- linear maps -------------------------------------------------
    def apply_As(self, z):
        return self._ops.As(z)

    def apply_AsT(self, g):
        return self._ops.AsT(g)

    def apply_Av(self, z):
        return self._ops.Av(z)

    def apply_AvT(self, g):
        return self._ops.AvT(g)

    def apply_Ae(self, z):
        return None if self.b_e is None else self._ops.Ae(z)

    def apply_AeT(self, g):
        return self._ops.AeT(g)

    def factor_gram(self, mu) -> ZStepCache:
        """Factor the z-step left-hand side once for a given mu."""
        if not mu > 0:
            raise InputError("mu must be positive")
        blocks, shared = self._ops.gram_blocks()
        factors = []
        for G in blocks:
            _, fac = factor_and_solve(G, np.zeros(G.shape[0]))
            factors.append(fac)
        return ZStepCache(mu=float(mu), factors=tuple(factors), shared=shared)

    def solve_gram(self, cache: ZStepCache, rhs, out=None):
        """Solve G t = rhs using the cached block factors."""
        return self._ops.gram_solve(cache, rhs, out=out)

    # ---- dense views (small instances / tests) -----------------------
    def dense_As(self):
        return _materialize(self.apply_As, self.n_cols, self.rows_s)

    def dense_Av(self):
        return _materialize(self.apply_Av, self.n_cols, self.rows_v)

    def dense_Ae(self):
        if self.b_e is None:
            return None
        return _materialize(self._ops.Ae, self.n_cols, self.rows_e)

    # ---- objective pieces --------------------------------------------
    @property
    def loss_offset(self) -> float:
        """Constant restoring the loss in original (unshifted) variables."""
        nm, ns = self.n * self.m, self.n * self.s
        return self.shift * float(self.c[: nm + ns].sum())

    def loss_value(self, z) -> float:
        """The model loss c.z expressed in original variables (no penalty)."""
        return float(self.c @ z) + self.loss_offset

    def group_norms(self, vbar) -> np.ndarray:
        if self._strided_groups:
            A = vbar.reshape(self.n, self.m)
            return np.sqrt(np.einsum("ij,ij->j", A, A))
        return np.array([np.linalg.norm(vbar[g]) for g in self.groups])

    def prox_groups(self, a, kappa: float, out=None) -> np.ndarray:
        """Blockwise soft threshold of a stacked candidate vector."""
        if self._strided_groups:
            A = a.reshape(self.n, self.m)
            nrm = np.sqrt(np.einsum("ij,ij->j", A, A))
            with np.errstate(divide="ignore", invalid="ignore"):
                scale = np.where(nrm > kappa, 1.0 - kappa / nrm, 0.0)
            if out is None:
                out = np.empty_like(a)
            np.multiply(A, scale[np.newaxis, :], out=out.reshape(self.n, self.m))
            return out
        res = np.zeros_like(a) if out is None else out
        if out is not None:
            res[:] = 0.0
        for g in self.groups:
            res[g] = block_soft_threshold(a[g], kappa)
        return res

    def penalty_value(self, vbar) -> float:
        return self.lam * float(self.group_norms(vbar).sum())

    def objective_value(self, z, vbar) -> float:
        return float(self.c @ z) + self.penalty_value(vbar)


def _materialize(op, n_cols, n_rows):
    M = np.empty((n_rows, n_cols))
    eye = np.eye(n_cols)
    for j in range(n_cols):
        M[:, j] = op(eye[:, j])
    return M


class _StructuredOps:
    """Matrix-free maps exploiting the per-DMU block structure.

    The n*n envelopment rows of A_s are evaluated as a single matrix
    product: row (k, j) reads x_j.v_k - y_j.u_k [+ w_k], which is entry
    (k, j) of [V | -U | w] @ [X; Y; 1]. Stacking the right-hand operand
    once up front keeps every per-iteration product on contiguous arrays.
    All methods accept optional preallocated `out` (and, where useful,
    `work`) arrays; the ops object itself holds no mutable scratch.
    """

    def __init__(self, X, Y, has_w, has_eq):
        self.X, self.Y = X, Y
        self.has_w, self.has_eq = has_w, has_eq
        m, n = X.shape
        s = Y.shape[0]
        self.m, self.n, self.s = m, n, s
        self.nm, self.ns = n * m, n * s
        self.blk = m + s + (1 if has_w else 0)
        self.rows_v = self.nm
        # fused envelope operands: As uses [V|-U|w] @ right_as,
        # AsT uses G @ right_ast with the minus sign folded into -Y.T
        stack = [X, Y] + ([np.ones((1, n))] if has_w else [])
        self._right_as = np.ascontiguousarray(np.vstack(stack))  # (blk, n)
        stack_t = [X.T, -Y.T] + ([np.ones((n, 1))] if has_w else [])
        self._right_ast = np.ascontiguousarray(np.hstack(stack_t))  # (n, blk)
        # z indices of DMU k's block (v_k, u_k[, w_k]) for gather/scatter
        P = np.empty((n, self.blk), dtype=int)
        for k in range(n):
            cols = list(range(k * m, (k + 1) * m)) + list(
                range(self.nm + k * s, self.nm + (k + 1) * s)
            )
            if has_w:
                cols.append(self.nm + self.ns + k)
            P[k] = cols
        self.P = P
        self._pflat = np.ascontiguousarray(P.ravel())

    def alloc_work(self):
        """One (n, blk) scratch pane sized for As/AsT; owned by the caller."""
        return np.empty((self.n, self.blk))

    def As(self, z, out=None, work=None):
        n, nm, ns = self.n, self.nm, self.ns
        m, s = self.m, self.s
        if out is None:
            out = np.empty(n * n + nm + ns)
        if work is None:
            work = np.empty((n, self.blk))
        work[:, :m] = z[:nm].reshape(n, m)
        np.negative(z[nm : nm + ns].reshape(n, s), out=work[:, m : m + s])
        if self.has_w:
            work[:, m + s] = z[nm + ns :]
        np.matmul(work, self._right_as, out=out[: n * n].reshape(n, n))
        out[n * n :] = z[: nm + ns]
        return out

    def AsT(self, g, out=None, work=None):
        n, nm, ns = self.n, self.nm, self.ns
        m, s = self.m, self.s
        if out is None:
            out = np.empty(nm + ns + (n if self.has_w else 0))
        if work is None:
            work = np.empty((n, self.blk))
        G = g[: n * n].reshape(n, n)  # G[k, j] multiplies envelope row (k, j)
        np.matmul(G, self._right_ast, out=work)
        np.add(work[:, :m].ravel(), g[n * n : n * n + nm], out=out[:nm])
        np.add(work[:, m : m + s].ravel(), g[n * n + nm :], out=out[nm : nm + ns])
        if self.has_w:
            out[nm + ns :] = work[:, m + s]
        return out

    def Av(self, z, out=None):
        if out is None:
            return z[: self.nm].copy()
        np.copyto(out, z[: self.nm])
        return out

    def AvT(self, g, out=None):
        size = self.nm + self.ns + (self.n if self.has_w else 0)
        if out is None:
            out = np.zeros(size)
        else:
            out[self.nm :] = 0.0
        out[: self.nm] = g
        return out

    def Ae(self, z):
        U = z[self.nm : self.nm + self.ns].reshape(self.n, self.s)
        return np.einsum("ks,sk->k", U, self.Y)

    def AeT(self, g):
        out = np.zeros(self.nm + self.ns + (self.n if self.has_w else 0))
        Upart = out[self.nm : self.nm + self.ns].reshape(self.n, self.s)
        np.multiply(self.Y.T, g[:, np.newaxis], out=Upart)
        return out

    def gram_blocks(self):
        """Per-DMU blocks of As'As + Av'Av (+ Ae'Ae)."""
        X, Y, m, s, n = self.X, self.Y, self.m, self.s, self.n
        base = np.zeros((self.blk, self.blk))
        base[:m, :m] = X @ X.T + 2.0 * np.eye(m)
        XY = X @ Y.T
        base[:m, m : m + s] = -XY
        base[m : m + s, :m] = -XY.T
        base[m : m + s, m : m + s] = Y @ Y.T + np.eye(s)
        if self.has_w:
            Xe, Ye = X.sum(axis=1), Y.sum(axis=1)
            base[:m, -1] = Xe
            base[-1, :m] = Xe
            base[m : m + s, -1] = -Ye
            base[-1, m : m + s] = -Ye
            base[-1, -1] = n
        if not self.has_eq:
            return [base], True
        blocks = []
        for k in range(n):
            Gk = base.copy()
            yk = Y[:, k]
            Gk[m : m + s, m : m + s] += np.outer(yk, yk)
            blocks.append(Gk)
        return blocks, False

    def gram_solve(self, cache, rhs, out=None):
        R = rhs.take(self._pflat).reshape(self.n, self.blk)
        if out is None:
            out = np.empty_like(rhs)
        if cache.shared:
            sol = sla.cho_solve(
                (cache.factors[0].lower, True), R.T, check_finite=False
            )
            out[self._pflat] = sol.T.ravel()
        else:
            for k in range(self.n):
                sol = sla.cho_solve(
                    (cache.factors[k].lower, True), R[k], check_finite=False
                )
                out[self.P[k]] = sol
        return out


class _DenseOps:
    """Explicit-matrix backend for hand-built and synthetic instances."""

    def __init__(self, A_s, A_v, A_e=None):
        self.A_s = np.asarray(A_s, dtype=float)
        self.A_v = np.asarray(A_v, dtype=float)
        self.A_e = None if A_e is None else np.asarray(A_e, dtype=float)
        self.rows_v = self.A_v.shape[0]

    def alloc_work(self):
        return None

    def As(self, z, out=None, work=None):
        return np.dot(self.A_s, z, out=out)

    def AsT(self, g, out=None, work=None):
        return np.dot(self.A_s.T, g, out=out)

    def Av(self, z, out=None):
        return np.dot(self.A_v, z, out=out)

    def AvT(self, g, out=None):
        return np.dot(self.A_v.T, g, out=out)

    def Ae(self, z):
        return self.A_e @ z

    def AeT(self, g):
        return self.A_e.T @ g

    def gram_blocks(self):
        G = self.A_s.T @ self.A_s + self.A_v.T @ self.A_v
        if self.A_e is not None:
            G += self.A_e.T @ self.A_e
        return [G], True

    def gram_solve(self, cache, rhs, out=None):
        sol = sla.cho_solve((cache.factors[0].lower, True), rhs, check_finite=False)
        if out is None:
            return sol
        np.copyto(out, sol)
        return out


def assemble_gl_problem(data: DataSet, model: str, lam: float, shift=None) -> GLProblem:
    """Assemble the group-lasso DEA problem for a panel.

    Parameters
    ----------
    data : DataSet
    model : "additive", "ccr", or "bcc".
    lam : group-lasso weight, >= 0.
    shift : 0 or 1; whether weights carry unit lower bounds absorbed by a
        change of variables. Defaults to 1 for the additive model (whose
        multiplier form bounds the weights by 1) and 0 for the radial
        models (whose weights are bounded by 0).

    The stacked inequality rows come in three blocks: n envelopment rows
    per DMU (row (k, j): x_j.v_k - y_j.u_k [+ w_k] + b_kj >= 0), then the
    nonnegativity of v, then of u. Radial models append one normalization
    equality y_k.u_k = 1 per DMU; the CRS radial model has no w.
    """
    if model not in MODELS:
        raise InputError(f"model must be one of {MODELS}, got {model!r}")
    if lam < 0:
        raise InputError(f"lam must be nonnegative, got {lam}")
    if shift is None:
        shift = 1 if model == "additive" else 0
    if shift not in (0, 1):
        raise InputError(f"shift must be 0 or 1, got {shift!r}")
    X, Y = data.X, data.Y
    m, n, s = data.m, data.n, data.s
    has_w = model != "ccr"
    has_eq = model != "additive"
    ops = _StructuredOps(X, Y, has_w=has_w, has_eq=has_eq)

    xstack = X.T.ravel()  # v costs, DMU-major
    if model == "additive":
        c = np.concatenate([xstack, -Y.T.ravel(), np.ones(n)])
    elif model == "bcc":
        c = np.concatenate([xstack, np.zeros(n * s), np.ones(n)])
    else:  # ccr
        c = np.concatenate([xstack, np.zeros(n * s)])

    env_b = shift * (X.sum(axis=0) - Y.sum(axis=0))  # per constraint j
    b = np.concatenate([np.tile(env_b, n), np.zeros(n * m + n * s)])
    b_e = None
    if has_eq:
        b_e = shift * Y.sum(axis=0) - 1.0  # row k: y_k.u_k + b_e_k = 0
    groups = [np.arange(n) * m + i for i in range(m)]
    return GLProblem(
        c=c, b=b, b_e=b_e, groups=groups, lam=lam, shift=shift,
        model=model, ops=ops, n=n, m=m, s=s,
    )


def make_dense_problem(*, c, A_s, b, A_v, groups, lam, A_e=None, b_e=None,
                       shift=0, model="custom", n=0, m=0, s=0) -> GLProblem:
    """Build a GLProblem from explicit matrices (tests, synthetic cases)."""
    ops = _DenseOps(A_s, A_v, A_e)
    return GLProblem(
        c=np.asarray(c, dtype=float),
        b=np.asarray(b, dtype=float),
        b_e=None if b_e is None else np.asarray(b_e, dtype=float),
        groups=groups, lam=lam, shift=shift, model=model, ops=ops, n=n, m=m, s=s,
    )


def cold_start(problem: GLProblem, mu: float) -> AdmmState:
    """Deterministic start: z = 0, s = max(0, b), vbar = 0, multipliers 0."""
    return AdmmState(
        z=np.zeros(problem.n_cols),
        s=np.maximum(0.0, problem.b),
        vbar=np.zeros(problem.rows_v),
        gamma_s=np.zeros(problem.rows_s),
        gamma_v=np.zeros(problem.rows_v),
        gamma_e=None if problem.b_e is None else np.zeros(problem.rows_e),
        mu=float(mu),
    )


def z_step(problem: GLProblem, state: AdmmState, cache: ZStepCache) -> np.ndarray:
    """Minimize the augmented Lagrangian over z (all other blocks fixed).

    Solves (1/mu)(As'As + Av'Av [+ Ae'Ae]) z = rhs with
    rhs = As'gamma_s + Av'gamma_v [+ Ae'gamma_e] - c
          + (1/mu)(As'(s - b) + Av'vbar [+ Ae'(-b_e)]).
    """
    if cache.mu != state.mu:
        raise StaleFactorError(
            f"cached factor was built for mu={cache.mu}, state has mu={state.mu}"
        )
    mu = state.mu
    rhs = (
        problem.apply_AsT(state.gamma_s + (state.s - problem.b) / mu)
        + problem.apply_AvT(state.gamma_v + state.vbar / mu)
        - problem.c
    )
    if problem.b_e is not None:
        rhs += problem.apply_AeT(state.gamma_e - problem.b_e / mu)
    return problem.solve_gram(cache, mu * rhs)


def s_step(problem: GLProblem, state: AdmmState, As_z=None) -> np.ndarray:
    """Project the slack candidate onto the nonnegative orthant."""
    if As_z is None:
        As_z = problem.apply_As(state.z)
    return np.maximum(0.0, As_z + problem.b - state.mu * state.gamma_s)


def block_soft_threshold(a, kappa: float) -> np.ndarray:
    """Shrink a block toward 0: T_kappa(a) = a/||a|| * max(0, ||a|| - kappa)."""
    a = np.asarray(a, dtype=float)
    nrm = float(np.linalg.norm(a))
    if nrm <= kappa or nrm == 0.0:
        return np.zeros_like(a)
    return (1.0 - kappa / nrm) * a


def vbar_step(problem: GLProblem, state: AdmmState, Av_z=None) -> np.ndarray:
    """Group-wise proximal step: block soft-threshold at mu * lam."""
    if Av_z is None:
        Av_z = problem.apply_Av(state.z)
    a = Av_z - state.mu * state.gamma_v
    return problem.prox_groups(a, state.mu * problem.lam)


def residuals(problem: GLProblem, state_prev: AdmmState, state: AdmmState):
    """(primal, dual) residual norms between consecutive iterates."""
    As_z = problem.apply_As(state.z)
    parts = [As_z + problem.b - state.s, problem.apply_Av(state.z) - state.vbar]
    if problem.b_e is not None:
        parts.append(problem.apply_Ae(state.z) + problem.b_e)
    primal = math.sqrt(sum(float(p @ p) for p in parts))
    dv = problem.apply_AsT(state.s - state_prev.s) + problem.apply_AvT(
        state.vbar - state_prev.vbar
    )
    dual = float(np.linalg.norm(dv)) / state.mu
    return primal, dual


def select_inputs(state: AdmmState, problem: GLProblem, eps_sel: float = 1e-6) -> SelectionResult:
    """Read the selected inputs off the group norms of vbar."""
    norms = problem.group_norms(state.vbar)
    thr = eps_sel * (1.0 + (norms.max() if norms.size else 0.0))
    selected = tuple(int(i) for i in np.flatnonzero(norms > thr))
    return SelectionResult(
        selected=selected,
        group_norms=norms,
        lam=problem.lam,
        method="GL",
        converged=state.converged,
        iterations=state.iteration,
        metadata={
            "primal_residual": state.primal_residual,
            "dual_residual": state.dual_residual,
            "model": problem.model,
        },
    )


def admm_solve(problem: GLProblem, opts: AdmmOptions | None = None):
    """Run the ADMM to convergence (or the iteration cap).

    Returns (final AdmmState, SelectionResult). Non-convergence is reported
    on the state and selection metadata, never raised. The loop is the
    buffer-reusing equivalent of composing z_step / s_step / vbar_step with
    the multiplier updates; the dual residual is evaluated lazily (see
    module docstring) without altering any iterate or verdict.
    """
    opts = opts or AdmmOptions()
    opts.validate()
    cache = problem.factor_gram(opts.mu)
    state = cold_start(problem, opts.mu)
    mu = float(opts.mu)
    scale = math.sqrt(problem.rows_s + problem.rows_v + problem.rows_e)
    p_pass = opts.primal_tol * scale
    d_pass = opts.dual_tol * scale

    ops = problem._ops
    b, c, lam = problem.b, problem.c, problem.lam
    has_eq = problem.b_e is not None
    b_e = problem.b_e
    rows_s, rows_v, n_cols = problem.rows_s, problem.rows_v, problem.n_cols

    z = state.z
    s, vbar = state.s, state.vbar
    gamma_s, gamma_v, gamma_e = state.gamma_s, state.gamma_v, state.gamma_e

    # solver-owned scratch (the problem and its ops stay immutable)
    t_s = np.empty(rows_s)
    As_z = np.empty(rows_s)
    prev_s = np.empty(rows_s)
    t_v = np.empty(rows_v)
    Av_z = np.empty(rows_v)
    prev_vbar = np.empty(rows_v)
    rhs = np.empty(n_cols)
    nbuf = np.empty(n_cols)
    work = ops.alloc_work()

    converged = False
    primal = math.inf
    dual_now = math.nan
    it = 0
    for it in range(1, opts.max_iter + 1):
        # z step: solve (1/mu) G z = AsT(gamma_s + (s-b)/mu)
        #                           + AvT(gamma_v + vbar/mu) - c [+ eq part]
        np.subtract(s, b, out=t_s)
        t_s /= mu
        t_s += gamma_s
        ops.AsT(t_s, out=rhs, work=work)
        np.divide(vbar, mu, out=t_v)
        t_v += gamma_v
        ops.AvT(t_v, out=nbuf)
        rhs += nbuf
        rhs -= c
        if has_eq:
            rhs += ops.AeT(gamma_e - b_e / mu)
        rhs *= mu
        ops.gram_solve(cache, rhs, out=z)

        # s step: orthant projection of As z + b - mu*gamma_s
        ops.As(z, out=As_z, work=work)
        As_z += b
        np.multiply(gamma_s, mu, out=t_s)
        np.subtract(As_z, t_s, out=t_s)
        prev_s, s = s, prev_s
        np.maximum(t_s, 0.0, out=s)

        # vbar step: block soft threshold of Av z - mu*gamma_v
        ops.Av(z, out=Av_z)
        np.multiply(gamma_v, mu, out=t_v)
        np.subtract(Av_z, t_v, out=t_v)
        prev_vbar, vbar = vbar, prev_vbar
        problem.prox_groups(t_v, mu * lam, out=vbar)

        # multiplier updates off the fresh primal residual blocks
        np.subtract(As_z, s, out=t_s)  # As z + b - s
        ps = float(t_s @ t_s)
        t_s /= mu
        gamma_s -= t_s
        np.subtract(Av_z, vbar, out=t_v)
        pv = float(t_v @ t_v)
        t_v /= mu
        gamma_v -= t_v
        pe = 0.0
        if has_eq:
            r_e = ops.Ae(z) + b_e
            pe = float(r_e @ r_e)
            gamma_e -= r_e / mu
        primal = math.sqrt(ps + pv + pe)

        # dual residual only once the primal side passes (or at the cap):
        # the verdict needs both, so earlier evaluations cannot matter
        dual_now = math.nan
        if primal <= p_pass or it == opts.max_iter:
            np.subtract(s, prev_s, out=t_s)
            ops.AsT(t_s, out=rhs, work=work)
            np.subtract(vbar, prev_vbar, out=t_v)
            ops.AvT(t_v, out=nbuf)
            rhs += nbuf
            dual_now = math.sqrt(float(rhs @ rhs)) / mu
            if primal <= p_pass and dual_now <= d_pass:
                converged = True
        state.residual_history.append((it, primal, dual_now))
        if converged:
            break

    state.z, state.s, state.vbar = z, s, vbar
    state.gamma_s, state.gamma_v, state.gamma_e = gamma_s, gamma_v, gamma_e
    state.iteration = it
    state.primal_residual = primal
    state.dual_residual = dual_now
    state.converged = converged
    state.objective = problem.objective_value(z, vbar)
    return state, select_inputs(state, problem, opts.eps_select)
