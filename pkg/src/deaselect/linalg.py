"""Dense numerical kernels: a bounded-variable simplex LP solver, cached
Cholesky solves, and OLS regression with t statistics.

Everything here is dense numpy sized for panels of at most a few hundred
decision units; robustness is preferred over speed. The LP solver is a
two-phase primal simplex on the bounded-variable form

    min c.x   s.t.   A x {<=, =, >=} b,   lower <= x <= upper,

with Dantzig pricing and a Bland's-rule fallback that kicks in after a run
of degenerate pivots, which guarantees termination.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy import linalg as sla
from scipy import stats

from .exceptions import (
    InputError,
    NotPositiveDefiniteError,
    RankError,
    StallError,
)

PIVOT_TOL = 1e-9
# column states
_AT_LOWER, _AT_UPPER, _FREE, _BASIC = 0, 1, 2, 3
_SENSE_CODE = {"<=": 1, "=": 0, ">=": -1}


@dataclass
class LpProblem:
    """A small dense LP.

    Parameters
    ----------
    c : (p,) cost vector.
    A : (q, p) constraint matrix.
    b : (q,) right-hand side.
    senses : length-q sequence drawn from {"<=", "=", ">="}.
    lower, upper : optional (p,) variable bounds; default [0, +inf).
        Use -inf/+inf for free variables.
    sense : "min" or "max" objective sense.
    """

    c: np.ndarray
    A: np.ndarray
    b: np.ndarray
    senses: Sequence[str]
    lower: np.ndarray | None = None
    upper: np.ndarray | None = None
    sense: str = "min"


@dataclass
class LpSolution:
    """Solver verdict plus primal/dual data when optimal.

    ``y`` holds one dual per constraint row, signed for the problem's own
    objective sense, so ``dual_objective`` (which includes the reduced-cost
    contribution of nonbasic variables at finite bounds) matches
    ``objective`` at an optimum up to roundoff.
    """

    status: str  # "optimal" | "infeasible" | "unbounded"
    x: np.ndarray | None
    y: np.ndarray | None
    objective: float | None
    dual_objective: float | None = None
    reduced_costs: np.ndarray | None = None
    n_pivots: int = 0


def _as_vector(v, name, length=None):
    arr = np.asarray(v, dtype=float)
    if arr.ndim != 1:
        raise InputError(f"{name} must be one-dimensional, got shape {arr.shape}")
    if length is not None and arr.shape[0] != length:
        raise InputError(f"{name} has length {arr.shape[0]}, expected {length}")
    return arr


def _normalize_problem(problem):
    A = np.asarray(problem.A, dtype=float)
    if A.ndim != 2:
        raise InputError(f"A must be a matrix, got shape {A.shape}")
    q, p = A.shape
    c = _as_vector(problem.c, "c", p)
    b = _as_vector(problem.b, "b", q)
    if len(problem.senses) != q:
        raise InputError(f"got {len(problem.senses)} row senses for {q} rows")
    try:
        senses = np.array([_SENSE_CODE[s] for s in problem.senses], dtype=int)
    except KeyError as bad:
        raise InputError(f"unknown row sense {bad}; use '<=', '=', '>='") from None
    lo = (
        np.zeros(p)
        if problem.lower is None
        else _as_vector(problem.lower, "lower", p)
    )
    hi = (
        np.full(p, np.inf)
        if problem.upper is None
        else _as_vector(problem.upper, "upper", p)
    )
    if np.any(lo > hi):
        raise InputError("lower bound exceeds upper bound")
    if not (np.all(np.isfinite(A)) and np.all(np.isfinite(b)) and np.all(np.isfinite(c))):
        raise InputError("A, b, c must be finite")
    if problem.sense not in ("min", "max"):
        raise InputError(f"objective sense must be 'min' or 'max', got {problem.sense!r}")
    return c, A, b, senses, lo, hi, problem.sense == "max"


class _Simplex:
    """Two-phase bounded-variable primal simplex on equality form.

    Columns are [structural | row slacks | artificials]; the slack of a
    '<=' row lives in [0, inf), of a '>=' row in (-inf, 0], of an '=' row
    is fixed at 0. Artificials are added only for rows whose initial slack
    value would violate its bounds.
    """

    REFACTOR_EVERY = 64

    def __init__(self, c, A, b, senses, lo, hi, max_pivots):
        q, p = A.shape
        self.q, self.p = q, p
        self.b = b
        self.max_pivots = max_pivots
        self.pivots = 0

        slack_lo = np.where(senses < 0, -np.inf, 0.0)
        slack_hi = np.where(senses > 0, np.inf, 0.0)

        # initial nonbasic placement of structural variables
        x0 = np.zeros(p)
        stat = np.full(p, _FREE, dtype=int)
        at_lo = np.isfinite(lo)
        x0[at_lo] = lo[at_lo]
        stat[at_lo] = _AT_LOWER
        at_hi = ~at_lo & np.isfinite(hi)
        x0[at_hi] = hi[at_hi]
        stat[at_hi] = _AT_UPPER

        resid = b - A @ x0
        need_art = (resid < slack_lo - 1e-12) | (resid > slack_hi + 1e-12)
        n_art = int(need_art.sum())

        N = p + q + n_art
        self.Afull = np.zeros((q, N))
        self.Afull[:, :p] = A
        self.Afull[np.arange(q), p + np.arange(q)] = 1.0
        self.lo = np.concatenate([lo, slack_lo, np.zeros(n_art)])
        self.hi = np.concatenate([hi, slack_hi, np.full(n_art, np.inf)])
        self.xval = np.zeros(N)
        self.xval[:p] = x0
        self.stat = np.full(N, _AT_LOWER, dtype=int)
        self.stat[:p] = stat
        self.n_art = n_art
        self.art_cols = np.arange(p + q, N)

        self.basis = np.empty(q, dtype=int)
        art_rows = np.flatnonzero(need_art)
        self.Afull[art_rows, p + q + np.arange(n_art)] = np.sign(resid[art_rows])
        for i in range(q):
            if need_art[i]:
                j = p + q + int(np.searchsorted(art_rows, i))
                self.xval[j] = abs(resid[i])
                # the displaced slack stays nonbasic at 0
                self.stat[p + i] = _AT_UPPER if senses[i] < 0 else _AT_LOWER
            else:
                j = p + i
                self.xval[j] = resid[i]
            self.basis[i] = j
            self.stat[j] = _BASIC
        self.Binv = np.eye(q)
        self._since_refactor = 0
        self._refactor()

    def _refactor(self):
        B = self.Afull[:, self.basis]
        try:
            self.Binv = np.linalg.inv(B)
        except np.linalg.LinAlgError:
            raise StallError("simplex basis became singular") from None
        xn = self.xval.copy()
        xn[self.basis] = 0.0
        self.xval[self.basis] = self.Binv @ (self.b - self.Afull @ xn)
        self._since_refactor = 0

    def _eta_update(self, w, r):
        br = self.Binv[r] / w[r]
        self.Binv -= np.outer(w, br)
        self.Binv[r] = br
        self._since_refactor += 1
        if self._since_refactor >= self.REFACTOR_EVERY:
            self._refactor()

    def run_phase(self, costs):
        """Iterate to optimality for the given costs.

        Returns "optimal" or "unbounded"; raises StallError past the pivot
        budget.
        """
        dual_tol = PIVOT_TOL * (1.0 + np.max(np.abs(costs)) if costs.size else 1.0)
        bland = False
        stall_run = 0
        obj = costs @ self.xval
        while True:
            if self.pivots > self.max_pivots:
                raise StallError(
                    f"no verdict after {self.pivots} pivots (budget {self.max_pivots})"
                )
            y = self.Binv.T @ costs[self.basis]
            d = costs - self.Afull.T @ y
            eligible = (
                ((self.stat == _AT_LOWER) & (d < -dual_tol) & (self.lo < self.hi))
                | ((self.stat == _AT_UPPER) & (d > dual_tol) & (self.lo < self.hi))
                | ((self.stat == _FREE) & (np.abs(d) > dual_tol))
            )
            idx = np.flatnonzero(eligible)
            if idx.size == 0:
                return "optimal"
            if bland:
                e = int(idx[0])
            else:
                e = int(idx[np.argmax(np.abs(d[idx]))])
            sigma = 1.0 if (self.stat[e] == _AT_LOWER or d[e] < 0) else -1.0

            w = self.Binv @ self.Afull[:, e]
            xB = self.xval[self.basis]
            step = -sigma * w
            ratios = np.full(self.q, np.inf)
            up = step > PIVOT_TOL
            dn = step < -PIVOT_TOL
            with np.errstate(invalid="ignore"):
                ratios[up] = (self.hi[self.basis[up]] - xB[up]) / step[up]
                ratios[dn] = (self.lo[self.basis[dn]] - xB[dn]) / step[dn]
            ratios = np.maximum(ratios, 0.0)
            t_rows = ratios.min() if self.q else np.inf
            t_own = self.hi[e] - self.lo[e]
            t_star = min(t_rows, t_own)
            if not np.isfinite(t_star):
                return "unbounded"

            self.pivots += 1
            if t_own <= t_rows:
                # bound flip: variable runs to its opposite bound
                self.xval[e] = self.hi[e] if sigma > 0 else self.lo[e]
                self.xval[self.basis] = xB + step * t_own
                self.stat[e] = _AT_UPPER if sigma > 0 else _AT_LOWER
            else:
                blockers = np.flatnonzero(ratios <= t_star + 1e-12 * (1.0 + t_star))
                if bland:
                    r = int(blockers[np.argmin(self.basis[blockers])])
                else:
                    r = int(blockers[np.argmax(np.abs(w[blockers]))])
                leave = int(self.basis[r])
                self.xval[self.basis] = xB + step * t_star
                self.xval[e] = self.xval[e] + sigma * t_star
                self.xval[leave] = self.hi[leave] if step[r] > 0 else self.lo[leave]
                self.stat[leave] = _AT_UPPER if step[r] > 0 else _AT_LOWER
                self.stat[e] = _BASIC
                self.basis[r] = e
                self._eta_update(w, r)

            new_obj = costs @ self.xval
            if new_obj < obj - 1e-12 * (1.0 + abs(obj)):
                stall_run = 0
                bland = False
            else:
                stall_run += 1
                if stall_run > 2 * (self.q + 10):
                    bland = True
            obj = new_obj

    def drive_out_artificials(self):
        """After phase 1, pivot basic artificials out where a pivot exists."""
        nonart = np.arange(self.p + self.q)
        for r in range(self.q):
            j = self.basis[r]
            if j < self.p + self.q:
                continue
            row = self.Binv[r] @ self.Afull[:, : self.p + self.q]
            row[self.stat[nonart] == _BASIC] = 0.0
            cand = np.flatnonzero(np.abs(row) > PIVOT_TOL)
            if cand.size == 0:
                continue  # redundant row; artificial stays basic, pinned at 0
            e = int(cand[np.argmax(np.abs(row[cand]))])
            w = self.Binv @ self.Afull[:, e]
            self.basis[r] = e
            self.stat[e] = _BASIC
            self.stat[j] = _AT_LOWER
            self.xval[j] = 0.0
            self._eta_update(w, r)
        # artificials may never move again
        self.lo[self.art_cols] = 0.0
        self.hi[self.art_cols] = 0.0


def solve_lp(problem: LpProblem, max_pivots: int | None = None) -> LpSolution:
    """Solve a small dense LP.

    Parameters
    ----------
    problem : LpProblem
    max_pivots : optional pivot budget override; the default is
        50 * (n_variables + n_rows).

    Returns
    -------
    LpSolution with status "optimal", "infeasible", or "unbounded".

    Raises
    ------
    InputError for malformed problems, StallError when the pivot budget is
    exhausted (a numerical failure, distinct from infeasibility).
    """
    c, A, b, senses, lo, hi, maximize = _normalize_problem(problem)
    q, p = A.shape
    cost = -c if maximize else c
    if max_pivots is None:
        max_pivots = 50 * (p + q)

    if q == 0:
        return _solve_bounds_only(c, cost, lo, hi, maximize)

    spx = _Simplex(cost, A, b, senses, lo, hi, max_pivots)

    if spx.n_art:
        phase1 = np.zeros(spx.Afull.shape[1])
        phase1[spx.art_cols] = 1.0
        verdict = spx.run_phase(phase1)
        infeas = phase1 @ spx.xval
        if verdict != "optimal" or infeas > 1e-8 * (1.0 + np.max(np.abs(b))):
            return LpSolution("infeasible", None, None, None, n_pivots=spx.pivots)
        spx.drive_out_artificials()

    full_cost = np.zeros(spx.Afull.shape[1])
    full_cost[:p] = cost
    verdict = spx.run_phase(full_cost)
    if verdict == "unbounded":
        return LpSolution("unbounded", None, None, None, n_pivots=spx.pivots)

    spx._refactor()  # tighten basic values before reading the solution off
    x = spx.xval[:p].copy()
    np.clip(x, lo, hi, out=x)
    y = spx.Binv.T @ full_cost[spx.basis]
    d = full_cost - spx.Afull.T @ y
    nb_struct = np.flatnonzero(spx.stat[:p] != _BASIC)
    dual_obj = float(y @ b + d[nb_struct] @ spx.xval[nb_struct])
    obj = float(c @ x)
    sgn = -1.0 if maximize else 1.0
    return LpSolution(
        status="optimal",
        x=x,
        y=sgn * y,
        objective=obj,
        dual_objective=sgn * dual_obj,
        reduced_costs=sgn * d[:p],
        n_pivots=spx.pivots,
    )


def _solve_bounds_only(c, cost, lo, hi, maximize):
    x = np.where(np.isfinite(lo), lo, np.where(np.isfinite(hi), hi, 0.0))
    take_hi = (cost < 0) & np.isfinite(hi)
    x[take_hi] = hi[take_hi]
    unb = ((cost < 0) & ~np.isfinite(hi)) | ((cost > 0) & ~np.isfinite(lo))
    if np.any(unb):
        return LpSolution("unbounded", None, None, None)
    obj = float(c @ x)
    sgn = -1.0 if maximize else 1.0
    return LpSolution(
        "optimal", x, np.zeros(0), obj, dual_objective=obj, reduced_costs=sgn * cost
    )


# ---------------------------------------------------------------------------
# Cholesky with a reusable factor


@dataclass(frozen=True)
class CholeskyFactor:
    """Immutable lower-triangular factor L with L Lt = G."""

    lower: np.ndarray

    @property
    def dim(self) -> int:
        return self.lower.shape[0]


def factor_and_solve(G, rhs, cache: CholeskyFactor | None = None):
    """Solve G x = rhs for symmetric positive-definite G, reusing a factor.

    Parameters
    ----------
    G : (p, p) symmetric positive-definite matrix. Ignored when ``cache``
        is given (the factor already encodes it).
    rhs : (p,) or (p, k) right-hand side(s).
    cache : optional CholeskyFactor from a previous call with the same G.

    Returns
    -------
    (x, factor) where the factor can be passed back in to skip the
    refactorization on later right-hand sides.

    Raises
    ------
    NotPositiveDefiniteError naming the first failing pivot index when G is
    not positive definite (any pivot <= 1e-12 counts as failing).
    """
    if cache is None:
        G = np.asarray(G, dtype=float)
        if G.ndim != 2 or G.shape[0] != G.shape[1]:
            raise InputError(f"G must be square, got shape {G.shape}")
        scale = np.max(np.abs(G)) if G.size else 0.0
        if np.max(np.abs(G - G.T)) > 1e-8 * (1.0 + scale):
            raise InputError("G is not symmetric")
        L, info = sla.lapack.dpotrf(G, lower=1, clean=1)
        if info > 0:
            raise NotPositiveDefiniteError(pivot_index=info - 1)
        if info < 0:
            raise InputError(f"bad argument {-info} to dpotrf")
        piv = np.diagonal(L) ** 2
        small = np.flatnonzero(piv <= 1e-12)
        if small.size:
            raise NotPositiveDefiniteError(
                pivot_index=int(small[0]), pivot_value=float(piv[small[0]])
            )
        cache = CholeskyFactor(lower=L)
    rhs = np.asarray(rhs, dtype=float)
    if rhs.shape[0] != cache.dim:
        raise InputError(
            f"rhs length {rhs.shape[0]} does not match factor dimension {cache.dim}"
        )
    x = sla.cho_solve((cache.lower, True), rhs)
    return x, cache


# ---------------------------------------------------------------------------
# Ordinary least squares


@dataclass
class OlsResult:
    """Least-squares fit with classical t-based inference.

    When the fit is exact (zero residual sum of squares) the standard
    errors are reported as 0 and ``degenerate`` is set; t statistics are 0
    for zero coefficients and +/-inf otherwise, with p-values 1 and 0.
    """

    coef: np.ndarray
    stderr: np.ndarray
    tstat: np.ndarray
    pvalue: np.ndarray
    df: int
    residuals: np.ndarray
    degenerate: bool


def ols_regress(design, response) -> OlsResult:
    """Regress ``response`` on the columns of ``design``.

    The caller includes the intercept column. Requires n > k and a full
    column rank design; raises InputError / RankError otherwise.
    """
    X = np.asarray(design, dtype=float)
    y = np.asarray(response, dtype=float)
    if X.ndim != 2:
        raise InputError(f"design must be a matrix, got shape {X.shape}")
    n, k = X.shape
    if y.shape != (n,):
        raise InputError(f"response shape {y.shape} does not match design rows {n}")
    if n <= k:
        raise InputError(f"need more observations than regressors (n={n}, k={k})")
    sv = np.linalg.svd(X, compute_uv=False)
    if sv[-1] <= sv[0] * max(n, k) * np.finfo(float).eps:
        raise RankError("design matrix is rank deficient")

    coef, *_ = np.linalg.lstsq(X, y, rcond=None)
    resid = y - X @ coef
    rss = float(resid @ resid)
    df = n - k
    degenerate = rss <= 1e-24 * max(1.0, float(y @ y))
    XtX_inv = np.linalg.inv(X.T @ X)
    if degenerate:
        stderr = np.zeros(k)
        zero = np.abs(coef) <= 1e-12 * (1.0 + np.max(np.abs(coef)))
        tstat = np.where(zero, 0.0, np.sign(coef) * np.inf)
        pvalue = np.where(zero, 1.0, 0.0)
    else:
        sigma2 = rss / df
        stderr = np.sqrt(sigma2 * np.diagonal(XtX_inv))
        tstat = coef / stderr
        pvalue = 2.0 * stats.t.sf(np.abs(tstat), df)
    return OlsResult(
        coef=coef,
        stderr=stderr,
        tstat=tstat,
        pvalue=pvalue,
        df=df,
        residuals=resid,
        degenerate=degenerate,
    )
