"""Output-oriented DEA scoring: radial CCR/BCC models and the additive model.

Each DMU is scored by its own envelopment LP against the full panel. Radial
scores are the maximal proportional output expansion theta_k >= 1 (theta = 1
on the frontier); additive scores are the maximal total slack Z_k >= 0
(Z = 0 on the frontier). A solver failure on one DMU marks that entry and
never aborts the batch.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data import DataSet, normalize_input_subset
from .exceptions import SolverFailure
from .linalg import LpProblem, solve_lp


@dataclass
class EfficiencyResult:
    """Per-DMU efficiency scores for one model run.

    scores[k] is NaN when that DMU's LP failed; statuses[k] records why.
    """

    model: str  # "ccr" | "bcc" | "additive"
    rts: str  # "crs" | "vrs"
    orientation: str
    scores: np.ndarray
    statuses: tuple
    inputs_used: tuple

    @property
    def ok(self) -> bool:
        return all(st == "optimal" for st in self.statuses)


def _radial_scores(data: DataSet, inputs, convexity: bool) -> np.ndarray:
    X = data.X[list(inputs), :]
    Y = data.Y
    m, n = X.shape
    s = Y.shape[0]
    scores = np.full(n, np.nan)
    statuses = []
    # variables [theta, lam_1..lam_n]; maximize theta
    c = np.zeros(1 + n)
    c[0] = 1.0
    q = m + s + (1 if convexity else 0)
    A = np.zeros((q, 1 + n))
    A[:m, 1:] = X
    A[m : m + s, 1:] = Y
    senses = ["<="] * m + [">="] * s
    if convexity:
        A[m + s, 1:] = 1.0
        senses = senses + ["="]
    b = np.zeros(q)
    if convexity:
        b[m + s] = 1.0
    for k in range(n):
        b[:m] = X[:, k]
        A[m : m + s, 0] = -Y[:, k]
        try:
            sol = solve_lp(LpProblem(c=c, A=A, b=b, senses=senses, sense="max"))
        except SolverFailure as err:
            statuses.append(f"solver failure: {err}")
            continue
        if sol.status != "optimal":
            statuses.append(sol.status)
            continue
        scores[k] = sol.objective
        statuses.append("optimal")
    return scores, tuple(statuses)


def ccr_output_scores(data: DataSet, inputs=None) -> EfficiencyResult:
    """Radial CRS efficiency: theta_k maximal over the conical envelopment.

    Parameters
    ----------
    data : DataSet
    inputs : optional index subset of input rows; None means all.
    """
    idx = normalize_input_subset(inputs, data.m)
    scores, statuses = _radial_scores(data, idx, convexity=False)
    return EfficiencyResult("ccr", "crs", "output", scores, statuses, idx)


def bcc_output_scores(data: DataSet, inputs=None) -> EfficiencyResult:
    """Radial VRS efficiency: CCR plus the convexity row sum(lam) = 1."""
    idx = normalize_input_subset(inputs, data.m)
    scores, statuses = _radial_scores(data, idx, convexity=True)
    return EfficiencyResult("bcc", "vrs", "output", scores, statuses, idx)


def additive_scores(data: DataSet, inputs=None, rts: str = "vrs") -> EfficiencyResult:
    """Additive efficiency: Z_k = maximal total input+output slack.

    rts "vrs" keeps the convexity row; "crs" drops it.
    """
    if rts not in ("crs", "vrs"):
        from .exceptions import InputError

        raise InputError(f"rts must be 'crs' or 'vrs', got {rts!r}")
    idx = normalize_input_subset(inputs, data.m)
    X = data.X[list(idx), :]
    Y = data.Y
    m, n = X.shape
    s = Y.shape[0]
    convexity = rts == "vrs"
    # variables [lam (n), s_minus (m), s_plus (s)]; maximize total slack
    p = n + m + s
    c = np.concatenate([np.zeros(n), np.ones(m + s)])
    q = m + s + (1 if convexity else 0)
    A = np.zeros((q, p))
    A[:m, :n] = X
    A[:m, n : n + m] = np.eye(m)
    A[m : m + s, :n] = Y
    A[m : m + s, n + m :] = -np.eye(s)
    senses = ["="] * (m + s)
    if convexity:
        A[m + s, :n] = 1.0
        senses = senses + ["="]
    b = np.zeros(q)
    if convexity:
        b[m + s] = 1.0
    scores = np.full(n, np.nan)
    statuses = []
    for k in range(n):
        b[:m] = X[:, k]
        b[m : m + s] = Y[:, k]
        try:
            sol = solve_lp(LpProblem(c=c, A=A, b=b, senses=senses, sense="max"))
        except SolverFailure as err:
            statuses.append(f"solver failure: {err}")
            continue
        if sol.status != "optimal":
            statuses.append(sol.status)
            continue
        scores[k] = sol.objective
        statuses.append("optimal")
    return EfficiencyResult("additive", rts, "output", scores, tuple(statuses), idx)


def efficient_set(result: EfficiencyResult, tol: float = 1e-6) -> np.ndarray:
    """Boolean frontier membership: theta <= 1+tol (radial) or Z <= tol.

    Failed DMUs (NaN scores) are never flagged efficient.
    """
    from .exceptions import InputError

    if not tol > 0:
        raise InputError(f"tol must be positive, got {tol}")
    scores = result.scores
    if result.model == "additive":
        flags = scores <= tol
    else:
        flags = scores <= 1.0 + tol
    return np.where(np.isnan(scores), False, flags)
