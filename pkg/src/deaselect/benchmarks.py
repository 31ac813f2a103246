"""Benchmark input-selection procedures.

Two classical competitors for deciding which inputs belong in a DEA
model:

* Backward elimination driven by efficiency ratios: repeatedly drop
  the input whose removal changes the radial scores for the fewest
  units, until every remaining input's contribution is statistically
  significant under an exact binomial test.
* Forward regression screening: score units with a seed input only,
  regress the scores on the remaining candidate inputs, and admit
  every candidate with a significantly positive coefficient, repeating
  until no candidate qualifies.

Both selectors operate on radial scores (CRS or VRS) and are
deterministic given their inputs.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
from scipy import stats

from .data import DataSet, normalize_input_subset
from .dea import bcc_output_scores, ccr_output_scores
from .exceptions import InputError, UndecidableError
from .grouplasso import SelectionResult

__all__ = [
    "EcmParams",
    "RbParams",
    "EcmTest",
    "ecm_gamma",
    "ecm_binomial_test",
    "ecm_backward_select",
    "rb_select",
]


@dataclass(frozen=True)
class EcmParams:
    """Knobs for the backward-elimination selector.

    ``p0`` is the tolerated share of units whose score may move when an
    input is dropped; ``gamma_bar`` is the ratio that counts as "moved"
    (1.10 means a 10% score change); ``alpha`` is the significance
    level of the exact binomial test.
    """

    p0: float = 0.15
    gamma_bar: float = 1.10
    alpha: float = 0.05
    rts: str = "crs"

    def __post_init__(self) -> None:
        if not 0.0 < self.p0 < 1.0:
            raise InputError("p0 must lie in (0, 1)")
        if self.gamma_bar < 1.0:
            raise InputError("gamma_bar must be >= 1")
        if not 0.0 < self.alpha < 1.0:
            raise InputError("alpha must lie in (0, 1)")
        if self.rts not in ("crs", "vrs"):
            raise InputError(f"rts must be 'crs' or 'vrs', got {self.rts!r}")


@dataclass(frozen=True)
class RbParams:
    """Knobs for the forward regression selector.

    Candidates enter when their one-sided coefficient p-value is at
    most ``1 - confidence`` and the coefficient is positive.
    """

    confidence: float = 0.90
    seed_input: int = 0
    rts: str = "crs"

    def __post_init__(self) -> None:
        if not 0.0 < self.confidence < 1.0:
            raise InputError("confidence must lie in (0, 1)")
        if self.seed_input < 0:
            raise InputError("seed_input must be a nonnegative index")
        if self.rts not in ("crs", "vrs"):
            raise InputError(f"rts must be 'crs' or 'vrs', got {self.rts!r}")


class EcmTest(NamedTuple):
    """Outcome of one exact binomial contribution test."""

    significant: bool
    p_value: float
    count: int


def _radial_scores(data: DataSet, inputs, rts: str) -> np.ndarray:
    run = ccr_output_scores if rts == "crs" else bcc_output_scores
    return run(data, inputs).scores


def ecm_gamma(data: DataSet, current_inputs, candidate_to_drop: int, rts: str = "crs") -> np.ndarray:
    """Per-unit score ratio from dropping one input.

    gamma_k = theta_k(current minus candidate) / theta_k(current),
    using output-oriented radial scores, so gamma_k >= 1 up to solver
    tolerance. Entries are NaN where either solve failed.
    """
    current = normalize_input_subset(current_inputs, data.m)
    if candidate_to_drop not in current:
        raise InputError(f"candidate {candidate_to_drop} not among current inputs {current}")
    if len(current) < 2:
        raise InputError("cannot drop below one input")
    reduced = tuple(i for i in current if i != candidate_to_drop)
    theta_full = _radial_scores(data, current, rts)
    theta_reduced = _radial_scores(data, reduced, rts)
    with np.errstate(invalid="ignore"):
        return theta_reduced / theta_full


def ecm_binomial_test(gamma, params: EcmParams) -> EcmTest:
    """Exact binomial test of whether an input matters.

    Counts units whose ratio exceeds ``gamma_bar`` and computes the
    exact upper tail P[Binomial(n_effective, p0) >= count]. Missing
    (NaN) ratios are excluded from the effective sample size; if every
    ratio is missing the test is undecidable.
    """
    g = np.asarray(gamma, dtype=float)
    if g.ndim != 1:
        raise InputError("gamma must be a vector")
    finite = np.isfinite(g)
    n_eff = int(finite.sum())
    if n_eff == 0:
        raise UndecidableError("all score ratios are missing; cannot test the input")
    count = int((g[finite] > params.gamma_bar).sum())
    # Exact upper tail; survival function at count-1 gives P[K >= count].
    p_value = float(stats.binom.sf(count - 1, n_eff, params.p0))
    return EcmTest(significant=p_value <= params.alpha, p_value=p_value, count=count)


def ecm_backward_select(data: DataSet, candidates, params: EcmParams | None = None) -> SelectionResult:
    """Backward elimination over candidate inputs.

    Starts from the full candidate set. Each round tests every
    remaining input's contribution; while any input tests
    non-significant, the one with the least impact is dropped
    (fewest moved units, then smallest mean ratio, then lowest index).
    Stops when all survivors are significant or only one remains.

    ``group_norms`` on the result holds each candidate's mean ratio at
    its final evaluation, aligned with the sorted candidate list.
    """
    params = params or EcmParams()
    cand = normalize_input_subset(candidates, data.m)
    if len(cand) < 1:
        raise InputError("need at least one candidate input")
    current = list(cand)
    last_gamma_mean = {c: np.nan for c in current}
    failures: list[str] = []
    rounds = 0
    while len(current) > 1:
        rounds += 1
        theta_full = _radial_scores(data, current, params.rts)
        entries = []
        for c in current:
            reduced = tuple(i for i in current if i != c)
            with np.errstate(invalid="ignore"):
                gamma = _radial_scores(data, reduced, params.rts) / theta_full
            n_missing = int(np.isnan(gamma).sum())
            if n_missing:
                failures.append(f"round {rounds}: {n_missing} unit solves missing for input {c}")
            try:
                test = ecm_binomial_test(gamma, params)
            except UndecidableError:
                failures.append(f"round {rounds}: input {c} undecidable; retained")
                warnings.warn(f"contribution test for input {c} undecidable; input retained")
                last_gamma_mean[c] = np.nan
                continue
            mean_gamma = float(np.nanmean(gamma))
            last_gamma_mean[c] = mean_gamma
            entries.append((c, test, mean_gamma))
        weak = [(c, t, mg) for (c, t, mg) in entries if not t.significant]
        if not weak:
            break
        victim = min(weak, key=lambda e: (e[1].count, e[2], e[0]))[0]
        current.remove(victim)
    selected = tuple(sorted(current))
    norms = np.array([last_gamma_mean[c] for c in cand])
    return SelectionResult(
        selected=selected,
        group_norms=norms,
        lam=0.0,
        method="ecm",
        converged=True,
        iterations=rounds,
        metadata={"rounds": rounds, "failures": failures, "params": params},
    )


def _independent_columns(block: np.ndarray, intercept_and_base: np.ndarray) -> list[int]:
    """Indices of block columns that keep the stacked design full rank."""
    kept: list[int] = []
    design = intercept_and_base
    base_rank = np.linalg.matrix_rank(design)
    for j in range(block.shape[1]):
        trial = np.column_stack([design, block[:, j]])
        rank = np.linalg.matrix_rank(trial)
        if rank > base_rank:
            kept.append(j)
            design = trial
            base_rank = rank
    return kept


def rb_select(data: DataSet, candidates, params: RbParams | None = None) -> SelectionResult:
    """Forward regression screening from a seed input.

    Scores every unit with the seed input only, then regresses the
    radial score (the output-expansion factor) on the levels of all
    not-yet-included candidates plus an intercept. Candidates with a
    positive coefficient and one-sided p-value at most
    ``1 - confidence`` join the model; scoring and screening repeat
    until a round adds nothing.

    ``group_norms`` holds each candidate's latest one-sided p-value
    (0 for the seed input), aligned with the sorted final candidate
    list (seed included).
    """
    from .linalg import ols_regress

    params = params or RbParams()
    if params.seed_input >= data.m:
        raise InputError(f"seed input {params.seed_input} out of range for m={data.m}")
    cand = [c for c in normalize_input_subset(candidates, data.m) if c != params.seed_input]
    if data.n <= len(cand) + 2:
        raise InputError(
            f"need n > #candidates + 2 for the screening regression "
            f"(n={data.n}, candidates={len(cand)})"
        )
    included = [params.seed_input]
    remaining = list(cand)
    last_p: dict[int, float] = {params.seed_input: 0.0}
    notes: list[str] = []
    rounds = 0
    while remaining:
        rounds += 1
        eff = _radial_scores(data, included, params.rts)
        rows = np.isfinite(eff)
        if rows.sum() <= len(remaining) + 2:
            raise InputError("too few usable observations for the screening regression")
        if not rows.all():
            notes.append(f"round {rounds}: {int((~rows).sum())} unit scores missing, rows dropped")
        block = data.X[remaining, :][:, rows].T  # observations x candidates, levels
        intercept = np.ones((int(rows.sum()), 1))
        kept_pos = _independent_columns(block, intercept)
        if len(kept_pos) < len(remaining):
            dropped = [remaining[j] for j in range(len(remaining)) if j not in kept_pos]
            for dj in dropped:
                warnings.warn(f"input {dj} is collinear in the screening regression; skipped")
                notes.append(f"round {rounds}: input {dj} collinear, skipped")
                last_p.setdefault(dj, np.nan)
            remaining = [remaining[j] for j in kept_pos]
            block = block[:, kept_pos]
            if not remaining:
                break
        design = np.column_stack([intercept, block])
        fit = ols_regress(design, eff[rows])
        added = []
        for pos, c in enumerate(remaining):
            beta = fit.coef[1 + pos]
            p_two = fit.pvalue[1 + pos]
            p_one = 0.5 * p_two if beta > 0 else 1.0 - 0.5 * p_two
            last_p[c] = float(p_one)
            if beta > 0 and p_one <= 1.0 - params.confidence:
                added.append(c)
        if not added:
            break
        included.extend(added)
        remaining = [c for c in remaining if c not in added]
    selected = tuple(sorted(included))
    norms = np.array([last_p.get(c, np.nan) for c in selected])
    return SelectionResult(
        selected=selected,
        group_norms=norms,
        lam=0.0,
        method="rb",
        converged=True,
        iterations=rounds,
        metadata={"rounds": rounds, "notes": notes, "params": params},
    )
