"""Evaluation metrics for comparing efficiency estimates.

Two views of quality: how close model efficiency scores are to the
true ones (squared error plus Pearson and Spearman association), and
how well the efficient/inefficient partition is recovered.
Correlations against a constant vector are genuinely undefined and
are reported as missing (``None``), never coerced to 0 or 1.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import stats

from .exceptions import InputError

__all__ = ["ScoreMetrics", "IdentificationMetrics", "score_metrics", "identification_metrics"]


@dataclass(frozen=True)
class ScoreMetrics:
    """Agreement between two efficiency-score vectors."""

    mse: float
    pearson: float | None
    spearman: float | None

    def __post_init__(self) -> None:
        if self.mse < 0:
            raise InputError("mse cannot be negative")
        for name in ("pearson", "spearman"):
            val = getattr(self, name)
            if val is not None and not -1.0 - 1e-12 <= val <= 1.0 + 1e-12:
                raise InputError(f"{name} outside [-1, 1]: {val}")


@dataclass(frozen=True)
class IdentificationMetrics:
    """Agreement between two efficient/inefficient partitions."""

    pct_all_correct: float
    pct_efficient_correct: float | None

    def __post_init__(self) -> None:
        if not 0.0 <= self.pct_all_correct <= 1.0:
            raise InputError("pct_all_correct outside [0, 1]")
        p = self.pct_efficient_correct
        if p is not None and not 0.0 <= p <= 1.0:
            raise InputError("pct_efficient_correct outside [0, 1]")


def _as_vector(x, name: str) -> np.ndarray:
    arr = np.asarray(x, dtype=float)
    if arr.ndim != 1:
        raise InputError(f"{name} must be one-dimensional")
    if not np.all(np.isfinite(arr)):
        raise InputError(f"{name} contains non-finite values")
    return arr


def score_metrics(true_scores, model_scores) -> ScoreMetrics:
    """Mean squared error plus Pearson and Spearman correlation.

    Spearman is Pearson applied to average ranks (ties share the mean
    of the rank positions they would occupy). Either correlation is
    ``None`` when one of the vectors is constant.
    """
    t = _as_vector(true_scores, "true_scores")
    m = _as_vector(model_scores, "model_scores")
    if t.shape != m.shape:
        raise InputError(f"length mismatch: {t.size} vs {m.size}")
    if t.size < 2:
        raise InputError("need at least 2 scores")

    mse = float(np.mean((t - m) ** 2))
    pearson = _pearson(t, m)
    ranks_t = stats.rankdata(t, method="average")
    ranks_m = stats.rankdata(m, method="average")
    spearman = _pearson(ranks_t, ranks_m)
    return ScoreMetrics(mse=mse, pearson=pearson, spearman=spearman)


def _pearson(a: np.ndarray, b: np.ndarray) -> float | None:
    da = a - a.mean()
    db = b - b.mean()
    na = float(np.sqrt(da @ da))
    nb = float(np.sqrt(db @ db))
    if na == 0.0 or nb == 0.0:
        return None
    r = float((da @ db) / (na * nb))
    return min(1.0, max(-1.0, r))


def identification_metrics(true_mask, model_mask) -> IdentificationMetrics:
    """Fraction of units classified alike, and recall on the truly
    efficient ones (``None`` when there are no truly efficient units).
    """
    t = np.asarray(true_mask, dtype=bool)
    m = np.asarray(model_mask, dtype=bool)
    if t.ndim != 1 or m.ndim != 1:
        raise InputError("masks must be one-dimensional")
    if t.shape != m.shape:
        raise InputError(f"length mismatch: {t.size} vs {m.size}")
    if t.size == 0:
        raise InputError("masks must be non-empty")

    pct_all = float(np.mean(t == m))
    if t.any():
        pct_eff = float(np.mean(m[t]))
    else:
        pct_eff = None
    return IdentificationMetrics(pct_all_correct=pct_all, pct_efficient_correct=pct_eff)
