"""Synthetic production-panel generation.

Monte Carlo panels follow a Cobb-Douglas technology: log-inputs are
uniform draws on a fixed interval, optional pairwise correlation is
imposed on the log scale, and each unit's output is damped by a
half-normal inefficiency term calibrated to a target mean efficiency.
Panels may carry extra "irrelevant" inputs that play no role in
producing the output, which is what the selection methods are asked
to discover.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq
from scipy.special import ndtr, ndtri

from .data import DataSet
from .exceptions import InputError

__all__ = [
    "Scenario",
    "TruthInfo",
    "correlate",
    "calibrate_sigma",
    "generate_scenario",
    "standard_scenario",
    "STANDARD_SCENARIO_IDS",
]

_LOG_RANGE = (math.log(5.0), math.log(15.0))


@dataclass(frozen=True)
class Scenario:
    """Recipe for one synthetic panel family.

    Parameters
    ----------
    id : integer label used in reports.
    rts : "crs" for constant or "vrs" for variable returns to scale.
    alpha : output elasticity per relevant input; must sum to 1 under
        CRS and to strictly less than 1 under VRS.
    correlations : (i, j, rho) triples, applied in order on the
        log-scale draws: column i is rebuilt as rho * column j plus an
        independent uniform draw scaled by sqrt(1 - rho**2). Indices
        are 0-based over all inputs, so irrelevant inputs may be
        correlated with relevant ones.
    n : number of units in the panel.
    n_relevant / n_irrelevant : how many inputs enter the production
        function and how many are pure noise. Relevant inputs occupy
        the leading indices.
    log_range : (a, b) interval for the uniform log-input draws.
    target_efficiency : desired mean of the efficiency multiplier;
        ignored when ``sigma`` is given explicitly.
    sigma : optional fixed half-normal scale for the inefficiency
        term; ``sigma=0`` produces a fully efficient panel.
    label : free-text description for reports.
    """

    id: int
    rts: str
    alpha: tuple[float, ...]
    correlations: tuple[tuple[int, int, float], ...] = ()
    n: int = 100
    n_relevant: int = 3
    n_irrelevant: int = 1
    log_range: tuple[float, float] = _LOG_RANGE
    target_efficiency: float = 0.85
    sigma: float | None = None
    label: str = ""

    def __post_init__(self) -> None:
        if self.rts not in ("crs", "vrs"):
            raise InputError(f"rts must be 'crs' or 'vrs', got {self.rts!r}")
        if self.n < 2:
            raise InputError("a panel needs at least 2 units")
        if self.n_relevant < 1 or self.n_irrelevant < 0:
            raise InputError("need >= 1 relevant and >= 0 irrelevant inputs")
        if len(self.alpha) != self.n_relevant:
            raise InputError(
                f"alpha has {len(self.alpha)} entries for "
                f"{self.n_relevant} relevant inputs"
            )
        if any(a <= 0 for a in self.alpha):
            raise InputError("elasticities must be positive")
        total = sum(self.alpha)
        if self.rts == "crs" and abs(total - 1.0) > 1e-9:
            raise InputError(f"CRS elasticities must sum to 1, got {total}")
        if self.rts == "vrs" and total >= 1.0 - 1e-12:
            raise InputError(f"VRS elasticities must sum below 1, got {total}")
        m = self.n_inputs
        for (i, j, rho) in self.correlations:
            if not (0 <= i < m and 0 <= j < m) or i == j:
                raise InputError(f"bad correlation pair ({i}, {j})")
            if abs(rho) > 1.0:
                raise InputError(f"correlation {rho} outside [-1, 1]")
        a, b = self.log_range
        if not a < b:
            raise InputError("log_range must satisfy a < b")
        if not 0.0 < self.target_efficiency < 1.0:
            if self.sigma is None:
                raise InputError("target_efficiency must lie in (0, 1)")
        if self.sigma is not None and self.sigma < 0:
            raise InputError("sigma must be nonnegative")

    @property
    def n_inputs(self) -> int:
        return self.n_relevant + self.n_irrelevant

    @property
    def relevant_inputs(self) -> tuple[int, ...]:
        return tuple(range(self.n_relevant))


@dataclass(frozen=True)
class TruthInfo:
    """Ground truth attached to a generated panel."""

    true_inputs: tuple[int, ...]
    epsilon: np.ndarray = field(repr=False)
    sigma: float
    seed: int

    def __post_init__(self) -> None:
        eps = np.asarray(self.epsilon, dtype=float)
        if eps.ndim != 1:
            raise InputError("epsilon must be a vector")
        if np.any(eps <= 0) or np.any(eps > 1.0 + 1e-12):
            raise InputError("efficiency multipliers must lie in (0, 1]")
        object.__setattr__(self, "epsilon", eps)


def correlate(x_j: np.ndarray, rho: float, w: np.ndarray) -> np.ndarray:
    """Mix a driver vector with independent noise at correlation ``rho``.

    Returns ``rho * x_j + sqrt(1 - rho**2) * w``. When ``x_j`` and
    ``w`` are i.i.d. with a common variance, the result has population
    correlation exactly ``rho`` with ``x_j``.
    """
    x_j = np.asarray(x_j, dtype=float)
    w = np.asarray(w, dtype=float)
    if x_j.shape != w.shape:
        raise InputError("driver and noise vectors must share a shape")
    if abs(rho) > 1.0:
        raise InputError(f"correlation {rho} outside [-1, 1]")
    return rho * x_j + math.sqrt(1.0 - rho * rho) * w


def calibrate_sigma(target_mean_eff: float) -> float:
    """Half-normal scale whose efficiency multiplier has a given mean.

    With inefficiency u = sigma * |Z| and multiplier eps = exp(-u),
    the mean efficiency is ``2 * exp(sigma**2 / 2) * (1 - Phi(sigma))``.
    Solves that expression for sigma by bracketed root-finding.
    """
    if not 0.0 < target_mean_eff < 1.0:
        raise InputError("target mean efficiency must lie in (0, 1)")

    def gap(sigma: float) -> float:
        return 2.0 * math.exp(0.5 * sigma * sigma) * (1.0 - ndtr(sigma)) - target_mean_eff

    hi = 1.0
    while gap(hi) > 0.0:
        hi *= 2.0
        if hi > 64.0:  # mean efficiency is then far below any valid target
            raise InputError("failed to bracket the calibration root")
    return float(brentq(gap, 0.0, hi, xtol=1e-6, rtol=8.9e-16))


def _half_normal(rng: np.random.Generator, sigma: float, n: int) -> np.ndarray:
    # |sigma * Z| via the inverse CDF of |Z|, so the draw consumes exactly
    # one uniform per value and never rejects.
    return sigma * ndtri(0.5 * (1.0 + rng.random(n)))


def generate_scenario(
    scenario: Scenario, seed: int | np.random.SeedSequence
) -> tuple[DataSet, TruthInfo]:
    """Generate one panel: levels data plus its ground truth.

    Deterministic given (scenario, seed). Draw order is fixed: all
    log-input draws first, then one fresh noise vector per correlation
    triple (in listed order), then the inefficiency draws.
    """
    rng = np.random.default_rng(seed)
    a, b = scenario.log_range
    m, n = scenario.n_inputs, scenario.n
    log_x = rng.uniform(a, b, size=(m, n))
    for (i, j, rho) in scenario.correlations:
        w = rng.uniform(a, b, size=n)
        log_x[i] = correlate(log_x[j], rho, w)

    sigma = scenario.sigma
    if sigma is None:
        sigma = calibrate_sigma(scenario.target_efficiency)
    u = _half_normal(rng, sigma, n) if sigma > 0 else np.zeros(n)

    alpha = np.asarray(scenario.alpha, dtype=float)
    log_y = alpha @ log_x[: scenario.n_relevant] - u
    data = DataSet.from_arrays(np.exp(log_x), np.exp(log_y)[np.newaxis, :])
    seed_label = seed.entropy if isinstance(seed, np.random.SeedSequence) else seed
    truth = TruthInfo(
        true_inputs=scenario.relevant_inputs,
        epsilon=np.exp(-u),
        sigma=float(sigma),
        seed=int(seed_label) if np.isscalar(seed_label) else -1,
    )
    return data, truth


_THIRDS = (1.0 / 3.0,) * 3
_QUARTERS = (0.25,) * 3
_BASE = dict(n_relevant=3, n_irrelevant=1)


def _catalog() -> dict[int, dict]:
    rho_mixed = ((1, 0, 0.8), (2, 0, 0.2))
    skew_crs = (1.0 / 3.0, 4.0 / 9.0, 2.0 / 9.0)
    skew_vrs = (0.25, 1.0 / 3.0, 1.0 / 6.0)
    return {
        1: dict(_BASE, label="independent inputs", alpha={"crs": _THIRDS, "vrs": _QUARTERS}),
        2: dict(
            _BASE,
            label="correlated inputs",
            alpha={"crs": _THIRDS, "vrs": _QUARTERS},
            correlations=rho_mixed,
        ),
        3: dict(
            _BASE,
            label="highly correlated inputs",
            alpha={"crs": _THIRDS, "vrs": _QUARTERS},
            correlations=((1, 0, 0.8), (2, 0, 0.8)),
        ),
        4: dict(
            _BASE,
            label="uneven input contributions",
            alpha={"crs": skew_crs, "vrs": skew_vrs},
        ),
        5: dict(
            _BASE,
            label="correlated inputs, uneven contributions",
            alpha={"crs": skew_crs, "vrs": skew_vrs},
            correlations=rho_mixed,
        ),
        6: dict(
            _BASE,
            label="correlated inputs, contributions reversed",
            alpha={
                "crs": (1.0 / 3.0, 2.0 / 9.0, 4.0 / 9.0),
                "vrs": (0.25, 1.0 / 6.0, 1.0 / 3.0),
            },
            correlations=rho_mixed,
        ),
        7: dict(
            _BASE,
            label="noise input correlated with a real one",
            alpha={"crs": _THIRDS, "vrs": _QUARTERS},
            correlations=((3, 0, 0.8),),
        ),
        8: dict(_BASE, label="small panel", alpha={"crs": _THIRDS, "vrs": _QUARTERS}, n=25),
        9: dict(_BASE, label="large panel", alpha={"crs": _THIRDS, "vrs": _QUARTERS}, n=300),
        10: dict(
            label="four real inputs",
            alpha={"crs": (0.25,) * 4, "vrs": (0.2,) * 4},
            n_relevant=4,
            n_irrelevant=1,
        ),
        11: dict(
            label="two real inputs",
            alpha={"crs": (0.5, 0.5), "vrs": (1.0 / 3.0, 1.0 / 3.0)},
            n_relevant=2,
            n_irrelevant=1,
        ),
        12: dict(
            _BASE,
            label="three noise inputs",
            alpha={"crs": _THIRDS, "vrs": _QUARTERS},
            n_irrelevant=3,
        ),
    }


STANDARD_SCENARIO_IDS: tuple[int, ...] = tuple(range(1, 13))


def standard_scenario(scenario_id: int, rts: str, **overrides) -> Scenario:
    """Build one of the twelve stock scenarios for the given returns
    to scale, optionally overriding fields such as ``n`` or ``sigma``.
    """
    catalog = _catalog()
    if scenario_id not in catalog:
        raise InputError(f"unknown scenario id {scenario_id}; valid: 1-12")
    entry = dict(catalog[scenario_id])
    alpha = entry.pop("alpha")[rts] if rts in ("crs", "vrs") else None
    if alpha is None:
        raise InputError(f"rts must be 'crs' or 'vrs', got {rts!r}")
    fields = dict(id=scenario_id, rts=rts, alpha=alpha, **entry)
    fields.update(overrides)
    return Scenario(**fields)
