"""Monte Carlo experiment harness.

Runs the head-to-head comparison of the input-selection methods: for
each scenario, returns-to-scale regime, and trial it generates a seeded
panel, lets every configured method pick an input set, scores the panel
radially on both the selected and the true inputs, and accumulates
score-agreement metrics, efficient-unit identification rates, and
wall-clock timings. Aggregates land in four fixed-layout CSV tables
(score agreement under constant and under variable returns to scale,
identification rates, selection times) plus machine-readable JSON.

Determinism: every number in the main report document is a pure
function of the configuration and the master seed. Wall-clock timings
are inherently volatile, so they are excluded from the main JSON and
written to a separate timings file and the timing table instead; two
runs with the same configuration produce byte-identical main reports.

Seeding: trial (scenario_id, trial) under master seed M draws from
``numpy.random.SeedSequence((M, scenario_id, trial))``, so any slice of
the experiment grid can be reproduced in isolation. The CRS and VRS
variants of a stock scenario share input draws (paired comparison).
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
import math
import time
import warnings
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .benchmarks import EcmParams, RbParams, ecm_backward_select, rb_select
from .data import DataSet
from .datagen import STANDARD_SCENARIO_IDS, Scenario, generate_scenario, standard_scenario
from .dea import bcc_output_scores, ccr_output_scores, efficient_set
from .exceptions import InputError, SolverFailure, TuningError, UndecidableError
from .grouplasso import MODELS, AdmmOptions, admm_solve, assemble_gl_problem
from .metrics import IdentificationMetrics, ScoreMetrics, identification_metrics, score_metrics

__all__ = [
    "METHOD_NAMES",
    "DEFAULT_LAMBDA_GRID",
    "GlParams",
    "Tolerances",
    "ExperimentConfig",
    "TrialRecord",
    "AggregateRecord",
    "ExperimentReport",
    "collinearity_scale",
    "penalty_scale",
    "tune_lambda",
    "run_experiment",
    "emit_report",
    "load_config",
    "report_from_dict",
    "load_report",
    "merge_timings",
]

METHOD_NAMES = ("GL", "ECM", "RB")
_RTS_KINDS = ("crs", "vrs")

# Dimensionless penalty grid: zero plus 20 log-spaced points spanning
# five decades, wide enough to bracket the sparsity elbow on any stock
# scenario.
DEFAULT_LAMBDA_GRID = (0.0,) + tuple(float(v) for v in np.logspace(-3.0, 2.0, 20))

# Tuning needs a handful of units to say anything; below this the
# training panel is topped up (or the trial fails if the panel itself
# is smaller).
_MIN_TRAINING_DMUS = 5

_SCALING_MODES = ("collinearity", "absolute")


def _package_version() -> str:
    try:
        from importlib.metadata import PackageNotFoundError, version
    except ImportError:  # pragma: no cover
        return "0+unknown"
    try:
        return version("deaselect")
    except PackageNotFoundError:  # pragma: no cover
        return "0+unknown"


# ---------------------------------------------------------------------------
# configuration
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class GlParams:
    """Group-lasso pipeline knobs.

    The solver runs with a constant penalty parameter ``mu`` and
    per-side scaled residual tolerances; the looser ``tuning_*``
    tolerances apply to the small training-panel solves, where the
    elbow rule only needs loss values at coarse (tau-level) resolution.
    ``lambda_scaling`` maps the dimensionless grid onto each panel:
    "collinearity" multiplies by sqrt(n) times the floored smallest
    eigenvalue root of the log-input correlation matrix (grid values
    transfer across panel sizes and correlation structures),
    "absolute" uses grid values as-is. Defaults are calibrated on the
    stock scenario family.
    """

    mu: float = 150.0
    max_iter: int = 5000
    primal_tol: float = 5e-3
    dual_tol: float = 8e-3
    tuning_primal_tol: float = 2.5e-2
    tuning_dual_tol: float = 4e-2
    eps_select: float = 0.05
    model: str = "additive"
    lambda_scaling: str = "collinearity"
    elbow_tau: float = 0.05

    def __post_init__(self) -> None:
        if not (self.mu > 0 and self.primal_tol > 0 and self.dual_tol > 0):
            raise InputError("mu and solve tolerances must be positive")
        if not (self.tuning_primal_tol > 0 and self.tuning_dual_tol > 0):
            raise InputError("tuning tolerances must be positive")
        if self.max_iter < 1:
            raise InputError("max_iter must be >= 1")
        if not self.eps_select > 0:
            raise InputError("eps_select must be positive")
        if self.model not in MODELS:
            raise InputError(f"model must be one of {MODELS}, got {self.model!r}")
        if self.lambda_scaling not in _SCALING_MODES:
            raise InputError(
                f"lambda_scaling must be one of {_SCALING_MODES}, got {self.lambda_scaling!r}"
            )
        if not self.elbow_tau >= 0:
            raise InputError("elbow_tau must be nonnegative")

    def solve_options(self) -> AdmmOptions:
        return AdmmOptions(
            mu=self.mu,
            max_iter=self.max_iter,
            primal_tol=self.primal_tol,
            dual_tol=self.dual_tol,
            eps_select=self.eps_select,
        )

    def tuning_options(self) -> AdmmOptions:
        return AdmmOptions(
            mu=self.mu,
            max_iter=self.max_iter,
            primal_tol=self.tuning_primal_tol,
            dual_tol=self.tuning_dual_tol,
            eps_select=self.eps_select,
        )


@dataclass(frozen=True)
class Tolerances:
    """Metric-side tolerances: ``efficient`` is the frontier-membership
    cutoff used when classifying units as efficient."""

    efficient: float = 1e-6

    def __post_init__(self) -> None:
        if not self.efficient > 0:
            raise InputError("efficient tolerance must be positive")


_GL_KEYS = (
    "mu",
    "max_iter",
    "primal_tol",
    "dual_tol",
    "tuning_primal_tol",
    "tuning_dual_tol",
    "eps_select",
    "model",
    "lambda_scaling",
    "elbow_tau",
)
_ECM_KEYS = ("p0", "gamma_bar", "alpha")
_RB_KEYS = ("confidence", "seed_input")
_TOLERANCE_KEYS = ("efficient",)
_SCENARIO_KEYS = (
    "id",
    "rts",
    "alpha",
    "correlations",
    "n",
    "n_relevant",
    "n_irrelevant",
    "log_range",
    "target_efficiency",
    "sigma",
    "label",
)
_CONFIG_KEYS = (
    "scenarios",
    "methods",
    "trials",
    "master_seed",
    "rts",
    "lambda_grid",
    "training_fraction",
    "tolerances",
    "output_dir",
    "gl",
    "ecm",
    "rb",
    "ecm_trial_cap",
)


def _reject_unknown(block: dict, allowed, where: str) -> None:
    unknown = sorted(set(block) - set(allowed))
    if unknown:
        raise InputError(f"unknown {where} keys: {', '.join(unknown)}")


def _require_type(value, types, where: str):
    if not isinstance(value, types) or isinstance(value, bool):
        raise InputError(f"{where} has the wrong type: {value!r}")
    return value


@dataclass(frozen=True)
class ExperimentConfig:
    """Full description of one experiment run.

    ``scenarios`` entries are stock scenario ids (expanded over the
    ``rts`` axis) or inline :class:`Scenario` records (run exactly as
    given, under their own returns-to-scale setting). ``lambda_grid``
    is dimensionless when ``gl.lambda_scaling`` is "collinearity".
    ``ecm_trial_cap`` limits the backward-elimination method to the
    first so-many trials per scenario (it is by far the slowest method
    on large panels); capped trials are marked skipped, not failed.
    """

    scenarios: tuple = STANDARD_SCENARIO_IDS
    methods: tuple = METHOD_NAMES
    trials: int = 20
    master_seed: int = 20260819
    rts: tuple = _RTS_KINDS
    lambda_grid: tuple = DEFAULT_LAMBDA_GRID
    training_fraction: float = 0.10
    tolerances: Tolerances = Tolerances()
    output_dir: str = "results"
    gl: GlParams = GlParams()
    ecm: EcmParams = EcmParams()
    rb: RbParams = RbParams()
    ecm_trial_cap: int | None = None

    def __post_init__(self) -> None:
        scenarios = tuple(self.scenarios)
        if not scenarios:
            raise InputError("scenarios must be non-empty")
        for entry in scenarios:
            if isinstance(entry, Scenario):
                continue
            if isinstance(entry, bool) or not isinstance(entry, int):
                raise InputError(f"scenario entries must be ids or records, got {entry!r}")
            if entry not in STANDARD_SCENARIO_IDS:
                raise InputError(f"unknown scenario id {entry}; valid: 1-12")
        object.__setattr__(self, "scenarios", scenarios)

        methods = tuple(self.methods)
        if not methods:
            raise InputError("methods must be non-empty")
        if len(set(methods)) != len(methods):
            raise InputError("methods must be unique")
        for mth in methods:
            if mth not in METHOD_NAMES:
                raise InputError(f"unknown method {mth!r}; valid: {METHOD_NAMES}")
        object.__setattr__(self, "methods", methods)

        if isinstance(self.trials, bool) or not isinstance(self.trials, int) or self.trials < 1:
            raise InputError(f"trials must be an integer >= 1, got {self.trials!r}")
        if (
            isinstance(self.master_seed, bool)
            or not isinstance(self.master_seed, int)
            or self.master_seed < 0
        ):
            raise InputError(f"master_seed must be a nonnegative integer, got {self.master_seed!r}")

        rts = tuple(self.rts)
        if not rts or len(set(rts)) != len(rts) or any(r not in _RTS_KINDS for r in rts):
            raise InputError(f"rts must be a non-empty subset of {_RTS_KINDS}, got {rts!r}")
        object.__setattr__(self, "rts", rts)

        grid = tuple(float(v) for v in self.lambda_grid)
        if not grid:
            raise InputError("lambda_grid must be non-empty")
        if any(not math.isfinite(v) or v < 0 for v in grid):
            raise InputError("lambda_grid values must be finite and nonnegative")
        if any(b <= a for a, b in zip(grid, grid[1:])):
            raise InputError("lambda_grid must be strictly increasing")
        object.__setattr__(self, "lambda_grid", grid)

        if not 0.0 < self.training_fraction < 1.0:
            raise InputError(
                f"training_fraction must lie in (0, 1), got {self.training_fraction!r}"
            )
        if not isinstance(self.output_dir, str) or not self.output_dir:
            raise InputError("output_dir must be a non-empty string")
        if self.ecm_trial_cap is not None:
            if (
                isinstance(self.ecm_trial_cap, bool)
                or not isinstance(self.ecm_trial_cap, int)
                or self.ecm_trial_cap < 0
            ):
                raise InputError("ecm_trial_cap must be null or an integer >= 0")

    # -- serialization -------------------------------------------------
    @classmethod
    def from_dict(cls, raw: dict) -> "ExperimentConfig":
        """Build a config from parsed JSON; unknown keys are rejected."""
        if not isinstance(raw, dict):
            raise InputError("config must be a JSON object")
        _reject_unknown(raw, _CONFIG_KEYS, "config")
        kwargs: dict = {}
        if "scenarios" in raw:
            entries = _require_type(raw["scenarios"], list, "scenarios")
            kwargs["scenarios"] = tuple(
                _scenario_from_dict(e) if isinstance(e, dict) else e for e in entries
            )
        if "methods" in raw:
            kwargs["methods"] = tuple(_require_type(raw["methods"], list, "methods"))
        if "trials" in raw:
            kwargs["trials"] = raw["trials"]
        if "master_seed" in raw:
            kwargs["master_seed"] = raw["master_seed"]
        if "rts" in raw:
            kwargs["rts"] = tuple(_require_type(raw["rts"], list, "rts"))
        if "lambda_grid" in raw:
            kwargs["lambda_grid"] = tuple(_require_type(raw["lambda_grid"], list, "lambda_grid"))
        if "training_fraction" in raw:
            kwargs["training_fraction"] = _require_type(
                raw["training_fraction"], (int, float), "training_fraction"
            )
        if "tolerances" in raw:
            block = _require_type(raw["tolerances"], dict, "tolerances")
            _reject_unknown(block, _TOLERANCE_KEYS, "tolerances")
            kwargs["tolerances"] = Tolerances(**block)
        if "output_dir" in raw:
            kwargs["output_dir"] = raw["output_dir"]
        if "gl" in raw:
            block = _require_type(raw["gl"], dict, "gl")
            _reject_unknown(block, _GL_KEYS, "gl")
            kwargs["gl"] = GlParams(**block)
        if "ecm" in raw:
            block = _require_type(raw["ecm"], dict, "ecm")
            _reject_unknown(block, _ECM_KEYS, "ecm")
            kwargs["ecm"] = EcmParams(**block)
        if "rb" in raw:
            block = _require_type(raw["rb"], dict, "rb")
            _reject_unknown(block, _RB_KEYS, "rb")
            kwargs["rb"] = RbParams(**block)
        if "ecm_trial_cap" in raw:
            kwargs["ecm_trial_cap"] = raw["ecm_trial_cap"]
        return cls(**kwargs)

    def to_dict(self) -> dict:
        """JSON-ready dict; ``from_dict`` of it reproduces the config."""
        return {
            "scenarios": [
                _scenario_to_dict(e) if isinstance(e, Scenario) else int(e)
                for e in self.scenarios
            ],
            "methods": list(self.methods),
            "trials": self.trials,
            "master_seed": self.master_seed,
            "rts": list(self.rts),
            "lambda_grid": list(self.lambda_grid),
            "training_fraction": self.training_fraction,
            "tolerances": {"efficient": self.tolerances.efficient},
            "output_dir": self.output_dir,
            "gl": {key: getattr(self.gl, key) for key in _GL_KEYS},
            "ecm": {key: getattr(self.ecm, key) for key in _ECM_KEYS},
            "rb": {key: getattr(self.rb, key) for key in _RB_KEYS},
            "ecm_trial_cap": self.ecm_trial_cap,
        }

    def config_hash(self) -> str:
        canon = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canon.encode("utf-8")).hexdigest()


def _scenario_from_dict(raw: dict) -> Scenario:
    _reject_unknown(raw, _SCENARIO_KEYS, "scenario record")
    for required in ("id", "rts", "alpha"):
        if required not in raw:
            raise InputError(f"scenario record missing required key {required!r}")
    fields_: dict = dict(raw)
    fields_["alpha"] = tuple(float(a) for a in _require_type(raw["alpha"], list, "alpha"))
    if "correlations" in fields_:
        triples = _require_type(raw["correlations"], list, "correlations")
        fields_["correlations"] = tuple(
            (int(i), int(j), float(rho)) for (i, j, rho) in triples
        )
    if "log_range" in fields_:
        lo, hi = _require_type(raw["log_range"], list, "log_range")
        fields_["log_range"] = (float(lo), float(hi))
    return Scenario(**fields_)


def _scenario_to_dict(sc: Scenario) -> dict:
    return {
        "id": sc.id,
        "rts": sc.rts,
        "alpha": list(sc.alpha),
        "correlations": [list(t) for t in sc.correlations],
        "n": sc.n,
        "n_relevant": sc.n_relevant,
        "n_irrelevant": sc.n_irrelevant,
        "log_range": list(sc.log_range),
        "target_efficiency": sc.target_efficiency,
        "sigma": sc.sigma,
        "label": sc.label,
    }


def load_config(path) -> ExperimentConfig:
    """Read an experiment config from a JSON file."""
    text = Path(path).read_text(encoding="utf-8")
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise InputError(f"config file is not valid JSON: {exc}") from exc
    return ExperimentConfig.from_dict(raw)


# ---------------------------------------------------------------------------
# penalty scaling and tuning
# ---------------------------------------------------------------------------


def collinearity_scale(X, floor: float = 0.05) -> float:
    """Square root of the floored smallest eigenvalue of the log-input
    correlation matrix.

    Near-collinear inputs let the optimizer shift weight between
    correlated groups at little cost, so a smaller penalty suffices to
    empty a redundant group; this factor shrinks the penalty
    accordingly. The floor keeps the scale usable when the correlation
    matrix is numerically singular.
    """
    X = np.asarray(X, dtype=float)
    if X.ndim != 2:
        raise InputError("X must be a matrix (inputs by units)")
    if X.shape[0] < 2:
        return 1.0
    with np.errstate(divide="ignore", invalid="ignore"):
        corr = np.corrcoef(np.log(X))
    smallest = float(np.linalg.eigvalsh(np.nan_to_num(corr, nan=0.0))[0])
    if not math.isfinite(smallest):
        smallest = floor
    return math.sqrt(max(smallest, floor))


def penalty_scale(mode: str, data: DataSet) -> float:
    """Factor mapping a dimensionless penalty grid value onto a panel.

    The group penalty needed to zero an irrelevant input grows like
    sqrt(n) (each group stacks one coefficient per unit), and shrinks
    with input collinearity; "collinearity" scaling applies both
    corrections, "absolute" applies none.
    """
    if mode not in _SCALING_MODES:
        raise InputError(f"lambda_scaling must be one of {_SCALING_MODES}, got {mode!r}")
    if mode == "absolute":
        return 1.0
    return math.sqrt(data.n) * collinearity_scale(data.X)


def tune_lambda(
    train_data: DataSet,
    model: str = "additive",
    grid=DEFAULT_LAMBDA_GRID,
    tau: float = 0.05,
    options: AdmmOptions | None = None,
) -> float:
    """Pick the penalty weight by an elbow rule on the training loss.

    Solves the penalized problem on the training panel at every grid
    value and returns the largest one whose loss term (the linear
    objective, penalty excluded) stays within a factor (1 + tau) of the
    unpenalized loss — the strongest shrinkage that costs at most tau
    in fit. Grid values whose solve does not converge are skipped with
    a warning; if no grid value survives, a tuning error is raised. If
    grid values survive but none passes the loss test, the smallest
    surviving one is returned (least shrinkage among usable values).

    ``grid`` entries here are absolute penalty weights for this panel;
    callers working in dimensionless units rescale before and after.
    """
    grid = tuple(float(v) for v in grid)
    if not grid:
        raise InputError("grid must be non-empty")
    if any(not math.isfinite(v) or v < 0 for v in grid):
        raise InputError("grid values must be finite and nonnegative")
    if any(b <= a for a, b in zip(grid, grid[1:])):
        raise InputError("grid must be strictly increasing")
    if not tau >= 0:
        raise InputError("tau must be nonnegative")
    if model not in MODELS:
        raise InputError(f"model must be one of {MODELS}, got {model!r}")
    if train_data.n < _MIN_TRAINING_DMUS:
        raise InputError(
            f"training panel has {train_data.n} units; need >= {_MIN_TRAINING_DMUS}"
        )
    if grid[-1] == 0.0:
        return 0.0  # only the unpenalized point is on offer

    options = options or GlParams().tuning_options()

    def training_loss(lam: float):
        problem = assemble_gl_problem(train_data, model, lam=lam)
        state, _ = admm_solve(problem, options)
        return problem.loss_value(state.z), state.converged

    reference, ref_converged = training_loss(0.0)
    if not ref_converged:
        raise TuningError("tuning reference solve at zero penalty did not converge")
    # (1 + tau) * reference, written to keep a usable band when the
    # computed reference is a numerically tiny negative.
    budget = reference + tau * abs(reference)

    chosen = None
    smallest_surviving = None
    for lam in grid:
        if lam == 0.0:
            loss = reference
        else:
            loss, converged = training_loss(lam)
            if not converged:
                warnings.warn(
                    f"penalty grid value {lam:g} skipped: training solve did not converge"
                )
                continue
        if smallest_surviving is None:
            smallest_surviving = lam
        if loss <= budget:
            chosen = lam  # grid is increasing, so the last hit is the largest
    if smallest_surviving is None:
        raise TuningError("every penalty grid value failed to converge on the training panel")
    return chosen if chosen is not None else smallest_surviving


# ---------------------------------------------------------------------------
# report records
# ---------------------------------------------------------------------------


@dataclass
class TrialRecord:
    """One (scenario, rts, method, trial) cell of the experiment grid."""

    scenario_id: int
    rts: str
    label: str
    method: str
    trial: int
    true_inputs: tuple
    n_inputs: int
    selected: tuple | None = None
    exact: bool | None = None
    true_efficiency: tuple | None = None
    model_efficiency: tuple | None = None
    scores: ScoreMetrics | None = None
    identification: IdentificationMetrics | None = None
    seconds: float | None = None
    tuning_seconds: float | None = None
    lam: float | None = None
    lam_grid_value: float | None = None
    converged: bool | None = None
    iterations: int | None = None
    skipped: bool = False
    error: str | None = None


@dataclass
class AggregateRecord:
    """Means over the trials of one (scenario, rts, method) cell."""

    scenario_id: int
    rts: str
    label: str
    method: str
    n_trials: int
    n_scored: int
    n_identified: int
    n_failed: int
    n_skipped: int
    n_nonconverged: int | None
    mse: float | None
    pearson: float | None
    spearman: float | None
    pct_all_correct: float | None
    pct_efficient_correct: float | None
    exact_selection_rate: float | None
    seconds: float | None
    tuning_seconds: float | None


@dataclass
class ExperimentReport:
    """Everything one run produced: trial rows, aggregates, provenance."""

    config: ExperimentConfig
    records: list
    aggregates: list
    errors: list
    provenance: dict

    def to_dict(self, include_timings: bool = False) -> dict:
        return {
            "schema": "deaselect-report/1",
            "provenance": dict(self.provenance),
            "config": self.config.to_dict(),
            "trials": [_trial_to_dict(r, include_timings) for r in self.records],
            "aggregates": [_aggregate_to_dict(a, include_timings) for a in self.aggregates],
            "errors": list(self.errors),
        }

    def timings_dict(self) -> dict:
        return {
            "schema": "deaselect-timings/1",
            "provenance": dict(self.provenance),
            "trials": [
                {
                    "scenario": r.scenario_id,
                    "rts": r.rts,
                    "method": r.method,
                    "trial": r.trial,
                    "seconds": r.seconds,
                    "tuning_seconds": r.tuning_seconds,
                }
                for r in self.records
            ],
            "aggregates": [
                {
                    "scenario": a.scenario_id,
                    "rts": a.rts,
                    "method": a.method,
                    "seconds": a.seconds,
                    "tuning_seconds": a.tuning_seconds,
                }
                for a in self.aggregates
            ],
        }


def _trial_to_dict(rec: TrialRecord, include_timings: bool) -> dict:
    out = {
        "scenario": rec.scenario_id,
        "rts": rec.rts,
        "label": rec.label,
        "method": rec.method,
        "trial": rec.trial,
        "true_inputs": list(rec.true_inputs),
        "n_inputs": rec.n_inputs,
        "selected": None if rec.selected is None else list(rec.selected),
        "exact": rec.exact,
        "lambda": rec.lam,
        "lambda_grid_value": rec.lam_grid_value,
        "converged": rec.converged,
        "iterations": rec.iterations,
        "true_efficiency": None if rec.true_efficiency is None else list(rec.true_efficiency),
        "model_efficiency": None if rec.model_efficiency is None else list(rec.model_efficiency),
        "scores": None
        if rec.scores is None
        else {
            "mse": rec.scores.mse,
            "pearson": rec.scores.pearson,
            "spearman": rec.scores.spearman,
        },
        "identification": None
        if rec.identification is None
        else {
            "pct_all_correct": rec.identification.pct_all_correct,
            "pct_efficient_correct": rec.identification.pct_efficient_correct,
        },
        "skipped": rec.skipped,
        "error": rec.error,
    }
    if include_timings:
        out["seconds"] = rec.seconds
        out["tuning_seconds"] = rec.tuning_seconds
    return out


def _aggregate_to_dict(agg: AggregateRecord, include_timings: bool) -> dict:
    out = {
        "scenario": agg.scenario_id,
        "rts": agg.rts,
        "label": agg.label,
        "method": agg.method,
        "n_trials": agg.n_trials,
        "n_scored": agg.n_scored,
        "n_identified": agg.n_identified,
        "n_failed": agg.n_failed,
        "n_skipped": agg.n_skipped,
        "n_nonconverged": agg.n_nonconverged,
        "mse": agg.mse,
        "pearson": agg.pearson,
        "spearman": agg.spearman,
        "pct_all_correct": agg.pct_all_correct,
        "pct_efficient_correct": agg.pct_efficient_correct,
        "exact_selection_rate": agg.exact_selection_rate,
    }
    if include_timings:
        out["seconds"] = agg.seconds
        out["tuning_seconds"] = agg.tuning_seconds
    return out


def _trial_from_dict(raw: dict) -> TrialRecord:
    scores = raw.get("scores")
    ident = raw.get("identification")
    return TrialRecord(
        scenario_id=raw["scenario"],
        rts=raw["rts"],
        label=raw.get("label", ""),
        method=raw["method"],
        trial=raw["trial"],
        true_inputs=tuple(raw["true_inputs"]),
        n_inputs=raw["n_inputs"],
        selected=None if raw.get("selected") is None else tuple(raw["selected"]),
        exact=raw.get("exact"),
        true_efficiency=(
            None if raw.get("true_efficiency") is None else tuple(raw["true_efficiency"])
        ),
        model_efficiency=(
            None if raw.get("model_efficiency") is None else tuple(raw["model_efficiency"])
        ),
        scores=None if scores is None else ScoreMetrics(**scores),
        identification=None if ident is None else IdentificationMetrics(**ident),
        seconds=raw.get("seconds"),
        tuning_seconds=raw.get("tuning_seconds"),
        lam=raw.get("lambda"),
        lam_grid_value=raw.get("lambda_grid_value"),
        converged=raw.get("converged"),
        iterations=raw.get("iterations"),
        skipped=raw.get("skipped", False),
        error=raw.get("error"),
    )


def _aggregate_from_dict(raw: dict) -> AggregateRecord:
    return AggregateRecord(
        scenario_id=raw["scenario"],
        rts=raw["rts"],
        label=raw.get("label", ""),
        method=raw["method"],
        n_trials=raw["n_trials"],
        n_scored=raw["n_scored"],
        n_identified=raw["n_identified"],
        n_failed=raw["n_failed"],
        n_skipped=raw["n_skipped"],
        n_nonconverged=raw.get("n_nonconverged"),
        mse=raw.get("mse"),
        pearson=raw.get("pearson"),
        spearman=raw.get("spearman"),
        pct_all_correct=raw.get("pct_all_correct"),
        pct_efficient_correct=raw.get("pct_efficient_correct"),
        exact_selection_rate=raw.get("exact_selection_rate"),
        seconds=raw.get("seconds"),
        tuning_seconds=raw.get("tuning_seconds"),
    )


def report_from_dict(raw: dict) -> ExperimentReport:
    """Rebuild a report from its JSON form (timings absent unless the
    stored document included them)."""
    if not isinstance(raw, dict):
        raise InputError("report must be a JSON object")
    if raw.get("schema") != "deaselect-report/1":
        raise InputError(f"unrecognized report schema: {raw.get('schema')!r}")
    try:
        return ExperimentReport(
            config=ExperimentConfig.from_dict(raw["config"]),
            records=[_trial_from_dict(t) for t in raw["trials"]],
            aggregates=[_aggregate_from_dict(a) for a in raw["aggregates"]],
            errors=list(raw.get("errors", [])),
            provenance=dict(raw.get("provenance", {})),
        )
    except (KeyError, TypeError) as exc:
        raise InputError(f"malformed report document: {exc!r}") from exc


def load_report(path) -> ExperimentReport:
    """Read a stored report JSON file back into an ExperimentReport."""
    text = Path(path).read_text(encoding="utf-8")
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise InputError(f"report file is not valid JSON: {exc}") from exc
    return report_from_dict(raw)


def merge_timings(report: ExperimentReport, timings: dict) -> ExperimentReport:
    """Fill a (reloaded) report's timing fields from a timings document
    produced alongside it. Rows without a matching entry are left as-is."""
    if timings.get("schema") != "deaselect-timings/1":
        raise InputError(f"unrecognized timings schema: {timings.get('schema')!r}")
    by_trial = {
        (t["scenario"], t["rts"], t["method"], t["trial"]): t
        for t in timings.get("trials", [])
    }
    for rec in report.records:
        entry = by_trial.get((rec.scenario_id, rec.rts, rec.method, rec.trial))
        if entry is not None:
            rec.seconds = entry.get("seconds")
            rec.tuning_seconds = entry.get("tuning_seconds")
    by_agg = {
        (a["scenario"], a["rts"], a["method"]): a for a in timings.get("aggregates", [])
    }
    for agg in report.aggregates:
        entry = by_agg.get((agg.scenario_id, agg.rts, agg.method))
        if entry is not None:
            agg.seconds = entry.get("seconds")
            agg.tuning_seconds = entry.get("tuning_seconds")
    return report


# ---------------------------------------------------------------------------
# experiment loop
# ---------------------------------------------------------------------------


def _expand_scenarios(config: ExperimentConfig) -> list:
    out = []
    for entry in config.scenarios:
        if isinstance(entry, Scenario):
            out.append(entry)
        else:
            out.extend(standard_scenario(entry, r) for r in config.rts)
    return out


def _select_gl(config: ExperimentConfig, data: DataSet, rec: TrialRecord):
    gl = config.gl
    n_train = min(max(math.ceil(config.training_fraction * data.n), _MIN_TRAINING_DMUS), data.n)
    train = data.take_dmus(range(n_train))

    tune_start = time.perf_counter()
    train_scale = penalty_scale(gl.lambda_scaling, train)
    train_grid = tuple(v * train_scale for v in config.lambda_grid)
    lam_train = tune_lambda(
        train, model=gl.model, grid=train_grid, tau=gl.elbow_tau, options=gl.tuning_options()
    )
    grid_value = config.lambda_grid[train_grid.index(lam_train)]
    rec.tuning_seconds = time.perf_counter() - tune_start
    rec.lam_grid_value = grid_value

    lam_full = grid_value * penalty_scale(gl.lambda_scaling, data)
    rec.lam = lam_full
    solve_start = time.perf_counter()
    problem = assemble_gl_problem(data, gl.model, lam=lam_full)
    state, selection = admm_solve(problem, gl.solve_options())
    rec.seconds = time.perf_counter() - solve_start
    rec.converged = state.converged
    rec.iterations = state.iteration
    return selection


def _run_method(
    config: ExperimentConfig,
    scenario: Scenario,
    trial: int,
    data: DataSet,
    truth,
    reference,
    reference_mask,
    method: str,
) -> TrialRecord:
    rec = TrialRecord(
        scenario_id=scenario.id,
        rts=scenario.rts,
        label=scenario.label,
        method=method,
        trial=trial,
        true_inputs=tuple(int(i) for i in truth.true_inputs),
        n_inputs=data.m,
    )
    if reference is None:
        rec.error = "reference scoring failed (non-finite scores on the true inputs)"
        return rec
    rec.true_efficiency = tuple(float(v) for v in 1.0 / reference.scores)

    if method == "ECM" and config.ecm_trial_cap is not None and trial >= config.ecm_trial_cap:
        rec.skipped = True
        return rec

    try:
        if method == "GL":
            selection = _select_gl(config, data, rec)
        elif method == "ECM":
            start = time.perf_counter()
            selection = ecm_backward_select(
                data, range(data.m), replace(config.ecm, rts=scenario.rts)
            )
            rec.seconds = time.perf_counter() - start
        else:  # RB
            start = time.perf_counter()
            selection = rb_select(data, range(data.m), replace(config.rb, rts=scenario.rts))
            rec.seconds = time.perf_counter() - start
    except (InputError, SolverFailure, TuningError, UndecidableError) as exc:
        rec.error = f"{type(exc).__name__}: {exc}"
        return rec

    rec.selected = tuple(sorted(int(i) for i in selection.selected))
    rec.exact = set(rec.selected) == set(rec.true_inputs)
    if not rec.selected:
        return rec  # nothing chosen: model efficiencies stay missing

    score_fn = ccr_output_scores if scenario.rts == "crs" else bcc_output_scores
    model_result = score_fn(data, inputs=rec.selected)
    if not np.all(np.isfinite(model_result.scores)):
        rec.error = "model scoring failed (non-finite scores on the selected inputs)"
        return rec
    rec.model_efficiency = tuple(float(v) for v in 1.0 / model_result.scores)
    rec.scores = score_metrics(rec.true_efficiency, rec.model_efficiency)
    model_mask = efficient_set(model_result, tol=config.tolerances.efficient)
    rec.identification = identification_metrics(reference_mask, model_mask)
    return rec


def run_experiment(config: ExperimentConfig) -> ExperimentReport:
    """Run the full scenario grid and aggregate the results.

    Per trial: generate the seeded panel, score it radially on the true
    inputs (the reference), let each configured method choose inputs,
    rescore on the chosen set, and compare — squared error and
    correlations on the efficiency estimates, classification agreement
    on the tolerance-based efficient sets, selection wall-clock. A
    method failure is recorded on its row and the run continues; an
    empty selection leaves the model efficiencies missing and skips the
    identification metrics.
    """
    records: list[TrialRecord] = []
    errors: list[str] = []
    for scenario in _expand_scenarios(config):
        for trial in range(config.trials):
            seed = np.random.SeedSequence((config.master_seed, scenario.id, trial))
            data, truth = generate_scenario(scenario, seed)
            score_fn = ccr_output_scores if scenario.rts == "crs" else bcc_output_scores
            reference = score_fn(data, inputs=truth.true_inputs)
            if np.all(np.isfinite(reference.scores)):
                reference_mask = efficient_set(reference, tol=config.tolerances.efficient)
            else:
                reference = None
                reference_mask = None
            for method in config.methods:
                rec = _run_method(
                    config, scenario, trial, data, truth, reference, reference_mask, method
                )
                records.append(rec)
                if rec.error is not None:
                    errors.append(
                        f"scenario {rec.scenario_id} ({rec.rts}) {rec.method} "
                        f"trial {rec.trial}: {rec.error}"
                    )
    aggregates = _aggregate(records)
    provenance = {
        "config_hash": config.config_hash(),
        "master_seed": config.master_seed,
        "package_version": _package_version(),
    }
    return ExperimentReport(
        config=config,
        records=records,
        aggregates=aggregates,
        errors=errors,
        provenance=provenance,
    )


def _mean(values) -> float | None:
    values = [v for v in values if v is not None]
    if not values:
        return None
    return float(np.mean(values))


def _aggregate(records) -> list:
    groups: dict = {}
    for rec in records:
        groups.setdefault((rec.scenario_id, rec.rts, rec.method), []).append(rec)
    out = []
    for (sid, rts, method), rows in groups.items():
        scored = [r.scores for r in rows if r.scores is not None]
        idents = [r.identification for r in rows if r.identification is not None]
        out.append(
            AggregateRecord(
                scenario_id=sid,
                rts=rts,
                label=rows[0].label,
                method=method,
                n_trials=len(rows),
                n_scored=len(scored),
                n_identified=len(idents),
                n_failed=sum(1 for r in rows if r.error is not None),
                n_skipped=sum(1 for r in rows if r.skipped),
                n_nonconverged=(
                    sum(1 for r in rows if r.converged is False) if method == "GL" else None
                ),
                mse=_mean([s.mse for s in scored]),
                pearson=_mean([s.pearson for s in scored]),
                spearman=_mean([s.spearman for s in scored]),
                pct_all_correct=_mean([i.pct_all_correct for i in idents]),
                pct_efficient_correct=_mean([i.pct_efficient_correct for i in idents]),
                exact_selection_rate=_mean(
                    [None if r.exact is None else float(r.exact) for r in rows]
                ),
                seconds=_mean([r.seconds for r in rows]),
                tuning_seconds=_mean([r.tuning_seconds for r in rows]),
            )
        )
    return out


# ---------------------------------------------------------------------------
# report emission
# ---------------------------------------------------------------------------

_FORMATS = ("json", "timings", "tables", "long")


def _fmt(value) -> str:
    if value is None:
        return ""
    value = float(value)
    if not math.isfinite(value):
        return ""
    return repr(value)


def _csv_text(header, rows) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    writer.writerows(rows)
    return buf.getvalue()


def _aggregate_map(report: ExperimentReport) -> dict:
    return {(a.scenario_id, a.rts, a.method): a for a in report.aggregates}

def _scenario_ids(report: ExperimentReport, rts: str | None = None) -> list:
    ids = {
        a.scenario_id
        for a in report.aggregates
        if rts is None or a.rts == rts
    }
    return sorted(ids)


def _score_table(report: ExperimentReport, rts: str) -> str:
    """Score-agreement table for one returns-to-scale regime: rows are
    experiments, value columns are metric-major (each metric across the
    three methods)."""
    header = ["experiment"]
    for metric in ("mse", "pearson", "spearman"):
        header.extend(f"{metric}_{m.lower()}" for m in METHOD_NAMES)
    amap = _aggregate_map(report)
    rows = []
    for sid in _scenario_ids(report, rts):
        row = [sid]
        for metric in ("mse", "pearson", "spearman"):
            for method in METHOD_NAMES:
                agg = amap.get((sid, rts, method))
                row.append(_fmt(getattr(agg, metric)) if agg else "")
        rows.append(row)
    return _csv_text(header, rows)


def _identification_table(report: ExperimentReport) -> str:
    """Identification table: per experiment, the two classification
    rates for each returns-to-scale regime and method (metric-major,
    then regime, then method — 12 value columns)."""
    header = ["experiment"]
    for metric in ("pct_all", "pct_eff"):
        for rts in _RTS_KINDS:
            header.extend(f"{metric}_{rts}_{m.lower()}" for m in METHOD_NAMES)
    attr = {"pct_all": "pct_all_correct", "pct_eff": "pct_efficient_correct"}
    amap = _aggregate_map(report)
    rows = []
    for sid in _scenario_ids(report):
        row = [sid]
        for metric in ("pct_all", "pct_eff"):
            for rts in _RTS_KINDS:
                for method in METHOD_NAMES:
                    agg = amap.get((sid, rts, method))
                    row.append(_fmt(getattr(agg, attr[metric])) if agg else "")
        rows.append(row)
    return _csv_text(header, rows)


def _time_table(report: ExperimentReport) -> str:
    """Mean selection seconds per experiment, regime-major then method."""
    header = ["experiment"]
    for rts in _RTS_KINDS:
        header.extend(f"seconds_{rts}_{m.lower()}" for m in METHOD_NAMES)
    amap = _aggregate_map(report)
    rows = []
    for sid in _scenario_ids(report):
        row = [sid]
        for rts in _RTS_KINDS:
            for method in METHOD_NAMES:
                agg = amap.get((sid, rts, method))
                row.append(_fmt(agg.seconds) if agg else "")
        rows.append(row)
    return _csv_text(header, rows)


def _long_table(report: ExperimentReport) -> str:
    """Plot-ready long format: one aggregate value per row."""
    header = ["scenario", "rts", "method", "metric", "value"]
    metrics = (
        ("mse", "mse"),
        ("pearson", "pearson"),
        ("spearman", "spearman"),
        ("pct_all_correct", "pct_all_correct"),
        ("pct_efficient_correct", "pct_efficient_correct"),
        ("exact_selection_rate", "exact_selection_rate"),
        ("seconds", "seconds"),
    )
    rows = []
    for agg in report.aggregates:
        for name, attr in metrics:
            value = getattr(agg, attr)
            if value is None:
                continue
            rows.append([agg.scenario_id, agg.rts, agg.method, name, _fmt(value)])
    return _csv_text(header, rows)


def emit_report(report: ExperimentReport, output_dir=None, formats=None) -> dict:
    """Write the report files and return {logical name: path}.

    ``formats`` is a subset of {"json", "timings", "tables", "long"}
    (default: all). All file contents are rendered before anything is
    written, so an unwritable output path raises before any summary
    file is partially written. The main JSON is timing-free and
    byte-stable for a fixed configuration; timings go to their own
    file and the timing table.
    """
    chosen = tuple(formats) if formats is not None else _FORMATS
    for fmt in chosen:
        if fmt not in _FORMATS:
            raise InputError(f"unknown report format {fmt!r}; valid: {_FORMATS}")
    out_dir = Path(output_dir if output_dir is not None else report.config.output_dir)

    contents: dict[str, str] = {}
    if "json" in chosen:
        contents["report.json"] = (
            json.dumps(report.to_dict(include_timings=False), indent=2, sort_keys=True) + "\n"
        )
    if "timings" in chosen:
        contents["timings.json"] = (
            json.dumps(report.timings_dict(), indent=2, sort_keys=True) + "\n"
        )
    if "tables" in chosen:
        contents["table3.csv"] = _score_table(report, "crs")
        contents["table4.csv"] = _score_table(report, "vrs")
        contents["table5.csv"] = _identification_table(report)
        contents["table6.csv"] = _time_table(report)
    if "long" in chosen:
        contents["results_long.csv"] = _long_table(report)

    out_dir.mkdir(parents=True, exist_ok=True)
    written = {}
    for name, text in contents.items():
        path = out_dir / name
        path.write_text(text, encoding="utf-8")
        written[name] = path
    return written
