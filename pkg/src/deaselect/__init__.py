"""deaselect: joint input selection for data envelopment analysis.

A solver library and benchmark harness for deciding which inputs
belong in a DEA model: radial (CCR/BCC) and additive efficiency
scoring on top of a small dense LP kernel, a group-penalized
envelopment program solved by a tailored ADMM, two classical
selection procedures (backward elimination with an exact binomial
contribution test, forward regression screening), synthetic
Cobb-Douglas panel generation, agreement metrics, and a Monte Carlo
experiment harness with fixed-layout report tables and a CLI.
"""

from .benchmarks import (
    EcmParams,
    EcmTest,
    RbParams,
    ecm_backward_select,
    ecm_binomial_test,
    ecm_gamma,
    rb_select,
)
from .data import DataSet, read_panel_csv, write_panel_csv
from .datagen import (
    STANDARD_SCENARIO_IDS,
    Scenario,
    TruthInfo,
    calibrate_sigma,
    correlate,
    generate_scenario,
    standard_scenario,
)
from .dea import (
    EfficiencyResult,
    additive_scores,
    bcc_output_scores,
    ccr_output_scores,
    efficient_set,
)
from .estimators import DeaScorer, EcmSelector, GroupLassoSelector, RbSelector
from .exceptions import (
    InputError,
    NotPositiveDefiniteError,
    RankError,
    SolverFailure,
    StallError,
    StaleFactorError,
    TuningError,
    UndecidableError,
)
from .grouplasso import (
    AdmmOptions,
    AdmmState,
    GLProblem,
    SelectionResult,
    admm_solve,
    assemble_gl_problem,
    block_soft_threshold,
    select_inputs,
)
from .harness import (
    DEFAULT_LAMBDA_GRID,
    METHOD_NAMES,
    AggregateRecord,
    ExperimentConfig,
    ExperimentReport,
    GlParams,
    Tolerances,
    TrialRecord,
    collinearity_scale,
    emit_report,
    load_config,
    load_report,
    penalty_scale,
    run_experiment,
    tune_lambda,
)
from .linalg import LpProblem, LpSolution, factor_and_solve, ols_regress, solve_lp
from .metrics import (
    IdentificationMetrics,
    ScoreMetrics,
    identification_metrics,
    score_metrics,
)

try:
    from importlib.metadata import PackageNotFoundError, version

    __version__ = version("deaselect")
except Exception:  # pragma: no cover - metadata unavailable outside installs
    __version__ = "0+unknown"

__all__ = [
    "__version__",
    # data
    "DataSet",
    "read_panel_csv",
    "write_panel_csv",
    # scoring
    "EfficiencyResult",
    "ccr_output_scores",
    "bcc_output_scores",
    "additive_scores",
    "efficient_set",
    # group lasso
    "GLProblem",
    "AdmmOptions",
    "AdmmState",
    "SelectionResult",
    "assemble_gl_problem",
    "admm_solve",
    "select_inputs",
    "block_soft_threshold",
    # benchmark selectors
    "EcmParams",
    "RbParams",
    "EcmTest",
    "ecm_gamma",
    "ecm_binomial_test",
    "ecm_backward_select",
    "rb_select",
    # data generation
    "Scenario",
    "TruthInfo",
    "STANDARD_SCENARIO_IDS",
    "standard_scenario",
    "generate_scenario",
    "calibrate_sigma",
    "correlate",
    # metrics
    "ScoreMetrics",
    "IdentificationMetrics",
    "score_metrics",
    "identification_metrics",
    # harness
    "ExperimentConfig",
    "ExperimentReport",
    "TrialRecord",
    "AggregateRecord",
    "GlParams",
    "Tolerances",
    "METHOD_NAMES",
    "DEFAULT_LAMBDA_GRID",
    "run_experiment",
    "emit_report",
    "tune_lambda",
    "penalty_scale",
    "collinearity_scale",
    "load_config",
    "load_report",
    # estimators
    "DeaScorer",
    "GroupLassoSelector",
    "EcmSelector",
    "RbSelector",
    # linear algebra
    "LpProblem",
    "LpSolution",
    "solve_lp",
    "factor_and_solve",
    "ols_regress",
    # errors
    "InputError",
    "RankError",
    "SolverFailure",
    "StallError",
    "NotPositiveDefiniteError",
    "StaleFactorError",
    "TuningError",
    "UndecidableError",
]
