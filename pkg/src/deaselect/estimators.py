"""Estimator-style front end with scikit-learn conventions.

Wraps the panel-oriented core (inputs and outputs as rows, units as
columns) in the samples-as-rows convention: ``X`` is (n_units,
n_inputs), ``y`` is the output levels, one column per output. The
selectors implement the standard selector protocol (``fit``,
``get_support``, ``transform``), so they drop into pipelines and can be
cloned; the scorer exposes per-unit efficiency estimates as fitted
attributes.

DEA scores are panel-relative — every unit is measured against the
frontier spanned by the fitted panel — so there is no out-of-sample
``predict``. ``transform`` on the selectors only drops columns and is
safe for new rows.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.feature_selection import SelectorMixin
from sklearn.utils.validation import check_is_fitted

from .benchmarks import EcmParams, RbParams, ecm_backward_select, rb_select
from .data import DataSet
from .dea import additive_scores, bcc_output_scores, ccr_output_scores, efficient_set
from .exceptions import InputError
from .grouplasso import AdmmOptions, admm_solve, assemble_gl_problem
from .harness import penalty_scale

__all__ = ["DeaScorer", "GroupLassoSelector", "EcmSelector", "RbSelector"]


def _panel_from_xy(X, y) -> DataSet:
    """Samples-as-rows arrays -> panel (inputs/outputs as rows)."""
    X = np.asarray(X, dtype=float)
    if X.ndim != 2:
        raise InputError(f"X must be 2-dimensional (units by inputs), got shape {X.shape}")
    if y is None:
        raise InputError("y (output levels) is required; DEA needs at least one output")
    y = np.asarray(y, dtype=float)
    if y.ndim == 1:
        y = y[:, np.newaxis]
    if y.ndim != 2 or y.shape[0] != X.shape[0]:
        raise InputError(
            f"y must hold one row per unit: X has {X.shape[0]} rows, y has shape {y.shape}"
        )
    return DataSet.from_arrays(X.T, y.T)


class DeaScorer(BaseEstimator):
    """Efficiency scoring of a panel of units.

    Parameters
    ----------
    model : "ccr" (radial, constant returns), "bcc" (radial, variable
        returns), or "additive" (slack-based).
    rts : returns-to-scale for the additive model only ("vrs" keeps the
        convexity row, "crs" drops it); the radial models imply theirs.
    inputs : optional column subset used for scoring; None means all.
    tol : frontier-membership cutoff for ``efficient_``.

    Attributes (after ``fit``)
    ----------
    result_ : the underlying scoring result (scores, statuses).
    scores_ : raw scores; radial expansion factors (>= 1) or additive
        slack totals (>= 0).
    efficiency_ : per-unit efficiency estimates in (0, 1]: reciprocal
        radial scores; None for the additive model, whose slack total
        is not a ratio.
    efficient_ : boolean frontier membership at tolerance ``tol``.
    """

    def __init__(self, model: str = "ccr", rts: str = "vrs", inputs=None, tol: float = 1e-6):
        self.model = model
        self.rts = rts
        self.inputs = inputs
        self.tol = tol

    def fit(self, X, y):
        data = _panel_from_xy(X, y)
        if self.model == "ccr":
            result = ccr_output_scores(data, self.inputs)
        elif self.model == "bcc":
            result = bcc_output_scores(data, self.inputs)
        elif self.model == "additive":
            result = additive_scores(data, self.inputs, rts=self.rts)
        else:
            raise InputError(f"model must be 'ccr', 'bcc', or 'additive', got {self.model!r}")
        self.n_features_in_ = data.m
        self.result_ = result
        self.scores_ = result.scores.copy()
        self.efficiency_ = None if self.model == "additive" else 1.0 / result.scores
        self.efficient_ = efficient_set(result, tol=self.tol)
        return self

    def fit_score(self, X, y) -> np.ndarray:
        """Fit and return the raw scores."""
        return self.fit(X, y).scores_


class _PanelSelector(SelectorMixin, BaseEstimator):
    """Shared fit plumbing for the input selectors."""

    def fit(self, X, y):
        data = _panel_from_xy(X, y)
        result = self._select_inputs(data)
        self.n_features_in_ = data.m
        self.result_ = result
        self.selected_ = tuple(int(i) for i in result.selected)
        support = np.zeros(data.m, dtype=bool)
        support[list(self.selected_)] = True
        self.support_ = support
        self.group_norms_ = np.asarray(result.group_norms, dtype=float)
        return self

    def _get_support_mask(self):
        check_is_fitted(self, "support_")
        return self.support_


class GroupLassoSelector(_PanelSelector):
    """Input selection by the group-penalized envelopment program.

    One group-lasso penalty weight per fit; tune it externally (the
    experiment harness does so with an elbow rule on a training split).
    ``lam`` is dimensionless under the default "collinearity" scaling,
    which adapts it to the panel's size and input correlation; pass
    ``lambda_scaling="absolute"`` to use ``lam`` verbatim.

    Attributes (after ``fit``): ``support_``, ``selected_``,
    ``group_norms_``, ``n_iter_``, ``converged_``, ``lambda_``.
    """

    def __init__(
        self,
        lam: float = 0.45,
        lambda_scaling: str = "collinearity",
        model: str = "additive",
        mu: float = 150.0,
        max_iter: int = 5000,
        primal_tol: float = 5e-3,
        dual_tol: float = 8e-3,
        eps_select: float = 0.05,
    ):
        self.lam = lam
        self.lambda_scaling = lambda_scaling
        self.model = model
        self.mu = mu
        self.max_iter = max_iter
        self.primal_tol = primal_tol
        self.dual_tol = dual_tol
        self.eps_select = eps_select

    def _select_inputs(self, data: DataSet):
        if self.lam < 0:
            raise InputError(f"lam must be nonnegative, got {self.lam}")
        lam_abs = float(self.lam) * penalty_scale(self.lambda_scaling, data)
        problem = assemble_gl_problem(data, self.model, lam=lam_abs)
        options = AdmmOptions(
            mu=self.mu,
            max_iter=self.max_iter,
            primal_tol=self.primal_tol,
            dual_tol=self.dual_tol,
            eps_select=self.eps_select,
        )
        state, selection = admm_solve(problem, options)
        self.n_iter_ = state.iteration
        self.converged_ = state.converged
        self.lambda_ = lam_abs
        return selection


class EcmSelector(_PanelSelector):
    """Backward elimination driven by per-unit score-change ratios and
    an exact binomial contribution test.

    Attributes (after ``fit``): ``support_``, ``selected_``,
    ``group_norms_`` (mean score ratio per candidate at its final
    evaluation), ``n_rounds_``.
    """

    def __init__(
        self,
        p0: float = 0.15,
        gamma_bar: float = 1.10,
        alpha: float = 0.05,
        rts: str = "crs",
    ):
        self.p0 = p0
        self.gamma_bar = gamma_bar
        self.alpha = alpha
        self.rts = rts

    def _select_inputs(self, data: DataSet):
        params = EcmParams(p0=self.p0, gamma_bar=self.gamma_bar, alpha=self.alpha, rts=self.rts)
        result = ecm_backward_select(data, range(data.m), params)
        self.n_rounds_ = result.iterations
        return result


class RbSelector(_PanelSelector):
    """Forward screening: regress seed-input scores on the remaining
    candidates and admit significantly positive ones, repeating until
    a round adds nothing.

    Attributes (after ``fit``): ``support_``, ``selected_``,
    ``group_norms_`` (latest one-sided p-value per selected input),
    ``n_rounds_``.
    """

    def __init__(self, confidence: float = 0.90, seed_input: int = 0, rts: str = "crs"):
        self.confidence = confidence
        self.seed_input = seed_input
        self.rts = rts

    def _select_inputs(self, data: DataSet):
        params = RbParams(confidence=self.confidence, seed_input=self.seed_input, rts=self.rts)
        result = rb_select(data, range(data.m), params)
        self.n_rounds_ = result.iterations
        return result
