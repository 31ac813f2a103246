"""Efficiency scoring against independent LP oracles and exact hand cases."""

import numpy as np
import pytest
import scipy.optimize

from deaselect.data import DataSet
from deaselect.dea import (
    EfficiencyResult,
    additive_scores,
    bcc_output_scores,
    ccr_output_scores,
    efficient_set,
)
from deaselect.exceptions import InputError

from conftest import frontier_panel, random_panel


# ---------------------------------------------------------------------------
# Independent oracle: output-oriented radial scores via scipy's LP solver


def radial_oracle(data, k, convexity):
    """theta_k = max theta s.t. the envelopment constraints hold."""
    n, m, s = data.n, data.m, data.s
    # variables [lam (n), theta]; maximize theta
    c = np.zeros(n + 1)
    c[-1] = -1.0  # linprog minimizes
    A_ub = np.zeros((m + s, n + 1))
    b_ub = np.zeros(m + s)
    A_ub[:m, :n] = data.X  # sum lam x <= x_k
    b_ub[:m] = data.X[:, k]
    A_ub[m:, :n] = -data.Y  # theta y_k - sum lam y <= 0
    A_ub[m:, -1] = data.Y[:, k]
    A_eq = b_eq = None
    if convexity:
        A_eq = np.zeros((1, n + 1))
        A_eq[0, :n] = 1.0
        b_eq = np.array([1.0])
    res = scipy.optimize.linprog(
        c, A_ub=A_ub, b_ub=b_ub, A_eq=A_eq, b_eq=b_eq,
        bounds=[(0, None)] * n + [(None, None)], method="highs",
    )
    assert res.status == 0
    return -res.fun


def additive_oracle(data, k, convexity):
    """Maximal total slack for DMU k via scipy's LP solver."""
    n, m, s = data.n, data.m, data.s
    p = n + m + s
    c = np.concatenate([np.zeros(n), -np.ones(m + s)])  # minimize negative
    A_eq = np.zeros((m + s + (1 if convexity else 0), p))
    A_eq[:m, :n] = data.X
    A_eq[:m, n : n + m] = np.eye(m)
    A_eq[m : m + s, :n] = data.Y
    A_eq[m : m + s, n + m :] = -np.eye(s)
    b_eq = np.concatenate([data.X[:, k], data.Y[:, k]])
    if convexity:
        A_eq[m + s, :n] = 1.0
        b_eq = np.concatenate([b_eq, [1.0]])
    res = scipy.optimize.linprog(
        c, A_eq=A_eq, b_eq=b_eq, bounds=[(0, None)] * p, method="highs"
    )
    assert res.status == 0
    return -res.fun


@pytest.mark.parametrize("seed", [0, 1, 2])
def test_radial_scores_match_oracle(seed):
    rng = np.random.default_rng(seed)
    data = random_panel(rng, n=int(rng.integers(4, 9)), m=2, s=2)
    ccr = ccr_output_scores(data)
    bcc = bcc_output_scores(data)
    assert ccr.ok and bcc.ok
    for k in range(data.n):
        assert ccr.scores[k] == pytest.approx(
            radial_oracle(data, k, convexity=False), abs=1e-7
        )
        assert bcc.scores[k] == pytest.approx(
            radial_oracle(data, k, convexity=True), abs=1e-7
        )


@pytest.mark.parametrize("rts, convexity", [("crs", False), ("vrs", True)])
def test_additive_scores_match_oracle(rts, convexity):
    rng = np.random.default_rng(4)
    data = random_panel(rng, n=6, m=2, s=1)
    result = additive_scores(data, rts=rts)
    assert result.ok
    for k in range(data.n):
        assert result.scores[k] == pytest.approx(
            additive_oracle(data, k, convexity), abs=1e-7
        )


def test_hand_checked_dominance(dominance_panel):
    # DMUs (x, y): (1, 1) and (2, 1). Best CRS ratio is 1, so the dominated
    # unit can double its output within the cone: theta = (y*/x)/(y/x) = 2.
    ccr = ccr_output_scores(dominance_panel)
    assert ccr.scores == pytest.approx(np.array([1.0, 2.0]), abs=1e-9)
    # Under VRS the hull is flat between the two points: no expansion room.
    bcc = bcc_output_scores(dominance_panel)
    assert bcc.scores == pytest.approx(np.array([1.0, 1.0]), abs=1e-9)
    assert list(efficient_set(ccr)) == [True, False]
    assert list(efficient_set(bcc)) == [True, True]


def test_bcc_never_exceeds_ccr_expansion():
    rng = np.random.default_rng(12)
    for _ in range(5):
        data = random_panel(rng, n=10, m=3, s=1)
        ccr = ccr_output_scores(data)
        bcc = bcc_output_scores(data)
        # the VRS hull sits inside the CRS cone, so there is less room
        assert np.all(bcc.scores <= ccr.scores + 1e-8)
        assert np.all(bcc.scores >= 1.0 - 1e-9)


def test_zero_inefficiency_frontier_scores_one():
    rng = np.random.default_rng(13)
    data = frontier_panel(rng, n=20, m=3)
    ccr = ccr_output_scores(data)
    assert ccr.ok
    assert np.all(ccr.scores <= 1.0 + 1e-6)
    assert np.all(ccr.scores >= 1.0 - 1e-9)
    assert efficient_set(ccr).all()
    # the additive model agrees: every slack optimum is zero
    add = additive_scores(data, rts="vrs")
    assert np.all(np.abs(add.scores) <= 1e-6)
    assert efficient_set(add).all()


def test_input_subset_matches_restricted_panel(tiny_panel):
    sub_result = ccr_output_scores(tiny_panel, inputs=(0,))
    standalone = ccr_output_scores(tiny_panel.subset_inputs((0,)))
    assert sub_result.scores == pytest.approx(standalone.scores, abs=1e-10)
    assert sub_result.inputs_used == (0,)


def test_dropping_an_input_never_shrinks_expansion(tiny_panel):
    # fewer inputs -> fewer envelopment rows -> weakly larger theta
    full = ccr_output_scores(tiny_panel)
    restricted = ccr_output_scores(tiny_panel, inputs=(0,))
    assert np.all(restricted.scores >= full.scores - 1e-9)


def test_result_metadata(tiny_panel):
    result = ccr_output_scores(tiny_panel)
    assert isinstance(result, EfficiencyResult)
    assert result.model == "ccr"
    assert result.rts == "crs"
    assert result.orientation == "output"
    assert result.statuses == ("optimal",) * tiny_panel.n
    bcc = bcc_output_scores(tiny_panel)
    assert bcc.model == "bcc" and bcc.rts == "vrs"


def test_additive_rejects_unknown_rts(tiny_panel):
    with pytest.raises(InputError):
        additive_scores(tiny_panel, rts="nirs")


def test_efficient_set_rejects_bad_tol(tiny_panel):
    result = ccr_output_scores(tiny_panel)
    with pytest.raises(InputError):
        efficient_set(result, tol=0.0)


def test_efficient_set_ignores_failed_dmus(tiny_panel):
    result = ccr_output_scores(tiny_panel)
    scores = result.scores.copy()
    scores[1] = np.nan
    patched = EfficiencyResult(
        result.model, result.rts, result.orientation,
        scores, result.statuses, result.inputs_used,
    )
    flags = efficient_set(patched)
    assert not flags[1]
