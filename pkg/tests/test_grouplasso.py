"""Splitting solver: proximal pieces, subproblem oracles, and invariances."""

import numpy as np
import pytest

from deaselect.data import DataSet
from deaselect.exceptions import InputError, StaleFactorError
from deaselect.grouplasso import (
    AdmmOptions,
    admm_solve,
    assemble_gl_problem,
    block_soft_threshold,
    cold_start,
    make_dense_problem,
    residuals,
    s_step,
    select_inputs,
    vbar_step,
    z_step,
)

from conftest import central_diff_gradient, dense_z_objective, random_panel


def small_problem(model="additive", lam=0.3, seed=0, n=5, m=2, s=1):
    rng = np.random.default_rng(seed)
    return assemble_gl_problem(random_panel(rng, n=n, m=m, s=s), model, lam)


def random_state(problem, mu=2.0, seed=1):
    """An arbitrary (not iterate-consistent) state for subproblem tests."""
    rng = np.random.default_rng(seed)
    state = cold_start(problem, mu)
    state.s = rng.uniform(0.0, 1.0, problem.rows_s)
    state.vbar = rng.normal(size=problem.rows_v)
    state.gamma_s = rng.normal(size=problem.rows_s)
    state.gamma_v = rng.normal(size=problem.rows_v)
    if problem.b_e is not None:
        state.gamma_e = rng.normal(size=problem.rows_e)
    return state


# ---------------------------------------------------------------------------
# Proximal pieces


def test_block_soft_threshold_norm_identity():
    rng = np.random.default_rng(100)
    for _ in range(1000):
        dim = int(rng.integers(1, 6))
        a = rng.normal(scale=rng.uniform(0.1, 10.0), size=dim)
        kappa = float(rng.uniform(0.0, 2.0 * np.linalg.norm(a)))
        out = block_soft_threshold(a, kappa)
        expected = max(0.0, np.linalg.norm(a) - kappa)
        assert abs(np.linalg.norm(out) - expected) <= 1e-12
        # direction is preserved when anything survives
        if expected > 0:
            cos = float(out @ a) / (np.linalg.norm(out) * np.linalg.norm(a))
            assert cos == pytest.approx(1.0, abs=1e-12)


def test_block_soft_threshold_edge_cases():
    assert np.array_equal(block_soft_threshold(np.zeros(3), 1.0), np.zeros(3))
    a = np.array([3.0, 4.0])
    assert np.array_equal(block_soft_threshold(a, 0.0), a)
    # kappa exactly at the norm: everything is absorbed
    assert np.array_equal(block_soft_threshold(a, 5.0), np.zeros(2))
    assert np.array_equal(block_soft_threshold(a, 7.0), np.zeros(2))


def test_prox_groups_matches_per_block_application():
    # strided layout (assembled problem)
    prob = small_problem(n=6, m=3)
    rng = np.random.default_rng(2)
    a = rng.normal(size=prob.rows_v)
    kappa = 0.7
    got = prob.prox_groups(a, kappa)
    for g in prob.groups:
        assert got[g] == pytest.approx(block_soft_threshold(a[g], kappa), abs=1e-14)
    # irregular groups (dense problem) exercise the generic path
    groups = [np.array([0, 3]), np.array([1]), np.array([2, 4, 5])]
    dense = make_dense_problem(
        c=np.zeros(6), A_s=np.eye(6), b=np.zeros(6),
        A_v=np.eye(6), groups=groups, lam=1.0,
    )
    a = rng.normal(size=6)
    got = dense.prox_groups(a, kappa)
    for g in groups:
        assert got[g] == pytest.approx(block_soft_threshold(a[g], kappa), abs=1e-14)


def test_prox_groups_out_buffer_matches():
    prob = small_problem(n=4, m=2)
    rng = np.random.default_rng(3)
    a = rng.normal(size=prob.rows_v)
    out = np.empty_like(a)
    res = prob.prox_groups(a, 0.4, out=out)
    assert res is out
    assert np.array_equal(out, prob.prox_groups(a, 0.4))


def test_s_step_is_an_idempotent_orthant_projection():
    prob = small_problem()
    state = random_state(prob)
    s1 = s_step(prob, state)
    assert np.all(s1 >= 0.0)
    # feeding the projection back through changes nothing
    state2 = random_state(prob)
    state2.s = s1.copy()
    state2.gamma_s = state.gamma_s
    state2.z = state.z
    # projection of an already-projected candidate: apply max(0, .) twice
    assert np.array_equal(np.maximum(0.0, s1), s1)


def test_vbar_step_composition():
    prob = small_problem(lam=0.5)
    state = random_state(prob)
    got = vbar_step(prob, state)
    a = prob.apply_Av(state.z) - state.mu * state.gamma_v
    assert got == pytest.approx(prob.prox_groups(a, state.mu * prob.lam), abs=1e-14)


# ---------------------------------------------------------------------------
# z-step subproblem: finite-difference and normal-equations oracles


@pytest.mark.parametrize("model", ["additive", "ccr", "bcc"])
def test_z_step_minimizes_its_subproblem(model):
    prob = small_problem(model=model, n=4, m=2)
    state = random_state(prob, mu=1.7)
    cache = prob.factor_gram(state.mu)
    z_star = z_step(prob, state, cache)
    L = dense_z_objective(prob, state)
    grad = central_diff_gradient(L, z_star, h=1e-6)
    assert np.max(np.abs(grad)) <= 1e-7
    # random perturbations never improve the quadratic
    rng = np.random.default_rng(4)
    for _ in range(5):
        d = rng.normal(size=z_star.size)
        assert L(z_star + 0.01 * d) >= L(z_star) - 1e-12


@pytest.mark.parametrize("model", ["additive", "ccr"])
def test_z_step_solves_dense_normal_equations(model):
    prob = small_problem(model=model, n=4, m=3)
    state = random_state(prob, mu=2.5)
    cache = prob.factor_gram(state.mu)
    z_star = z_step(prob, state, cache)
    As, Av = prob.dense_As(), prob.dense_Av()
    G = As.T @ As + Av.T @ Av
    rhs = (
        As.T @ (state.gamma_s + (state.s - prob.b) / state.mu)
        + Av.T @ (state.gamma_v + state.vbar / state.mu)
        - prob.c
    )
    if prob.b_e is not None:
        Ae = prob.dense_Ae()
        G = G + Ae.T @ Ae
        rhs = rhs + Ae.T @ (state.gamma_e - prob.b_e / state.mu)
    expected = np.linalg.solve(G, state.mu * rhs)
    assert z_star == pytest.approx(expected, rel=1e-8, abs=1e-8)


def test_z_step_rejects_stale_factor():
    prob = small_problem()
    state = random_state(prob, mu=2.0)
    cache = prob.factor_gram(3.0)  # factored for a different mu
    with pytest.raises(StaleFactorError):
        z_step(prob, state, cache)


# ---------------------------------------------------------------------------
# Fused loop equals the composition of the published steps


@pytest.mark.parametrize("model", ["additive", "ccr"])
def test_one_admm_iteration_matches_step_composition(model):
    prob = small_problem(model=model, n=5, m=2, lam=0.2)
    mu = 1.3
    opts = AdmmOptions(mu=mu, max_iter=1, primal_tol=1e-12, dual_tol=1e-12)
    fused, _ = admm_solve(prob, opts)

    state = cold_start(prob, mu)
    cache = prob.factor_gram(mu)
    state.z = z_step(prob, state, cache)
    new_s = s_step(prob, state)
    new_vbar = vbar_step(prob, state)
    As_z = prob.apply_As(state.z)
    Av_z = prob.apply_Av(state.z)
    state.gamma_s = state.gamma_s - (As_z + prob.b - new_s) / mu
    state.gamma_v = state.gamma_v - (Av_z - new_vbar) / mu
    if prob.b_e is not None:
        state.gamma_e = state.gamma_e - (prob.apply_Ae(state.z) + prob.b_e) / mu
    state.s, state.vbar = new_s, new_vbar

    assert fused.iteration == 1
    assert fused.z == pytest.approx(state.z, abs=1e-12)
    assert fused.s == pytest.approx(state.s, abs=1e-12)
    assert fused.vbar == pytest.approx(state.vbar, abs=1e-12)
    assert fused.gamma_s == pytest.approx(state.gamma_s, abs=1e-12)
    assert fused.gamma_v == pytest.approx(state.gamma_v, abs=1e-12)
    if prob.b_e is not None:
        assert fused.gamma_e == pytest.approx(state.gamma_e, abs=1e-12)


def test_residuals_match_manual_formula():
    prob = small_problem(n=4, m=2)
    prev = random_state(prob, seed=5)
    curr = random_state(prob, seed=6)
    curr.z = np.random.default_rng(7).normal(size=prob.n_cols)
    primal, dual = residuals(prob, prev, curr)
    As, Av = prob.dense_As(), prob.dense_Av()
    parts = [As @ curr.z + prob.b - curr.s, Av @ curr.z - curr.vbar]
    expect_primal = np.sqrt(sum(float(p @ p) for p in parts))
    dv = As.T @ (curr.s - prev.s) + Av.T @ (curr.vbar - prev.vbar)
    expect_dual = float(np.linalg.norm(dv)) / curr.mu
    assert primal == pytest.approx(expect_primal, rel=1e-12)
    assert dual == pytest.approx(expect_dual, rel=1e-12)


# ---------------------------------------------------------------------------
# Operator materializations


@pytest.mark.parametrize("model", ["additive", "ccr", "bcc"])
def test_structured_ops_match_dense_transposes(model):
    prob = small_problem(model=model, n=5, m=3)
    rng = np.random.default_rng(8)
    As, Av = prob.dense_As(), prob.dense_Av()
    z = rng.normal(size=prob.n_cols)
    g_s = rng.normal(size=prob.rows_s)
    g_v = rng.normal(size=prob.rows_v)
    assert prob.apply_As(z) == pytest.approx(As @ z, abs=1e-12)
    assert prob.apply_AsT(g_s) == pytest.approx(As.T @ g_s, abs=1e-12)
    assert prob.apply_Av(z) == pytest.approx(Av @ z, abs=1e-12)
    assert prob.apply_AvT(g_v) == pytest.approx(Av.T @ g_v, abs=1e-12)
    if prob.b_e is not None:
        Ae = prob.dense_Ae()
        g_e = rng.normal(size=prob.rows_e)
        assert prob.apply_Ae(z) == pytest.approx(Ae @ z, abs=1e-12)
        assert prob.apply_AeT(g_e) == pytest.approx(Ae.T @ g_e, abs=1e-12)


@pytest.mark.parametrize("model", ["additive", "ccr"])
def test_gram_solve_matches_dense_gram(model):
    prob = small_problem(model=model, n=4, m=2)
    cache = prob.factor_gram(1.0)
    As, Av = prob.dense_As(), prob.dense_Av()
    G = As.T @ As + Av.T @ Av
    if prob.b_e is not None:
        Ae = prob.dense_Ae()
        G = G + Ae.T @ Ae
    rng = np.random.default_rng(9)
    rhs = rng.normal(size=prob.n_cols)
    got = prob.solve_gram(cache, rhs)
    assert got == pytest.approx(np.linalg.solve(G, rhs), rel=1e-9, abs=1e-9)


# ---------------------------------------------------------------------------
# Assembly contracts


def test_assemble_shapes_and_groups():
    rng = np.random.default_rng(10)
    data = random_panel(rng, n=6, m=3, s=1)
    add = assemble_gl_problem(data, "additive", 0.1)
    # columns: v (n*m), u (n*s), w (n); rows: n envelopment per DMU + sign rows
    assert add.n_cols == 6 * 3 + 6 * 1 + 6
    assert add.rows_s == 6 * 6 + 6 * 3 + 6 * 1
    assert add.rows_v == 6 * 3
    assert add.b_e is None and add.shift == 1
    assert len(add.groups) == 3
    for i, g in enumerate(add.groups):
        assert np.array_equal(g, np.arange(6) * 3 + i)

    ccr = assemble_gl_problem(data, "ccr", 0.0)
    assert ccr.n_cols == 6 * 3 + 6 * 1  # no w column block
    assert ccr.rows_e == 6 and ccr.shift == 0

    bcc = assemble_gl_problem(data, "bcc", 0.0)
    assert bcc.n_cols == 6 * 3 + 6 * 1 + 6
    assert bcc.rows_e == 6


def test_assemble_rejects_bad_arguments(tiny_panel):
    with pytest.raises(InputError):
        assemble_gl_problem(tiny_panel, "deluxe", 0.1)
    with pytest.raises(InputError):
        assemble_gl_problem(tiny_panel, "additive", -0.5)
    with pytest.raises(InputError):
        assemble_gl_problem(tiny_panel, "additive", 0.1, shift=2)


def test_admm_options_validation():
    with pytest.raises(InputError):
        AdmmOptions(mu=0.0).validate()
    with pytest.raises(InputError):
        AdmmOptions(max_iter=0).validate()
    with pytest.raises(InputError):
        AdmmOptions(primal_tol=-1.0).validate()
    with pytest.raises(InputError):
        AdmmOptions(eps_select=0.0).validate()
    AdmmOptions().validate()  # defaults are coherent


# ---------------------------------------------------------------------------
# End-to-end behaviour on analytic instances


def test_admm_solves_analytic_dense_instance():
    # minimize x subject to x >= 1 (group penalty off): optimum x = 1
    prob = make_dense_problem(
        c=np.array([1.0]),
        A_s=np.array([[1.0]]),
        b=np.array([-1.0]),
        A_v=np.array([[1.0]]),
        groups=[np.array([0])],
        lam=0.0,
    )
    state, sel = admm_solve(prob, AdmmOptions(mu=1.0, max_iter=2000,
                                              primal_tol=1e-10, dual_tol=1e-10))
    assert state.converged
    assert state.z == pytest.approx(np.array([1.0]), abs=1e-8)
    assert sel.selected == (0,)


def test_lambda_extremes_control_selection():
    rng = np.random.default_rng(11)
    data = random_panel(rng, n=8, m=3, s=1)
    opts = AdmmOptions(mu=150.0, max_iter=5000, primal_tol=5e-3, dual_tol=8e-3,
                       eps_select=0.05)
    # no penalty: every input keeps weight on generic data
    _, sel0 = admm_solve(assemble_gl_problem(data, "additive", 0.0), opts)
    assert sel0.selected == (0, 1, 2)
    # crushing penalty: every group is annihilated
    _, sel_inf = admm_solve(assemble_gl_problem(data, "additive", 1e6), opts)
    assert sel_inf.selected == ()
    assert np.all(sel_inf.group_norms <= 1e-8)


def test_dmu_permutation_invariance():
    rng = np.random.default_rng(12)
    data = random_panel(rng, n=7, m=3, s=1)
    perm = rng.permutation(7)
    permuted = DataSet.from_arrays(data.X[:, perm], data.Y[:, perm])
    opts = AdmmOptions(mu=150.0, max_iter=5000, primal_tol=1e-4, dual_tol=1e-4,
                       eps_select=0.05)
    lam = 0.8
    st_a, sel_a = admm_solve(assemble_gl_problem(data, "additive", lam), opts)
    st_b, sel_b = admm_solve(assemble_gl_problem(permuted, "additive", lam), opts)
    assert st_a.converged and st_b.converged
    assert sel_a.selected == sel_b.selected
    assert st_a.objective == pytest.approx(st_b.objective, rel=1e-3, abs=1e-3)


def test_select_inputs_threshold_is_relative():
    prob = small_problem(n=4, m=2, lam=0.0)
    state = cold_start(prob, 1.0)
    # plant group norms: one dominant group, one tiny group
    state.vbar = np.zeros(prob.rows_v)
    state.vbar[prob.groups[0]] = 10.0
    state.vbar[prob.groups[1]] = 1e-9
    sel = select_inputs(state, prob, eps_sel=1e-6)
    assert sel.selected == (0,)
    assert sel.method == "GL"
    assert sel.lam == prob.lam
    # a generous threshold can empty the selection entirely
    sel_all = select_inputs(state, prob, eps_sel=10.0)
    assert sel_all.selected == ()


def test_selection_metadata_records_solver_evidence():
    prob = small_problem(lam=0.1)
    opts = AdmmOptions(mu=150.0, max_iter=5000, primal_tol=5e-3, dual_tol=8e-3)
    state, sel = admm_solve(prob, opts)
    assert sel.iterations == state.iteration
    assert sel.converged == state.converged
    assert sel.metadata["model"] == "additive"
    assert sel.metadata["primal_residual"] == state.primal_residual
    assert len(state.residual_history) == state.iteration


def test_loss_value_accounts_for_shift():
    rng = np.random.default_rng(13)
    data = random_panel(rng, n=4, m=2, s=1)
    shifted = assemble_gl_problem(data, "additive", 0.0, shift=1)
    plain = assemble_gl_problem(data, "additive", 0.0, shift=0)
    z = np.zeros(shifted.n_cols)
    # at the origin the shifted problem's loss equals the loss of the
    # all-ones multiplier point of the raw problem
    ones = np.concatenate([np.ones(4 * 2 + 4 * 1), np.zeros(4)])
    assert shifted.loss_value(z) == pytest.approx(
        float(plain.c @ ones), abs=1e-12
    )
