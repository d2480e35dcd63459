import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from obsmech.errors import ContractError, InfeasibleTargetsError
from obsmech.obsstat import ee2_residual, predict_equilibrium, shannon_entropy, solve_multipliers, \
    solve_multipliers_direct, tvd
from obsmech.obsstat.maxent import _features, gibbs_probs, interior_margin

import oracles as orc


def _moments(sol, eps, q):
    F = _features(eps, q)
    return F.T @ sol.p_est.probs


def test_two_outcome_closed_form():
    # p = (3/4, 1/4) on eps = (-1/2, 1/2) gives beta = log 3
    sol = solve_multipliers([-0.5, 0.5], targets=[-0.25])
    assert abs(sol.beta - math.log(3)) < 1e-10
    assert np.allclose(sol.p_est.probs, [0.75, 0.25], atol=1e-12)
    assert abs(sol.beta - orc.logit_grid_beta([-0.5, 0.5], -0.25)) < 1e-8


def test_degeneracy_weights_uniform_limit():
    sol = solve_multipliers([0.0, 1.0], d=[1, 3], targets=[0.75])
    assert abs(sol.beta) < 1e-10
    assert np.allclose(sol.p_est.probs, [0.25, 0.75])


def test_boundary_target_is_infeasible():
    with pytest.raises(InfeasibleTargetsError):
        solve_multipliers([0.0, 1.0], targets=[1.0])
    with pytest.raises(InfeasibleTargetsError):
        solve_multipliers([0.0, 1.0], targets=[1.5])


def test_bad_inputs():
    with pytest.raises(ContractError):
        solve_multipliers([0.0, 1.0], d=[0, 1], targets=[0.5])
    with pytest.raises(ContractError):
        solve_multipliers([0.0, 1.0], targets=[0.5, 0.1])
    with pytest.raises(ContractError):
        solve_multipliers([0.0, np.nan], targets=[0.5])


def test_minimum_norm_for_collinear_features():
    # q = 2 eps: only beta + 2 mu is identified; minimum norm splits it as (1, 2)/5
    eps = np.array([-1.0, 0.0, 1.0])
    sol = solve_multipliers(eps, [2 * eps], targets=[-0.3, -0.6])
    x = sol.multipliers
    assert abs(x[1] - 2 * x[0]) < 1e-10
    ref = solve_multipliers(eps, targets=[-0.3])
    assert abs(x[0] + 2 * x[1] - ref.beta) < 1e-9


def test_no_charges_zero_mu():
    sol = solve_multipliers([0.0, 1.0, 2.0], targets=[0.8])
    assert sol.mu.shape == (0,)
    assert math.isclose(sol.Z, math.exp(sol.lambda_N))


@pytest.mark.parametrize("seed", range(40))
def test_matches_grid_oracle(seed):
    rng = np.random.default_rng(seed)
    eps, q, d, T = orc.random_instance(rng)
    sol = solve_multipliers(eps, q, d, T)
    ref = orc.maxent_grid(_features(eps, q), d, T)
    assert tvd(sol.p_est, ref) < 1e-5
    assert np.abs(_moments(sol, eps, q) - T).max() <= 1e-8


@pytest.mark.parametrize("seed", range(20))
def test_entropy_is_maximal(seed):
    # any other distribution with the same moments has lower weighted entropy
    rng = np.random.default_rng(1000 + seed)
    eps, q, d, T = orc.random_instance(rng)
    sol = solve_multipliers(eps, q, d, T)
    F = _features(eps, q)
    A = np.vstack([np.ones(len(eps)), F.T])
    N = orc._null_space(A)
    S0 = shannon_entropy(sol.p_est.probs, d)
    for _ in range(20):
        if N.shape[1] == 0:
            break
        p = sol.p_est.probs + N @ rng.normal(size=N.shape[1]) * 1e-3
        if p.min() > 0:
            assert shannon_entropy(p, d) <= S0 + 1e-12


@pytest.mark.parametrize("seed", range(20))
def test_strong_duality(seed):
    rng = np.random.default_rng(2000 + seed)
    eps, q, d, T = orc.random_instance(rng)
    sol = solve_multipliers(eps, q, d, T)
    dual = sol.lambda_N + sol.multipliers @ T
    assert abs(dual - shannon_entropy(sol.p_est.probs, d)) < 1e-9


@pytest.mark.parametrize("seed", range(20))
def test_ee2_self_residual(seed):
    rng = np.random.default_rng(3000 + seed)
    eps, q, d, T = orc.random_instance(rng)
    sol = solve_multipliers(eps, q, d, T)
    p = sol.p_est.probs
    res = ee2_residual(p, d, sol.lambda_N, sol.beta, sol.mu, p * eps, [p * c for c in q])
    assert np.abs(res).max() <= 1e-10


@pytest.mark.parametrize("seed", range(20))
def test_direct_mode_on_gibbs_data(seed):
    rng = np.random.default_rng(4000 + seed)
    eps, q, d, _ = orc.random_instance(rng)
    F = _features(eps, q)
    x = rng.normal(size=F.shape[1])
    p, _ = gibbs_probs(F, d, x)
    direct = solve_multipliers_direct(p, eps, q, d)
    newton = solve_multipliers(eps, q, d, F.T @ p)
    assert tvd(direct.p_est, p) < 1e-10
    assert tvd(direct.p_est, newton.p_est) < 1e-9
    # multipliers are only identified up to the null space of the centred features
    G = F - F.mean(axis=0)
    assert np.allclose(G @ direct.multipliers, G @ newton.multipliers, atol=1e-7)


def test_direct_mode_rejects_zero():
    with pytest.raises(ContractError):
        solve_multipliers_direct([1.0, 0.0], [0.0, 1.0])


def test_interior_margin():
    F = np.array([[0.0], [1.0]])
    assert math.isclose(interior_margin(F, np.array([0.5])), 0.5)
    assert interior_margin(F, np.array([2.0])) == -np.inf


@settings(max_examples=200, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_property_moment_match(seed):
    eps, q, d, T = orc.random_instance(np.random.default_rng(seed))
    sol = solve_multipliers(eps, q, d, T)
    assert np.abs(_moments(sol, eps, q) - T).max() <= 1e-8
    assert sol.p_est.probs.min() > 0
    assert sol.convergence["iterations"] <= 50


@settings(max_examples=50, deadline=None)
@given(st.floats(-3, 3), st.floats(0.1, 3))
def test_property_beta_sign(b, gap):
    # hotter than uniform targets give negative beta, colder give positive
    eps = np.array([0.0, gap])
    p, _ = gibbs_probs(eps[:, None], np.ones(2), np.array([b]))
    sol = solve_multipliers(eps, targets=[p @ eps])
    assert abs(sol.beta - b) < 1e-7


def test_predict_equilibrium_drops_null_outcomes():
    p = np.array([0.6, 0.4, 0.0])
    R = np.array([-0.3, 0.2, 0.0])
    Rq = {a: np.array([0.1, -0.05, 0.0]) for a in "xyz"}
    pred = predict_equilibrium(p, R, Rq, np.array([1, 1, 2]))
    assert pred.dropped == (2,)
    assert pred.p_est[2] == 0
    assert np.isnan(pred.eps[2])
    assert pred.tvd < 1e-9  # two outcomes are fixed by normalization and energy


def test_predict_equilibrium_external_targets():
    p = np.array([0.5, 0.3, 0.2])
    eps = np.array([-1.0, 0.0, 1.0])
    R = p * eps
    Rq = {a: np.zeros(3) for a in "xyz"}
    tg = {"E": -0.2, "q_x": 0.0, "q_y": 0.0, "q_z": 0.0}
    pred = predict_equilibrium(p, R, Rq, np.ones(3), targets=tg)
    assert pred.target_mode == "external"
    assert abs(pred.p_est @ eps + 0.2) < 1e-9
