import numpy as np
import pytest
from sklearn.covariance import LedoitWolf

from oracles import gmv_closed_form
from scenario_rl.agent import TrainConfig
from scenario_rl.baselines import (
    AllocatorSpec, allocate, baseline_rl_configs, gmv, inverse_vol, ledoit_wolf, markowitz,
    run_allocator,
)
from scenario_rl.env import ConstraintSet

LOOSE = ConstraintSet(0.0, 1.0, 2.0)


def interior_cov(rng, n):
    vol = rng.uniform(0.01, 0.015, n)
    C = 0.2 * np.ones((n, n)) + 0.8 * np.eye(n)
    return np.outer(vol, vol) * C


def test_gmv_matches_closed_form_on_interior_instances(rng):
    for _ in range(20):
        sigma = interior_cov(rng, 6)
        w_star = gmv_closed_form(sigma)
        assert w_star.min() > 0
        np.testing.assert_allclose(gmv(sigma, LOOSE), w_star, atol=1e-3)


def test_markowitz_matches_unconstrained_optimum_when_interior(rng):
    sigma = interior_cov(rng, 4)
    mu = rng.normal(0, 1e-4, 4)
    gamma = 5.0
    # budget-constrained optimum: w = Sigma^-1 (mu - nu 1) / gamma with sum(w) = 1
    inv = np.linalg.inv(sigma)
    ones = np.ones(4)
    nu = (ones @ inv @ mu - gamma) / (ones @ inv @ ones)
    w_star = inv @ (mu - nu * ones) / gamma
    assert w_star.min() > 0
    np.testing.assert_allclose(markowitz(mu, sigma, gamma, LOOSE, 2000), w_star, atol=1e-3)


def test_ledoit_wolf_matches_sklearn(rng):
    X = rng.normal(size=(60, 8)) @ rng.normal(size=(8, 8))
    S, rho = ledoit_wolf(X)
    ref = LedoitWolf().fit(X)
    np.testing.assert_allclose(S, ref.covariance_, rtol=1e-10, atol=1e-12)
    assert rho == pytest.approx(ref.shrinkage_, abs=1e-12)


def test_inverse_vol_and_floor():
    np.testing.assert_allclose(inverse_vol([0.01, 0.02]), [2 / 3, 1 / 3])
    w = inverse_vol([0.0, 0.02])
    assert w[0] > 0.999


def test_allocator_spec_validation():
    with pytest.raises(ValueError):
        AllocatorSpec("Nope")
    with pytest.raises(ValueError):
        AllocatorSpec("GMV_LW", lookback=5).check(10)


def test_equal_weight_backtest_has_zero_turnover_after_day_one(rng):
    R = rng.normal(0, 0.01, (300, 4))
    W, net = run_allocator(AllocatorSpec("EqualWeight", lookback=20), R, np.arange(20, 300))
    assert np.allclose(W, 0.25)
    np.testing.assert_allclose(net, R[20:] @ np.full(4, 0.25))


def test_allocators_respect_constraints(rng):
    R = rng.normal(0, 0.01, (200, 5)) * np.linspace(0.5, 2, 5)
    c = ConstraintSet(0.0, 0.35, 0.3)
    for kind in ("Markowitz", "InverseVol", "GMV_LW"):
        W, _ = run_allocator(AllocatorSpec(kind, lookback=60), R, np.arange(60, 200), c)
        prev = np.full(5, 0.2)
        for w in W:
            assert c.is_feasible(w, prev, tol=1e-9)
            prev = w
        target = allocate(AllocatorSpec(kind, lookback=60), R[:60], c)
        assert c.is_feasible(target, tol=1e-9)


def test_rl_variants_differ_only_where_intended():
    base = TrainConfig(beta_cf=0.3, seed=7)
    v = baseline_rl_configs(base)
    assert v["SCR-PPO-Full"].beta_cf == 0.3
    assert v["SCR-PPO-NoCF"].beta_cf == 0.0
    assert v["PPO-Historical-Replay"].reward_mode == "realized"
    assert v["BootRollout-PPO"].reward_mode == "bootstrap"
    assert not v["SCR-PPO-RewardOnly"].concentration_penalty
    nocf = v["SCR-PPO-NoCF"].to_dict()
    full = v["SCR-PPO-Full"].to_dict()
    assert {k for k in nocf if nocf[k] != full[k]} == {"beta_cf"}
    zero = baseline_rl_configs(TrainConfig(beta_cf=0.0, seed=7))
    assert zero["SCR-PPO-Full"] == zero["SCR-PPO-NoCF"]
