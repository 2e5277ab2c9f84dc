import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import central_difference, gae_direct, relative_error
from scenario_rl.agent import (
    Agent, ConfigError, CriticModel, PolicyModel, TrainConfig, act, actor_loss_and_grads,
    critic_loss_and_grads, evaluate_targets, gae, make_env, mixed_target, rollout,
    systematic_indices, train, training_days,
)
from scenario_rl.nn import MLP, SGD, Adam, clip_by_global_norm, global_norm

FD_TOL = 1e-4


def test_mlp_gradients_match_central_differences(rng):
    net = MLP((5, 7, 6, 3), rng, out_scale=0.5)
    x = rng.normal(size=(9, 5))
    dout = rng.normal(size=(9, 3))

    def f():
        return float(np.sum(net(x) * dout))

    _, acts = net.forward(x)
    analytic = net.backward(acts, dout)
    numeric = central_difference(f, net.params)
    for a, n in zip(analytic, numeric):
        assert relative_error(a, n) < FD_TOL


def test_critic_loss_gradients(rng):
    critic = CriticModel(4, hidden=6, rng=rng)
    critic.net.params[-2][...] = rng.normal(size=critic.net.params[-2].shape)
    X, Y = rng.normal(size=(11, 4)), rng.normal(size=11)
    _, g = critic_loss_and_grads(critic, X, Y)
    num = central_difference(lambda: critic_loss_and_grads(critic, X, Y)[0], critic.params)
    for a, n in zip(g, num):
        assert relative_error(a, n) < FD_TOL


@pytest.mark.parametrize("clip_eps", [0.2, 10.0])
def test_actor_loss_gradients(rng, clip_eps):
    pol = PolicyModel(4, 3, hidden=6, rng=rng, init_log_std=-1.0)
    pol.net.params[-2][...] = rng.normal(scale=0.3, size=pol.net.params[-2].shape)
    X = rng.normal(size=(13, 4))
    A = pol.mean(X) + 0.3 * rng.normal(size=(13, 3))
    # old log-probs from a perturbed policy so ratios differ from one
    logp_old = pol.log_prob(X, A) + rng.normal(scale=0.1, size=13)
    adv = rng.normal(size=13)

    def f():
        return actor_loss_and_grads(pol, X, A, logp_old, adv, clip_eps, 0.01)[0]

    _, g, _ = actor_loss_and_grads(pol, X, A, logp_old, adv, clip_eps, 0.01)
    num = central_difference(f, pol.params)
    for a, n in zip(g, num):
        assert relative_error(a, n) < FD_TOL


def test_log_prob_matches_scipy(rng):
    from scipy.stats import norm

    pol = PolicyModel(3, 2, hidden=4, rng=rng, init_log_std=-1.5)
    x = rng.normal(size=(1, 3))
    a = rng.normal(size=(1, 2))
    mu = pol.mean(x)[0]
    expect = norm.logpdf(a[0], mu, np.exp(-1.5)).sum()
    assert pol.log_prob(x, a)[0] == pytest.approx(expect, rel=1e-12)


def test_policy_initialization():
    pol = PolicyModel(6, 4, rng=np.random.default_rng(0))
    np.testing.assert_allclose(pol.log_std, -3.0)
    mu = pol.mean(np.zeros((1, 6)))[0]
    np.testing.assert_allclose(mu, 0.25)
    pol.log_std[:] = 7.0
    pol.clamp()
    assert np.all(pol.log_std == 1.0)


@given(st.integers(1, 40), st.floats(0.5, 0.999), st.floats(0.0, 1.0), st.integers(0, 10_000))
@settings(max_examples=100, deadline=None)
def test_gae_matches_direct_sum(T, delta, lam, seed):
    rng = np.random.default_rng(seed)
    r, v, vn = rng.normal(size=(3, T))
    np.testing.assert_allclose(gae(r, v, delta, lam, next_values=vn), gae_direct(r, v, vn, delta, lam),
                               atol=1e-10)
    vals = np.append(v, vn[-1])
    np.testing.assert_allclose(gae(r, vals, delta, lam), gae_direct(r, v, vals[1:], delta, lam), atol=1e-10)


def test_gae_lambda_zero_is_td_and_one_is_discounted_return():
    r, v = np.array([1.0, 2.0, 3.0]), np.array([0.5, 0.1, -0.2, 0.0])
    np.testing.assert_allclose(gae(r, v, 0.9, 0.0), r + 0.9 * v[1:] - v[:-1])
    mc = [1 + 0.9 * 2 + 0.81 * 3, 2 + 0.9 * 3, 3.0]
    np.testing.assert_allclose(gae(r, v, 0.9, 1.0), np.array(mc) - v[:-1])
    assert abs(gae(r, v, 0.9, 0.5, normalize=True).mean()) < 1e-12


def test_mixed_target_endpoints(rng):
    r, vn, vc = rng.normal(size=(3, 20))
    np.testing.assert_array_equal(mixed_target(r, vn, vc, 0.99, 0.0), r + 0.99 * vn)
    np.testing.assert_allclose(mixed_target(r, vn, vc, 0.99, 1.0), r + 0.99 * vc, atol=1e-15)
    with pytest.raises(ConfigError):
        mixed_target(r, vn, vc, 0.99, 1.5)


def test_train_config_validation():
    with pytest.raises(ConfigError):
        TrainConfig(beta_cf=1.5)
    with pytest.raises(ConfigError):
        TrainConfig(delta=1.0)
    with pytest.raises(ConfigError):
        TrainConfig.from_dict({"bogus": 1})
    c = TrainConfig(beta_cf=0.25)
    assert TrainConfig.from_dict(c.to_dict()) == c


def test_systematic_indices_cover_atoms_evenly(rng):
    idx = systematic_indices(8, 16, rng)
    assert np.all(np.bincount(idx, minlength=8) == 2)
    idx = systematic_indices(8, 13, rng)
    counts = np.bincount(idx, minlength=8)
    assert counts.sum() == 13 and set(counts) <= {1, 2}


def test_grad_clipping_and_optimizer_bounds(rng):
    g = [rng.normal(size=(3, 3)), rng.normal(size=3)]
    clipped, norm = clip_by_global_norm(g, 0.5)
    assert norm == pytest.approx(global_norm(g))
    assert global_norm(clipped) == pytest.approx(min(0.5, norm))
    p = [np.zeros(4)]
    opt = Adam(p, lr=0.01)
    for _ in range(50):
        before = p[0].copy()
        opt.step([rng.normal(size=4) * 100])
        assert np.max(np.abs(p[0] - before)) <= opt.step_bound() + 1e-12
    q = [np.zeros(4)]
    sgd = SGD(q, lr=0.1)
    gg, _ = clip_by_global_norm([rng.normal(size=4) * 100], 0.5)
    sgd.step(gg)
    assert np.max(np.abs(q[0])) <= sgd.step_bound(0.5) + 1e-12


def test_act_is_reproducible_and_deterministic_mode_returns_mean(rng):
    pol = PolicyModel(3, 2, hidden=4, rng=rng)
    x = rng.normal(size=3)
    a1, l1 = act(pol, x, rng=np.random.default_rng(1))
    a2, l2 = act(pol, x, rng=np.random.default_rng(1))
    assert np.array_equal(a1, a2) and l1 == l2
    a, _ = act(pol, x, deterministic=True)
    np.testing.assert_array_equal(a, pol.mean(x[None])[0])


def test_short_training_run_is_finite_and_reproducible(ctx):
    cfg = TrainConfig(iterations=2, minibatch=64, seed=3)
    days = training_days(ctx, 0, ctx.fit_stop, cfg)
    a = train(ctx, days, cfg)
    b = train(ctx, days, cfg)
    assert a.stats == b.stats
    for row in a.stats:
        assert all(np.isfinite(v) for v in row.values())
    W = a.trajectory.weights
    assert np.allclose(W.sum(axis=1), 1.0) and W.min() >= -1e-12 and W.max() <= 0.35 + 1e-12


def test_checkpoint_round_trip_resumes_identically(ctx):
    cfg = TrainConfig(iterations=1, minibatch=64, seed=4)
    days = training_days(ctx, 0, ctx.fit_stop, cfg)
    res = train(ctx, days, cfg)
    clone = Agent.from_dict(json.loads(json.dumps(res.agent.to_dict())))
    a = train(ctx, days, cfg, agent=res.agent)
    b = train(ctx, days, cfg, agent=clone)
    assert a.stats == b.stats


def test_realized_mode_ignores_beta(ctx):
    cfg = TrainConfig(iterations=1, reward_mode="realized", beta_cf=0.7, seed=1)
    agent = Agent(make_env(ctx, cfg=cfg).features.shape[1] + ctx.tape.n_assets + 2, ctx.tape.n_assets, cfg)
    env = make_env(ctx, cfg=cfg)
    days = training_days(ctx, 0, ctx.fit_stop, cfg)[:50]
    traj = evaluate_targets(agent, rollout(agent, ctx, env, days, np.random.default_rng(0)))
    np.testing.assert_array_equal(traj.targets, traj.rewards + cfg.delta * traj.v_next)
    assert env.params.lambda_rho == 0.0 and env.params.lambda_conc == 0.0
