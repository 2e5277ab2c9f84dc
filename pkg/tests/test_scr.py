import numpy as np
import pytest

from scenario_rl.scr import (
    MacroVAR, SCRParams, ScenarioError, ScenarioLibrary, channel_impulse, regime_context,
    retrieve, ridge_fit, sample_scenarios, scenario_mean, severity,
)


def test_ridge_fit_matches_normal_equations(rng):
    X, Y = rng.normal(size=(50, 3)), rng.normal(size=(50, 2))
    coef, icpt, resid = ridge_fit(X, Y, 0.5)
    Xa = np.hstack([X - X.mean(0), np.ones((50, 1))])
    P = np.diag([0.5, 0.5, 0.5, 0.0])
    B = np.linalg.solve(Xa.T @ Xa + P, Xa.T @ Y)
    np.testing.assert_allclose(coef, B[:3], atol=1e-12)
    np.testing.assert_allclose(resid.mean(axis=0), 0.0, atol=1e-12)


def test_retrieval_returns_k_nearest_past_entries_with_earliest_tiebreak():
    psi = np.array([[0.0], [1.0], [1.0], [3.0], [0.9]])
    lib = ScenarioLibrary(u=np.arange(5), psi=psi, r_tilde=np.arange(10.0).reshape(5, 2))
    d = retrieve(lib, np.array([1.0]), 4, 2)
    np.testing.assert_array_equal(d.index, [1, 2])
    d = retrieve(lib, np.array([1.0]), 5, 3)
    np.testing.assert_array_equal(d.index, [1, 2, 4])
    np.testing.assert_allclose(d.weights, 1 / 3)
    with pytest.raises(ScenarioError):
        retrieve(lib, np.array([1.0]), 0, 2)


def test_scenario_sampling_and_mean(rng):
    lib = ScenarioLibrary(u=np.arange(3), psi=np.zeros((3, 1)), r_tilde=np.eye(3))
    d = retrieve(lib, np.zeros(1), 3, 3)
    s = sample_scenarios(d, 30000, rng)
    np.testing.assert_allclose(scenario_mean(s), d.mean(), atol=0.02)
    with pytest.raises(ScenarioError):
        sample_scenarios(d, 0, rng)


def test_gate_range_and_monotonicity():
    hist = np.linspace(0, 4, 252)
    gs = [regime_context(v, hist).g for v in np.linspace(0, 20, 50)]
    assert all(0.2 <= g <= 1.0 for g in gs)
    assert all(a >= b for a, b in zip(gs, gs[1:]))
    assert regime_context(0.0, hist).g == 1.0
    assert regime_context(1e6, hist).g == 0.2


def test_severity_without_active_channels_is_macro_stress(rng):
    M = rng.normal(size=(300, 3))
    var = MacroVAR().fit(M)
    x = rng.normal(size=3)
    assert channel_impulse(np.zeros(0), np.zeros((0, 3))) == 0.0
    sig = np.zeros((2, 3))
    v0 = severity(np.zeros(2), x, var, sig, horizon=0)
    assert v0 == pytest.approx(var.stress(x))


def test_context_shapes_and_ranges(ctx, tape):
    T = tape.n_days
    assert ctx.psi.shape[0] == T and ctx.chi.shape == (T, ctx.n_channels)
    g = ctx.g[ctx.t0:]
    assert np.all((g >= 0.2) & (g <= 1.0))
    atoms = ctx.atoms(ctx.t0 + 50)
    assert atoms.shape == (ctx.params.k, tape.n_assets)
    assert np.all(ctx.library.u[ctx.neighbors(ctx.t0 + 50)] < ctx.t0 + 50)


def test_params_validation():
    with pytest.raises(ScenarioError):
        SCRParams(q_g=1.0)
    with pytest.raises(ScenarioError):
        SCRParams(k=0)


def test_diagnostics_file(tmp_path, ctx):
    ctx.write_diagnostics(tmp_path / "d.csv", ctx.t0, ctx.t0 + 3)
    lines = (tmp_path / "d.csv").read_text().splitlines()
    assert len(lines) == 4 and lines[0].endswith("v,q,g")


def test_early_days_use_every_available_entry(ctx):
    t = ctx.t0 + 2
    assert len(ctx.atoms(t)) == min(ctx.params.k, int(np.sum(ctx.library.u < t)))
