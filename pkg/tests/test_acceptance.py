"""Acceptance suite: one test per criterion, each printing a single verdict line.

Run with ``pytest tests/test_acceptance.py -v``; the ``slow`` marker covers
the two reinforcement-learning benchmarks (together roughly 15 minutes on
one core).
"""

import csv
import time
from dataclasses import replace

import numpy as np
import pytest

from conftest import FIT_STOP, SMALL_SCR, small_tape
from oracles import central_difference, gae_direct, gmv_closed_form, max_drawdown_pairs, project_grid_2, relative_error
from scenario_rl import experiment as X
from scenario_rl import metrics as M
from scenario_rl import theory
from scenario_rl.agent import (
    Agent, CriticModel, PolicyModel, TrainConfig, actor_loss_and_grads, critic_loss_and_grads,
    evaluate_targets, exogenous_features, gae, make_env, rollout, train, training_days,
)
from scenario_rl.baselines import baseline_rl_configs, gmv
from scenario_rl.benchmarks import anomaly_config, regime_shift_experiment
from scenario_rl.env import ConstraintSet, project_box_simplex
from scenario_rl.nn import MLP
from scenario_rl.regime import build_regime_model
from scenario_rl.scr import ScenarioContext
from scenario_rl.tape import anomaly_mask, generate_synthetic_tape

N_THEORY_SEEDS = 100
N_DETECTION_SEEDS = 20


def verdict(capsys, n, ok, detail):
    with capsys.disabled():
        print(f"\ncriterion {n:>2} {'PASS' if ok else 'FAIL'}: {detail}")
    assert ok, detail


@pytest.fixture(scope="module")
def theory_report():
    return theory.verify_suite(N_THEORY_SEEDS)


def test_criterion_01_lemma_identity(theory_report, capsys):
    lem, secs = theory_report["lemma"], theory_report["timings"]["lemma"]
    ok = lem["max_abs_error"] < 1e-12 and secs < 10.0
    verdict(capsys, 1, ok, f"max |error| {lem['max_abs_error']:.2e} over {N_THEORY_SEEDS} models, {secs:.1f} s")


def test_criterion_02_gap_bias_and_contraction(theory_report, capsys):
    r = theory_report
    secs = r["timings"]["bounds"]
    n_viol = len(r["operator_gap"]["violations"]) + len(r["fixed_point_bias"]["violations"])
    c = r["contraction"]
    have_constants = len(r["constants"]) == N_THEORY_SEEDS and all(
        {"L_V", "L_h", "delta_w", "delta_2", "sigma2_scen"} <= set(row) for row in r["constants"])
    ok = (n_viol == 0 and c["max_step_ratio_minus_delta"] <= 1e-10
          and c["max_pair_ratio_minus_delta"] <= 1e-10 and have_constants and secs < 60.0)
    verdict(capsys, 2, ok,
            f"{n_viol} violations, gap ratio {r['operator_gap']['max_ratio']:.3f}, "
            f"bias ratio {r['fixed_point_bias']['max_ratio']:.3f}, "
            f"contraction excess {max(c['max_step_ratio_minus_delta'], c['max_pair_ratio_minus_delta']):.1e}, "
            f"{secs:.1f} s")


def test_criterion_03_mixing_bound_and_beta_star(theory_report, capsys):
    mix, bs = theory_report["mixing_bound"], theory_report["beta_star"]
    secs = theory_report["timings"]["mixing"]
    ok = mix["ok"] and bs["ok"] and secs < 120.0
    verdict(capsys, 3, ok,
            f"{len(mix['violations'])} bound violations (max ratio {mix['max_ratio']:.3f}), "
            f"{bs['argmin_mismatches']} argmin misses, {secs:.1f} s")


@pytest.fixture(scope="module")
def small_ctx():
    return ScenarioContext(small_tape(), FIT_STOP, SMALL_SCR, seed=0)


def test_criterion_04_beta_endpoints(small_ctx, capsys):
    base = TrainConfig(iterations=3, minibatch=64, seed=7)
    variants = baseline_rl_configs(base)
    days = training_days(small_ctx, 0, FIT_STOP, base)
    nocf = train(small_ctx, days, variants["SCR-PPO-NoCF"])
    full0 = train(small_ctx, days, replace(variants["SCR-PPO-Full"], beta_cf=0.0))
    same_trace = nocf.stats == full0.stats and all(
        np.array_equal(getattr(nocf.trajectory, f), getattr(full0.trajectory, f))
        for f in ("actions", "weights", "rewards", "targets"))
    t0 = nocf.trajectory
    td_target = np.array_equal(t0.targets, t0.rewards + base.delta * t0.v_next)

    cfg1 = replace(variants["SCR-PPO-Full"], beta_cf=1.0)
    env = make_env(small_ctx, cfg=cfg1)
    agent = Agent(env.features.shape[1] + small_ctx.tape.n_assets + 2, small_ctx.tape.n_assets, cfg1)
    batch = evaluate_targets(agent, rollout(agent, small_ctx, env, days, np.random.default_rng(0)))
    expected = batch.rewards + cfg1.delta * agent.critic.value(batch.X_cf)
    err1 = float(np.max(np.abs(batch.targets - expected)))
    ok = same_trace and td_target and err1 <= 1e-15 * max(1.0, float(np.max(np.abs(expected))))
    verdict(capsys, 4, ok,
            f"beta 0 trace identical to NoCF: {same_trace}; NoCF target r + dV(next): {td_target}; "
            f"beta 1 target max |error| {err1:.1e}")


def test_criterion_05_oracle_equivalences(capsys):
    rng = np.random.default_rng(2024)
    errs = {}

    e = 0.0
    for _ in range(50):
        T = int(rng.integers(1, 60))
        r, v, vn = rng.normal(size=(3, T))
        d, lam = rng.uniform(0.5, 0.999), rng.uniform(0.0, 1.0)
        e = max(e, float(np.max(np.abs(gae(r, v, d, lam, next_values=vn) - gae_direct(r, v, vn, d, lam)))))
    errs["gae"] = (e, 1e-10)

    e = 0.0
    for _ in range(50):
        ret = rng.uniform(-0.3, 0.3, int(rng.integers(2, 80)))
        e = max(e, abs(M.max_drawdown(ret) - max_drawdown_pairs(ret)))
    errs["max_dd"] = (e, 1e-12)

    e = 0.0
    loose = ConstraintSet(0.0, 1.0, 2.0)
    for _ in range(20):
        vol = rng.uniform(0.01, 0.015, 6)
        sigma = np.outer(vol, vol) * (0.2 + 0.8 * np.eye(6))
        e = max(e, float(np.max(np.abs(gmv(sigma, loose) - gmv_closed_form(sigma)))))
    errs["gmv"] = (e, 1e-3)

    e = 0.0
    for _ in range(50):
        lo, hi = rng.uniform(0.0, 0.45), rng.uniform(0.55, 1.0)
        a = rng.normal(0.5, 0.6, size=2)
        e = max(e, float(np.max(np.abs(project_box_simplex(a, lo, hi) - project_grid_2(a, lo, hi)))))
    errs["projection"] = (e, 1e-3)

    e = 0.0
    net = MLP((5, 7, 6, 3), rng, out_scale=0.5)
    x, dout = rng.normal(size=(9, 5)), rng.normal(size=(9, 3))
    _, acts = net.forward(x)
    for a, n in zip(net.backward(acts, dout), central_difference(lambda: float(np.sum(net(x) * dout)), net.params)):
        e = max(e, relative_error(a, n))
    critic = CriticModel(4, hidden=6, rng=rng)
    critic.net.params[-2][...] = rng.normal(size=critic.net.params[-2].shape)
    Xc, Yc = rng.normal(size=(11, 4)), rng.normal(size=11)
    _, g = critic_loss_and_grads(critic, Xc, Yc)
    for a, n in zip(g, central_difference(lambda: critic_loss_and_grads(critic, Xc, Yc)[0], critic.params)):
        e = max(e, relative_error(a, n))
    for clip in (0.2, 10.0):
        pol = PolicyModel(4, 3, hidden=6, rng=rng, init_log_std=-1.0)
        pol.net.params[-2][...] = rng.normal(scale=0.3, size=pol.net.params[-2].shape)
        Xa = rng.normal(size=(13, 4))
        A = pol.mean(Xa) + 0.3 * rng.normal(size=(13, 3))
        logp_old = pol.log_prob(Xa, A) + rng.normal(scale=0.1, size=13)
        adv = rng.normal(size=13)
        _, g, _ = actor_loss_and_grads(pol, Xa, A, logp_old, adv, clip, 0.01)
        num = central_difference(lambda: actor_loss_and_grads(pol, Xa, A, logp_old, adv, clip, 0.01)[0], pol.params)
        for a, n in zip(g, num):
            e = max(e, relative_error(a, n))
    errs["gradients (relative)"] = (e, 1e-4)

    ok = all(err < tol for err, tol in errs.values())
    verdict(capsys, 5, ok, "; ".join(f"{k} {err:.1e} < {tol:.0e}" for k, (err, tol) in errs.items()))


def test_criterion_06_leak_probes(small_ctx, capsys):
    tape = small_ctx.tape
    cfg = TrainConfig(iterations=2, minibatch=64, seed=1)
    days = training_days(small_ctx, 0, FIT_STOP, cfg)
    clean_stats = train(small_ctx, days, cfg).stats
    failures = []
    for t in (FIT_STOP, FIT_STOP + 37, FIT_STOP + 120):
        prices, macro = tape.prices.copy(), tape.macro_raw.copy()
        prices[t + 1 :] = 1e9
        macro[t + 1 :] = -1e6
        dirty = ScenarioContext(replace(tape, prices=prices, macro_raw=macro), FIT_STOP, SMALL_SCR, seed=0)
        for name in ("psi", "chi", "g", "v"):
            if not np.array_equal(getattr(small_ctx, name)[: t + 1], getattr(dirty, name)[: t + 1], equal_nan=True):
                failures.append(f"{name}@{t}")
        if not np.array_equal(exogenous_features(small_ctx)[: t + 1], exogenous_features(dirty)[: t + 1],
                              equal_nan=True):
            failures.append(f"features@{t}")
        for s in (t - 3, t):
            if not (np.array_equal(small_ctx.neighbors(s), dirty.neighbors(s))
                    and np.array_equal(small_ctx.atoms(s), dirty.atoms(s))):
                failures.append(f"retrieval@{s}")
        if train(dirty, days, cfg).stats != clean_stats:
            failures.append(f"train stats@{t}")
    verdict(capsys, 6, not failures,
            "psi, chi, g, retrieval and training stats unchanged at 3 probe dates"
            if not failures else f"changed: {failures}")


def test_criterion_07_shock_discovery(capsys):
    recalls, fprs = [], []
    for s in range(N_DETECTION_SEEDS):
        cfg = anomaly_config(s)
        fit_stop = int(0.6 * cfg.n_days)
        tape = generate_synthetic_tape(cfg).standardized(fit_stop)
        model = build_regime_model(tape, fit_stop, q_shock=0.99)
        shock = model.shock.astype(bool)
        valid = np.arange(cfg.n_days) >= model.embedder.window
        mask = anomaly_mask(cfg)
        recalls.append(shock[mask & valid].mean())
        fprs.append(shock[~mask & valid].mean())
    ok = min(recalls) >= 0.8 and max(fprs) <= 0.02
    verdict(capsys, 7, ok,
            f"{N_DETECTION_SEEDS} seeds, worst per-seed day recall {min(recalls):.3f} (>= 0.80), "
            f"worst false-positive rate {max(fprs):.4f} (<= 0.02)")


@pytest.fixture(scope="module")
def benchmark_dir(tmp_path_factory):
    # shared by the ablation and the sweep so identical runs are trained once
    return tmp_path_factory.mktemp("regime_shift")


def _median(index, strategy, metric):
    return M.quartiles([r[metric] for r in index if r["strategy"] == strategy])[0]


@pytest.mark.slow
def test_criterion_08_directional_ablation(benchmark_dir, capsys):
    cfg = X.parse_config(regime_shift_experiment())
    t0 = time.perf_counter()
    index = X.run_experiment(cfg, benchmark_dir)
    X.report(benchmark_dir)
    secs = time.perf_counter() - t0
    full, replay, nocf = "SCR-PPO-Full", "PPO-Historical-Replay", "SCR-PPO-NoCF"
    med = {(s, m): _median(index, s, m) for s in (full, replay, nocf)
           for m in ("sharpe", "max_dd", "gap_final", "resid_auc")}
    checks = {
        "Sharpe Full > Replay": med[full, "sharpe"] > med[replay, "sharpe"],
        "MaxDD Full < Replay": med[full, "max_dd"] < med[replay, "max_dd"],
        "Gap Full < Replay": med[full, "gap_final"] < med[replay, "gap_final"],
        "ResidAUC Full < NoCF": med[full, "resid_auc"] < med[nocf, "resid_auc"],
    }
    detail = ", ".join(f"{k} {'ok' if v else 'no'}" for k, v in checks.items())
    detail += (f" | medians Sharpe {med[full, 'sharpe']:.3f} vs {med[replay, 'sharpe']:.3f}, "
               f"MaxDD {med[full, 'max_dd']:.3f} vs {med[replay, 'max_dd']:.3f}, "
               f"Gap {med[full, 'gap_final']:.5f} vs {med[replay, 'gap_final']:.5f}, "
               f"ResidAUC {med[full, 'resid_auc']:.4f} vs NoCF {med[nocf, 'resid_auc']:.4f}, {secs / 60:.1f} min")
    verdict(capsys, 8, all(checks.values()) and secs < 1800.0, detail)


@pytest.mark.slow
def test_criterion_09_beta_sweep(benchmark_dir, capsys):
    grid = (0.0, 0.25, 0.5, 0.75, 1.0)
    cfg = X.parse_config(regime_shift_experiment(strategies=("SCR-PPO-Full",)))
    rows, best = X.sweep_beta(cfg, benchmark_dir, grid)
    with (benchmark_dir / "beta_sweep_table.csv").open() as fh:
        table = list(csv.DictReader(fh))
    shaped = [r["setting"] for r in table] == [f"beta_cf={b}" for b in grid] and len(rows) == len(grid)
    medians = ", ".join(f"{b}: {r['sharpe_median']:.3f}" for b, r in zip(grid, rows))
    (group, res), = best.items()
    verdict(capsys, 9, shaped and "interior" in res,
            f"table rows {len(table)}, median Sharpe by beta {{{medians}}}, best beta {res['best_beta']} "
            f"({'interior' if res['interior'] else 'endpoint'}) for group {group}")


TINY = """\
strategy = ["SCR-PPO-Full", "PPO-Historical-Replay", "GMV"]
seeds = [0]

[tape.synthetic]
preset = "regime-shift"
n_assets = 4
n_days = 600

[scr]
k = 8
S = 16
L_g = 100
fit_window = 60

[agent]
iterations = 2
minibatch = 128

[allocator]
lookback = 60
"""


def test_criterion_10_determinism(tmp_path, capsys):
    from scenario_rl.cli import main

    cfg_path = tmp_path / "tiny.toml"
    cfg_path.write_text(TINY)
    for name in ("a", "b"):
        assert main(["backtest", "--config", str(cfg_path), "--out", str(tmp_path / name)]) == 0
        assert main(["sweep-beta", "--config", str(cfg_path), "--out", str(tmp_path / name),
                     "--grid", "0,0.5,1"]) == 0
    files = sorted(p.relative_to(tmp_path / "a") for p in (tmp_path / "a").rglob("*.csv"))
    differ = [str(p) for p in files if (tmp_path / "a" / p).read_bytes() != (tmp_path / "b" / p).read_bytes()]
    verdict(capsys, 10, bool(files) and not differ,
            f"{len(files)} CSV files compared byte for byte, {len(differ)} differ")
