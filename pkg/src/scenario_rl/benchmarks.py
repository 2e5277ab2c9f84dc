"""Synthetic market presets used by the experiments and the test suite."""

from __future__ import annotations

import numpy as np

from .tape import RegimeSpec, SyntheticTapeConfig


def _vols(n_assets):
    return np.linspace(0.006, 0.02, n_assets)


def _cov(vol, corr):
    n = len(vol)
    C = corr * np.ones((n, n)) + (1.0 - corr) * np.eye(n)
    return np.outer(vol, vol) * C


def regime_shift_config(seed, n_assets=10, n_days=2500, crash_start=None, crash_length=60,
                        macro_noise=0.1):
    """Calm, choppy and crash regimes with a forced crash block late in the tape.

    In the calm regime expected returns rise with volatility; in the crash
    regime they fall with it, and correlations tighten. The forced block
    (default at 86% of the tape) lands in the last-fifth test segment.
    """
    vol = _vols(n_assets)
    calm = RegimeSpec(mean=0.08 * vol, cov=_cov(vol, 0.3), duration=200)
    choppy = RegimeSpec(mean=np.full(n_assets, 1e-4), cov=_cov(1.4 * vol, 0.4), duration=80)
    crash = RegimeSpec(mean=-0.4 * vol, cov=_cov(2.2 * vol, 0.7), duration=25)
    if crash_start is None:
        crash_start = int(0.86 * n_days)
    schedule = ((crash_start - 40, 40, 0), (crash_start, crash_length, 2),
                (crash_start + crash_length, 20, 1))
    return SyntheticTapeConfig(
        n_assets=n_assets, n_days=n_days, regimes=(calm, choppy, crash), seed=seed,
        macro_noise=macro_noise, schedule=schedule,
    )


def anomaly_config(seed, n_assets=10, n_days=2500, n_blocks=8, block_len=5,
                   return_shift=-0.005):
    """Two equal-covariance regimes with injected shock blocks at random dates.

    The regimes differ only in their mean, so the embedding of ordinary
    days is close to Gaussian and the chi-square shock test is calibrated.
    """
    rng = np.random.default_rng(100 + seed)
    vol = np.linspace(0.008, 0.02, n_assets)
    cov = _cov(vol, 0.3)
    regimes = (
        RegimeSpec(mean=np.full(n_assets, 5e-4), cov=cov, duration=60),
        RegimeSpec(mean=np.full(n_assets, -5e-4), cov=cov, duration=40),
    )
    grid = np.arange(100, n_days - 100, 100)
    starts = np.sort(rng.choice(grid, n_blocks, replace=False))
    anomalies = tuple((int(s) + int(rng.integers(0, 50)), block_len) for s in starts)
    return SyntheticTapeConfig(
        n_assets=n_assets, n_days=n_days, regimes=regimes, seed=seed,
        anomalies=anomalies, anomaly_return_shift=return_shift,
    )


# Training settings shared by every RL variant on the regime-shift benchmark.
# The action only reaches future rewards through the previous weights, so a
# one-step advantage (gae_lambda 0) avoids summing ~20 days of reward noise.
BENCHMARK_AGENT = {"gae_lambda": 0.0, "lr_actor": 1e-3, "iterations": 40}

ABLATION_STRATEGIES = ("PPO-Historical-Replay", "SCR-PPO-NoCF", "SCR-PPO-Full")


def regime_shift_experiment(seeds=(0, 1, 2, 3, 4), strategies=ABLATION_STRATEGIES, out=None):
    """Raw config mapping for the 10-asset, 2500-day regime-shift ablation."""
    raw = {
        "tape": {"synthetic": {"preset": "regime-shift", "n_assets": 10, "n_days": 2500}},
        "split": {"train": 0.6, "valid": 0.8},
        "agent": dict(BENCHMARK_AGENT),
        "strategy": list(strategies),
        "seeds": list(seeds),
    }
    if out is not None:
        raw["out"] = out
    return raw


PRESETS = {"regime-shift": regime_shift_config, "anomaly": anomaly_config}
