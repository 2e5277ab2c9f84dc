"""
Classical allocators and the reinforcement-learning comparison variants.

Every allocator returns weights inside the same box-constrained simplex
as the learned policy; the backtest then applies the same turnover cap.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .agent import TrainConfig
from .env import ConstraintSet, cost, project, project_box_simplex

ALLOCATORS = ("EqualWeight", "Markowitz", "InverseVol", "GMV_LW")
VOL_FLOOR = 1e-6


@dataclass(frozen=True)
class AllocatorSpec:
    kind: str
    lookback: int = 252
    risk_aversion: float = 5.0
    iterations: int = 500

    def __post_init__(self):
        if self.kind not in ALLOCATORS:
            raise ValueError(f"allocator kind must be one of {ALLOCATORS}")
        if self.lookback < 2 or self.risk_aversion <= 0 or self.iterations < 1:
            raise ValueError("need lookback >= 2, risk_aversion > 0, iterations >= 1")

    def check(self, n_assets):
        if self.kind in ("Markowitz", "GMV_LW") and self.lookback < n_assets + 2:
            raise ValueError(
                f"{self.kind} needs lookback >= N + 2 = {n_assets + 2}, got {self.lookback}"
            )
        return self


def equal_weight(n):
    if n < 1:
        raise ValueError("need at least one asset")
    return np.full(n, 1.0 / n)


def inverse_vol(vols):
    inv = 1.0 / np.maximum(np.asarray(vols, dtype=float), VOL_FLOOR)
    return inv / inv.sum()


def markowitz(mu_hat, sigma_hat, gamma=5.0, constraints=None, iterations=500):
    """Maximize ``mu'w - (gamma / 2) w' Sigma w`` over the box simplex.

    Fixed-step projected gradient ascent from the projected ``1/N`` point,
    step ``1 / (gamma * lambda_max(Sigma))``.
    """
    mu = np.asarray(mu_hat, dtype=float)
    sigma = np.asarray(sigma_hat, dtype=float)
    if not (np.all(np.isfinite(mu)) and np.all(np.isfinite(sigma))):
        raise ValueError("non-finite allocator inputs")
    c = constraints or ConstraintSet()
    n = mu.size
    lam_max = float(np.linalg.eigvalsh(sigma)[-1])
    w = project_box_simplex(np.full(n, 1.0 / n), c.w_lo, c.w_hi)
    if lam_max <= 0:
        # no curvature: the objective is linear, one long step suffices
        return project_box_simplex(w + 1e6 * mu, c.w_lo, c.w_hi)
    step = 1.0 / (gamma * lam_max)
    for _ in range(iterations):
        w = project_box_simplex(w + step * (mu - gamma * sigma @ w), c.w_lo, c.w_hi)
    return w


def gmv(sigma, constraints=None, iterations=500):
    """Minimum-variance weights on the box simplex (same solver, zero mean)."""
    sigma = np.asarray(sigma, dtype=float)
    return markowitz(np.zeros(len(sigma)), sigma, 1.0, constraints, iterations)


def ledoit_wolf(X):
    """Shrinkage of the sample covariance toward ``(tr S / N) I``.

    Returns ``(Sigma_LW, rho)`` with the Ledoit-Wolf optimal intensity
    ``rho = min(b2, d2) / d2``, ``d2 = ||S - mu I||_F^2`` and
    ``b2 = n^-2 sum_k ||x_k x_k' - S||_F^2``.
    """
    X = np.asarray(X, dtype=float)
    n, p = X.shape
    if n < 2:
        raise ValueError("Ledoit-Wolf needs at least two observations")
    Xc = X - X.mean(axis=0)
    S = Xc.T @ Xc / n
    mu = np.trace(S) / p
    if not mu > 0:
        raise ValueError("degenerate return window (zero variance)")
    target = mu * np.eye(p)
    d2 = float(np.sum((S - target) ** 2))
    if d2 == 0.0:
        return S, 0.0
    # ||x x' - S||^2 = ||x||^4 - 2 x'Sx + ||S||^2
    sq = np.sum(Xc * Xc, axis=1)
    quad = np.einsum("ki,ij,kj->k", Xc, S, Xc)
    b2_bar = float(np.sum(sq ** 2 - 2.0 * quad + np.sum(S * S))) / n ** 2
    rho = min(b2_bar, d2) / d2
    return (1.0 - rho) * S + rho * target, rho


def gmv_ledoit_wolf(window, constraints=None, iterations=500):
    sigma, _ = ledoit_wolf(window)
    return gmv(sigma, constraints, iterations)


def allocate(spec, window, constraints=None):
    """Target weights from a trailing return window (rows = days)."""
    window = np.asarray(window, dtype=float)
    n = window.shape[1]
    c = constraints or ConstraintSet()
    if spec.kind == "EqualWeight":
        return project_box_simplex(equal_weight(n), c.w_lo, c.w_hi)
    if spec.kind == "InverseVol":
        return project_box_simplex(inverse_vol(window.std(axis=0, ddof=1)), c.w_lo, c.w_hi)
    if spec.kind == "Markowitz":
        sigma = np.cov(window, rowvar=False)
        return markowitz(window.mean(axis=0), sigma, spec.risk_aversion, c, spec.iterations)
    return gmv_ledoit_wolf(window, c, spec.iterations)


def run_allocator(spec, returns, days, constraints=None, cost_rate=0.0010):
    """Daily rebalancing backtest over ``days`` from a fresh ``1/N`` book.

    Decision at ``t`` reads ``returns[t - lookback : t]`` and is scored by
    ``returns[t]``; trades toward the target are capped by the turnover
    budget. Returns ``(weights, net_returns)``.
    """
    c = (constraints or ConstraintSet()).check(returns.shape[1])
    spec.check(returns.shape[1])
    n = returns.shape[1]
    if days[0] < spec.lookback:
        raise ValueError("first backtest day precedes a full lookback window")
    w_prev = equal_weight(n)
    W = np.empty((len(days), n))
    net = np.empty(len(days))
    for i, t in enumerate(days):
        target = allocate(spec, returns[t - spec.lookback : t], c)
        w = project(target, w_prev, c)
        W[i] = w
        net[i] = float(w @ returns[t]) - cost(w, w_prev, cost_rate)
        w_prev = w
    return W, net


def baseline_rl_configs(base=None):
    """Reinforcement-learning comparison variants as training configs.

    ``Replay`` learns from realized net returns with tape bootstrapping;
    ``BootRollout`` scores each action on whole-day rows resampled from a
    trailing window with the entropic tail penalty; the three SCR variants
    share the scenario reward and differ in regularization and in the
    counterfactual mixing weight.
    """
    base = base or TrainConfig()

    def variant(**kw):
        return TrainConfig.from_dict({**base.to_dict(), **kw})

    return {
        "PPO-Historical-Replay": variant(
            reward_mode="realized", use_gate=False, risk_penalty=False,
            concentration_penalty=False, beta_cf=0.0,
        ),
        "BootRollout-PPO": variant(
            reward_mode="bootstrap", use_gate=False, risk_penalty=True,
            concentration_penalty=False, beta_cf=0.0,
        ),
        "SCR-PPO-RewardOnly": variant(
            reward_mode="scenario", use_gate=True, risk_penalty=True,
            concentration_penalty=False, beta_cf=0.0,
        ),
        "SCR-PPO-NoCF": variant(
            reward_mode="scenario", use_gate=True, risk_penalty=True,
            concentration_penalty=True, beta_cf=0.0,
        ),
        "SCR-PPO-Full": variant(
            reward_mode="scenario", use_gate=True, risk_penalty=True,
            concentration_penalty=True, beta_cf=base.beta_cf,
        ),
    }
