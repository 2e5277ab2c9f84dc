"""
Portfolio environment: feasibility projection, transaction cost, the
deterministic state update and the scenario-scored risk-aware reward.

The state is ``phi = (z, h)``. ``z`` is exogenous context taken from the
day's market data; ``h`` is the outcome-updated memory (EWMA of portfolio
returns, previous weights, drawdown level) and is the only part of the
state that depends on the return fed to :func:`upd`.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.special import logsumexp

EWMA_DECAY = 0.94


@dataclass(frozen=True)
class ConstraintSet:
    w_lo: float = 0.0
    w_hi: float = 0.35
    tau_max: float = 0.30

    def check(self, n_assets):
        if self.w_lo > self.w_hi:
            raise ValueError("box lower bound exceeds upper bound")
        if not (n_assets * self.w_lo <= 1.0 + 1e-12 <= n_assets * self.w_hi + 2e-12):
            raise ValueError(
                f"box [{self.w_lo}, {self.w_hi}] admits no fully invested portfolio "
                f"over {n_assets} assets"
            )
        if self.tau_max < 0:
            raise ValueError("turnover cap must be nonnegative")
        return self

    def is_feasible(self, w, w_prev=None, tol=1e-9):
        ok = abs(w.sum() - 1.0) <= tol and np.all(w >= self.w_lo - tol) and np.all(w <= self.w_hi + tol)
        if w_prev is not None:
            ok = ok and np.abs(w - w_prev).sum() <= self.tau_max + tol
        return bool(ok)


@dataclass(frozen=True)
class EnvParams:
    cost_rate: float = 0.0010
    lambda_rho: float = 0.5
    eta: float = 10.0
    lambda_conc: float = 0.01
    eps: float = 1e-8
    ewma_decay: float = EWMA_DECAY


def project_box_simplex(a, lo, hi):
    """Euclidean projection of ``a`` onto ``{w : sum(w) = 1, lo <= w <= hi}``.

    The projection is ``clip(a - tau, lo, hi)`` for the threshold ``tau``
    at which the clipped sum equals one. The sum is piecewise linear and
    non-increasing in ``tau``; we locate the bracketing pair of sorted
    breakpoints (all at once for small ``n``, by bisection otherwise) and
    then solve that linear piece exactly.
    """
    a = np.asarray(a, dtype=float)
    n = a.size

    def total(tau):
        return np.clip(a - tau, lo, hi).sum()

    if not n * lo <= 1.0 <= n * hi + 1e-12:
        raise ValueError("box admits no fully invested portfolio")
    bps = np.unique(np.concatenate([a - lo, a - hi]))
    # total() is n*hi at bps[0] and n*lo at bps[-1]
    if len(bps) == 1:
        return np.clip(a - bps[0], lo, hi)
    if n <= 64:
        # small problems: evaluate every breakpoint at once
        sums = np.clip(a[None, :] - bps[:, None], lo, hi).sum(axis=1)
        lo_i = min(max(int(np.sum(sums >= 1.0)) - 1, 0), len(bps) - 2)
        hi_i = lo_i + 1
    else:
        lo_i, hi_i = 0, len(bps) - 1
        while hi_i - lo_i > 1:
            mid = (lo_i + hi_i) // 2
            if total(bps[mid]) >= 1.0:
                lo_i = mid
            else:
                hi_i = mid
    t0, t1 = bps[lo_i], bps[hi_i]
    s0, s1 = total(t0), total(t1)
    tau = t0 if s0 == s1 else t0 + (s0 - 1.0) * (t1 - t0) / (s0 - s1)
    w = np.clip(a - tau, lo, hi)
    free = (w > lo) & (w < hi)
    if free.any():
        # re-solve tau on the active set so the budget holds to rounding
        tau = (a[free].sum() - (1.0 - w[~free].sum())) / free.sum()
        w[free] = np.clip(a[free] - tau, lo, hi)
    return w


def project(a, w_prev, constraints):
    """Map a raw action to executable weights.

    Stage one projects onto the box-constrained simplex; stage two shrinks
    the trade along the segment toward ``w_prev`` until the L1 turnover
    equals the cap. Both stages leave feasible inputs unchanged.
    """
    a = np.asarray(a, dtype=float)
    w_prev = np.asarray(w_prev, dtype=float)
    c = constraints
    if c.is_feasible(a, tol=1e-12):
        w = a.copy()
    else:
        w = project_box_simplex(a, c.w_lo, c.w_hi)
    move = np.abs(w - w_prev).sum()
    if move > c.tau_max + 1e-12:
        theta = c.tau_max / move
        w = w_prev + theta * (w - w_prev)
    return w


def cost(w, w_prev, rate=0.0010):
    return rate * float(np.abs(np.asarray(w) - np.asarray(w_prev)).sum())


@dataclass(frozen=True)
class RewardBreakdown:
    mean_gated_payoff: float
    risk: float
    risk_penalty: float
    regularizer: float
    total: float


def entropic_risk(payoffs, eta):
    """``(1/eta) log mean exp(-eta * u)``; non-increasing in every payoff."""
    u = np.asarray(payoffs, dtype=float)
    return float(logsumexp(-eta * u) - np.log(u.size)) / eta


def reward(samples, g, w, w_prev, params=None):
    """Scenario-scored, risk-penalized reward for weights ``w``.

    Payoffs are the gated scenario portfolio returns ``g * <w, R_s>``; the
    total subtracts the entropic tail penalty (with its ``eta * eps``
    offset) and the trading/concentration regularizer.
    """
    p = params or EnvParams()
    u = g * (np.asarray(samples) @ w)
    mean = float(u.mean())
    risk = entropic_risk(u, p.eta)
    penalty = p.lambda_rho * (risk + p.eta * p.eps)
    reg = cost(w, w_prev, p.cost_rate) + p.lambda_conc * float(w @ w)
    return RewardBreakdown(mean, risk, penalty, reg, mean - penalty - reg)


@dataclass(frozen=True)
class State:
    """``phi = (z, h)`` at decision day ``t``; ``h = (ewma, w_prev, drawdown)``."""

    t: int
    z: np.ndarray
    ewma: float
    w_prev: np.ndarray
    drawdown: float = 0.0

    @property
    def h(self):
        return np.concatenate([[self.ewma], self.w_prev, [self.drawdown]])


def update_memory(ewma, drawdown, w, w_prev, x, params=None):
    """Memory after feeding return vector ``x`` to weights ``w``.

    Returns ``(ewma', drawdown', u)`` with ``u`` the net portfolio return.
    """
    p = params or EnvParams()
    u = float(w @ x) - cost(w, w_prev, p.cost_rate)
    ewma_next = p.ewma_decay * ewma + (1.0 - p.ewma_decay) * u
    dd_next = max(0.0, 1.0 - (1.0 - drawdown) * (1.0 + u))
    return ewma_next, dd_next, u


def memory_lipschitz(w, params=None):
    """Lipschitz constant of ``x -> h'`` in the Euclidean norm.

    ``u`` is ``||w||_2``-Lipschitz in ``x``; the EWMA moves by
    ``(1 - decay) * du`` and the drawdown by at most ``du``.
    """
    p = params or EnvParams()
    return float(np.linalg.norm(w)) * float(np.hypot(1.0 - p.ewma_decay, 1.0))


class PortfolioEnv:
    """Deterministic transition map over a table of exogenous features.

    ``features[t]`` is the exogenous context ``z`` for day ``t``; it is the
    same whatever return vector is fed to :meth:`upd`.
    """

    def __init__(self, features, constraints=None, params=None):
        self.features = np.asarray(features, dtype=float)
        self.constraints = constraints or ConstraintSet()
        self.params = params or EnvParams()

    def initial_state(self, t, n_assets):
        return State(t=t, z=self.features[t], ewma=0.0, w_prev=np.full(n_assets, 1.0 / n_assets))

    def project(self, a, phi):
        return project(a, phi.w_prev, self.constraints)

    def upd(self, phi, w, x):
        ewma, dd, _ = update_memory(phi.ewma, phi.drawdown, w, phi.w_prev, np.asarray(x), self.params)
        return State(t=phi.t + 1, z=self.features[phi.t + 1], ewma=ewma, w_prev=np.array(w, dtype=float), drawdown=dd)

    def counterfactual_state(self, phi, w, r_bar_scen):
        return self.upd(phi, w, r_bar_scen)

    def reward(self, samples, g, w, phi):
        return reward(samples, g, w, phi.w_prev, self.params)


def upd(phi, w, x, z_next=None, params=None):
    """Functional form of the update; ``z_next`` defaults to ``phi.z``."""
    ewma, dd, _ = update_memory(phi.ewma, phi.drawdown, w, phi.w_prev, np.asarray(x), params)
    z = phi.z if z_next is None else z_next
    return State(t=phi.t + 1, z=z, ewma=ewma, w_prev=np.array(w, dtype=float), drawdown=dd)


def counterfactual_state(phi, w, r_bar_scen, z_next=None, params=None):
    return upd(phi, w, r_bar_scen, z_next, params)
