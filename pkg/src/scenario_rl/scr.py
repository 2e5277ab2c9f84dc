"""
Scenario-context rollout: descriptors, scenario library, kNN retrieval,
macro stress severity and the regime-context exposure gate.

All per-day outputs are exogenous (they never depend on the agent's
portfolio), so a :class:`ScenarioContext` precomputes them once per tape.
Retrieval at day ``t`` only ever reads library entries with ``u < t``.
"""

from __future__ import annotations

import csv
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from ._rng import substream
from .regime import build_regime_model


class ScenarioError(ValueError):
    pass


@dataclass(frozen=True)
class SCRParams:
    k: int = 32
    S: int = 64
    lookback: int = 10
    embed_window: int = 20
    embed_k: int | None = None
    q_shock: float = 0.99
    lambda_sq: float | None = None
    vol_window: int = 20
    fit_window: int = 120
    ridge: float = 1e-2
    horizon: int = 5
    L_g: int = 252
    q_g: float = 0.9
    alpha_g: float = 0.5
    g_min: float = 0.2
    eps: float = 1e-8

    def __post_init__(self):
        if self.k < 1 or self.S < 1 or self.horizon < 0 or self.lookback < 1:
            raise ScenarioError("k, S, lookback must be >= 1 and horizon >= 0")
        if not 0.0 < self.q_g < 1.0:
            raise ScenarioError("q_g must lie in (0, 1)")
        if not 0.0 < self.g_min < 1.0 or self.alpha_g <= 0:
            raise ScenarioError("need 0 < g_min < 1 and alpha_g > 0")
        if not 0.0 < self.q_shock <= 1.0:
            raise ScenarioError("q_shock must lie in (0, 1]")
        if self.ridge <= 0:
            raise ScenarioError("ridge penalty must be positive")


def trailing_vol(returns, n_days, window):
    """Per-asset std of the ``window`` returns realized up to each day."""
    out = np.full((n_days, returns.shape[1]), np.nan)
    if len(returns) >= window:
        v = sliding_window_view(returns, window, axis=0).std(axis=-1, ddof=1)
        out[window:] = v[: n_days - window]
    return out


class DescriptorBuilder:
    """Leak-safe descriptor ``[macro z; channel bits; scaled trailing vols]``.

    No portfolio quantity enters the descriptor, so two agents with
    different weight histories always see identical descriptors.
    """

    def __init__(self, vol_window=20):
        self.vol_window = vol_window
        self.vol_mean = None
        self.vol_std = None

    def fit(self, tape, fit_stop):
        vol = trailing_vol(tape.returns, tape.n_days, self.vol_window)[self.vol_window : fit_stop]
        self.vol_mean = vol.mean(axis=0)
        std = vol.std(axis=0)
        self.vol_std = np.where(std > 1e-12, std, 1.0)
        return self

    def build(self, tape, chi):
        vol = trailing_vol(tape.returns, tape.n_days, self.vol_window)
        return np.hstack([tape.macro, chi, (vol - self.vol_mean) / self.vol_std])


@dataclass
class ScenarioLibrary:
    u: np.ndarray
    psi: np.ndarray
    r_tilde: np.ndarray

    def __len__(self):
        return len(self.u)

    def write_csv(self, path, asset_ids):
        with Path(path).open("w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["u"] + [f"psi{j}" for j in range(self.psi.shape[1])]
                       + [f"r_{a}" for a in asset_ids])
            for i in range(len(self.u)):
                w.writerow([int(self.u[i])] + [repr(float(x)) for x in self.psi[i]]
                           + [repr(float(x)) for x in self.r_tilde[i]])


def ridge_fit(X, Y, penalty):
    """Ridge regression with an unpenalized intercept; returns (coef, intercept, resid)."""
    assert penalty > 0, "ridge penalty must be positive for a well-posed design"
    xm = X.mean(axis=0)
    ym = Y.mean(axis=0)
    Xc = X - xm
    Yc = Y - ym
    A = Xc.T @ Xc + penalty * np.eye(X.shape[1])
    coef = np.linalg.solve(A, Xc.T @ Yc)
    intercept = ym - xm @ coef
    return coef, intercept, Yc - Xc @ coef


def build_library(tape, psi, fit_window=120, ridge=1e-2, rng=None, start=None, stop=None):
    """Rolling macro-to-return scenario library.

    Entry ``u`` holds ``psi[u]`` and a one-step-ahead scenario return: the
    ridge prediction from the macro features at ``u`` (fitted on the
    ``fit_window`` preceding days) plus one bootstrapped residual row from
    that same window. Only rows ``<= u`` are read.
    """
    if rng is None:
        rng = np.random.default_rng(0)
    T = tape.n_days
    first = fit_window if start is None else max(start, fit_window)
    stop = T if stop is None else min(stop, T)
    if stop - first < 1:
        raise ScenarioError("tape too short for the library fit window")
    macro, rets = tape.macro, tape.returns
    us, rows = [], []
    for u in range(first, stop):
        X = macro[u - fit_window : u]
        Y = rets[u - fit_window : u]
        coef, intercept, resid = ridge_fit(X, Y, ridge)
        j = rng.integers(fit_window)
        rows.append(intercept + macro[u] @ coef + resid[j])
        us.append(u)
    us = np.array(us)
    return ScenarioLibrary(u=us, psi=psi[us], r_tilde=np.array(rows))


@dataclass
class ScenarioDistribution:
    atoms: np.ndarray
    weights: np.ndarray
    index: np.ndarray

    def mean(self):
        return self.weights @ self.atoms


def neighbor_rows(library, psi_t, t, k):
    cand = np.flatnonzero(library.u < t)
    if len(cand) == 0:
        raise ScenarioError(f"no library entries before day {t}")
    d = np.sqrt(np.sum((library.psi[cand] - psi_t) ** 2, axis=1))
    order = np.lexsort((library.u[cand], d))
    return cand[order[:k]]


def retrieve(library, psi_t, t, k):
    """Uniform mixture over the ``k`` nearest past entries (ties -> earlier u)."""
    rows = neighbor_rows(library, psi_t, t, k)
    n = len(rows)
    return ScenarioDistribution(
        atoms=library.r_tilde[rows], weights=np.full(n, 1.0 / n), index=library.u[rows]
    )


def sample_scenarios(dist, S, rng):
    if S < 1:
        raise ScenarioError("S must be >= 1")
    idx = rng.choice(len(dist.atoms), size=S, p=dist.weights)
    return dist.atoms[idx]


def scenario_mean(samples):
    samples = np.asarray(samples)
    if len(samples) < 1:
        raise ScenarioError("need at least one sample")
    return samples.mean(axis=0)


class MacroVAR:
    """Train-fitted VAR(1) on macro z-scores plus their train moments."""

    def __init__(self, reg=1e-6):
        self.reg = reg

    def fit(self, macro_train):
        X, Y = macro_train[:-1], macro_train[1:]
        M = macro_train.shape[1]
        coef, intercept, _ = ridge_fit(X, Y, 1e-8)
        self.A = coef.T
        self.c = intercept
        self.mean = macro_train.mean(axis=0)
        cov = np.atleast_2d(np.cov(macro_train, rowvar=False))
        cov = cov + self.reg * np.trace(cov) / M * np.eye(M)
        try:
            self.cov_inv = np.linalg.inv(cov)
        except np.linalg.LinAlgError as exc:
            raise ScenarioError("macro covariance singular") from exc
        self.cov = cov
        return self

    def stress(self, x):
        d = x - self.mean
        return np.sqrt(np.maximum(np.einsum("...i,ij,...j->...", d, self.cov_inv, d), 0.0))

    def rollout(self, x0, horizon):
        path = [np.asarray(x0, dtype=float)]
        for _ in range(horizon):
            path.append(self.c + path[-1] @ self.A.T)
        return np.stack(path, axis=-2)


def channel_impulse(chi_t, signatures):
    """Sum of the active channels' macro signatures (zero when none are active)."""
    if len(signatures) == 0:
        return 0.0
    return np.asarray(chi_t) @ np.asarray(signatures)


def severity(chi_t, macro_state, var, signatures, horizon=5):
    """Peak Mahalanobis stress along a deterministic macro rollout.

    The active channels' signatures are added to the macro state as a
    step-0 impulse and the state is propagated by the VAR(1).
    """
    x0 = np.asarray(macro_state, dtype=float) + channel_impulse(chi_t, signatures)
    return float(var.stress(var.rollout(x0, horizon)).max())


@dataclass(frozen=True)
class RegimeContext:
    g: float
    v: float
    q: float


def regime_context(v_t, history, L_g=252, q_g=0.9, alpha_g=0.5, g_min=0.2, eps=1e-8):
    """Quantile-normalized exposure gate in ``[g_min, 1]``."""
    hist = np.asarray(history, dtype=float)[-L_g:] if L_g > 0 else np.array([])
    q = float(np.quantile(hist, q_g)) if len(hist) else eps
    g = float(np.clip(1.0 - alpha_g * v_t / (q + eps), g_min, 1.0))
    return RegimeContext(g=g, v=float(v_t), q=q)


class ScenarioContext:
    """Per-day SCR outputs for one tape, fitted on rows ``[0, fit_stop)``."""

    def __init__(self, tape, fit_stop, params=None, seed=0):
        p = params or SCRParams()
        self.params = p
        self.tape = tape
        self.fit_stop = fit_stop
        T = tape.n_days
        self.regime = build_regime_model(
            tape, fit_stop, window=p.embed_window, k=p.embed_k,
            q_shock=p.q_shock, lambda_sq=p.lambda_sq,
        )
        self.chi = self.regime.ledger.activation_matrix(T, p.lookback)
        self.descriptors = DescriptorBuilder(p.vol_window).fit(tape, fit_stop)
        self.psi = self.descriptors.build(tape, self.chi)
        self.first_entry = max(p.fit_window, p.vol_window, p.embed_window)
        self.t0 = self.first_entry + 1
        if fit_stop <= self.t0 + 1:
            raise ScenarioError("training segment too short for the SCR windows")
        self.library = build_library(
            tape, self.psi, p.fit_window, p.ridge, substream(seed, "library"),
            start=self.first_entry,
        )
        self.var = MacroVAR().fit(tape.macro[:fit_stop])
        self.signatures = np.array(
            [c.macro_signature for c in self.regime.ledger.channels]
        ).reshape(self.regime.ledger.n_channels, tape.n_macro)
        self.v = np.full(T, np.nan)
        self.g = np.ones(T)
        self.q = np.full(T, np.nan)
        for t in range(self.first_entry, T):
            self.v[t] = severity(self.chi[t], tape.macro[t], self.var, self.signatures, p.horizon)
        for t in range(self.first_entry, T):
            ctx = regime_context(
                self.v[t], self.v[max(self.first_entry, t - p.L_g) : t],
                p.L_g, p.q_g, p.alpha_g, p.g_min, p.eps,
            )
            self.g[t], self.q[t] = ctx.g, ctx.q
        self._neighbors = {}

    @property
    def n_channels(self):
        return self.chi.shape[1]

    def neighbors(self, t):
        if t not in self._neighbors:
            self._neighbors[t] = neighbor_rows(self.library, self.psi[t], t, self.params.k)
        return self._neighbors[t]

    def distribution(self, t):
        rows = self.neighbors(t)
        n = len(rows)
        return ScenarioDistribution(
            self.library.r_tilde[rows], np.full(n, 1.0 / n), self.library.u[rows]
        )

    def atoms(self, t):
        return self.library.r_tilde[self.neighbors(t)]

    def context(self, t):
        return RegimeContext(g=float(self.g[t]), v=float(self.v[t]), q=float(self.q[t]))

    def write_diagnostics(self, path, start=None, stop=None):
        """Per-date descriptor, channel bits, severity and gate as CSV."""
        start = self.t0 if start is None else start
        stop = self.tape.n_days if stop is None else stop
        with Path(path).open("w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["date"] + [f"psi{j}" for j in range(self.psi.shape[1])]
                       + [f"chi{c}" for c in range(self.n_channels)] + ["v", "q", "g"])
            for t in range(start, stop):
                w.writerow([str(self.tape.dates[t])]
                           + [repr(float(x)) for x in self.psi[t]]
                           + [int(x) for x in self.chi[t]]
                           + [repr(float(self.v[t])), repr(float(self.q[t])), repr(float(self.g[t]))])

    def params_dict(self):
        return asdict(self.params)
