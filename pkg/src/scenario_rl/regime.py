"""
Regime embeddings, shock detection and the shock-channel ledger.

Each day is summarized by a low-dimensional embedding of trailing
cross-sectional return statistics and current macro z-scores. Days whose
embedding is a Mahalanobis outlier relative to the training era are shock
days; shock days are clustered online into channels by a running-mean
nearest-centroid rule. Everything is fitted on training rows and frozen.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from scipy.stats import chi2

N_RETURN_STATS = 4


class RegimeError(ValueError):
    pass


def cross_section_stats(returns):
    """Per-day (mean, std, min, max) across assets; shape (rows, 4)."""
    return np.stack(
        [returns.mean(axis=1), returns.std(axis=1), returns.min(axis=1), returns.max(axis=1)],
        axis=1,
    )


def raw_features(tape, window):
    """Unscaled feature rows for every day; rows ``t < window`` are NaN.

    Row ``t`` averages the cross-sectional statistics of the ``window``
    returns realized up to day ``t`` and appends the macro z-scores at ``t``.
    """
    T = tape.n_days
    out = np.full((T, N_RETURN_STATS + tape.n_macro), np.nan)
    stats = cross_section_stats(tape.returns)
    if T - 1 >= window:
        avg = sliding_window_view(stats, window, axis=0).mean(axis=-1)
        # avg[j] covers return rows j .. j+window-1, i.e. it is known at day j+window
        out[window:, :N_RETURN_STATS] = avg[: T - window]
    out[window:, N_RETURN_STATS:] = tape.macro[window:]
    return out


class RegimeEmbedder:
    """Train-fitted PCA embedding of daily market/macro features."""

    def __init__(self, window=20, k=None):
        self.window = int(window)
        self.k = k
        self.scale_mean = None
        self.scale_std = None
        self.basis = None

    def fit(self, tape, fit_stop):
        F = raw_features(tape, self.window)[self.window : fit_stop]
        if len(F) < 2:
            raise RegimeError("not enough training days to fit the embedding")
        self.scale_mean = F.mean(axis=0)
        std = F.std(axis=0)
        self.scale_std = np.where(std > 1e-12, std, 1.0)
        Z = (F - self.scale_mean) / self.scale_std
        _, _, vt = np.linalg.svd(Z, full_matrices=True)
        basis = vt.T
        # deterministic sign: largest-magnitude loading positive
        idx = np.argmax(np.abs(basis), axis=0)
        basis = basis * np.sign(basis[idx, np.arange(basis.shape[1])])
        k = basis.shape[1] if self.k is None else min(int(self.k), basis.shape[1])
        self.k = k
        self.basis = basis[:, :k]
        return self

    def features_all(self, tape):
        return (raw_features(tape, self.window) - self.scale_mean) / self.scale_std

    def features(self, tape, t):
        if t < self.window:
            raise RegimeError(f"day {t} precedes the first full window ({self.window})")
        return self.features_all(tape)[t]

    def embed_all(self, tape):
        return self.features_all(tape) @ self.basis

    def embed_day(self, tape, t):
        return self.features(tape, t) @ self.basis


@dataclass
class ShockStats:
    mean: np.ndarray
    cov: np.ndarray
    cov_inv: np.ndarray

    @classmethod
    def fit(cls, U):
        U = np.asarray(U)
        k = U.shape[1]
        cov = np.atleast_2d(np.cov(U, rowvar=False))
        cov = cov + 1e-6 * np.trace(cov) / k * np.eye(k)
        try:
            inv = np.linalg.inv(cov)
        except np.linalg.LinAlgError as exc:
            raise RegimeError("embedding covariance is singular") from exc
        if not np.all(np.isfinite(inv)):
            raise RegimeError("embedding covariance is singular")
        return cls(mean=U.mean(axis=0), cov=cov, cov_inv=inv)

    def mahalanobis_sq(self, U):
        d = np.asarray(U) - self.mean
        return np.einsum("...i,ij,...j->...", d, self.cov_inv, d)


def shock_threshold(k, q_shock):
    return float(chi2.ppf(q_shock, k))


def detect_shock(U_t, stats, q_shock=0.99):
    """1 when the squared Mahalanobis distance exceeds the chi-square quantile."""
    d2 = stats.mahalanobis_sq(U_t)
    return (np.asarray(d2) > shock_threshold(stats.mean.size, q_shock)).astype(int)


@dataclass
class ShockChannel:
    id: int
    centroid: np.ndarray
    count: int = 0
    hit_dates: list = field(default_factory=list)
    hit_index: list = field(default_factory=list)
    macro_signature: np.ndarray | None = None
    mover_mean: np.ndarray | None = None

    def absorb(self, U, t, date, macro_z, asset_ret):
        n = self.count
        self.centroid = self.centroid + (U - self.centroid) / (n + 1)
        self.macro_signature = self.macro_signature + (macro_z - self.macro_signature) / (n + 1)
        self.mover_mean = self.mover_mean + (asset_ret - self.mover_mean) / (n + 1)
        self.count = n + 1
        self.hit_dates.append(date)
        self.hit_index.append(t)

    def top_movers(self, asset_ids):
        order = np.argsort(-np.abs(self.mover_mean), kind="stable")
        return [(asset_ids[i], float(self.mover_mean[i])) for i in order]


@dataclass
class ShockLedger:
    lambda_sq: float
    asset_ids: tuple = ()
    macro_ids: tuple = ()
    channels: list = field(default_factory=list)
    novelty_log: list = field(default_factory=list)
    eval_hits: list = field(default_factory=list)

    @property
    def n_channels(self):
        return len(self.channels)

    def assign(self, U, t, date, macro_z, asset_ret, evaluating=False):
        """Assign a shock day; returns the channel id (-1 if the ledger is empty).

        Training days join the nearest channel within ``lambda_sq`` or seed a
        new one. Evaluation days never create or move channels: an
        out-of-threshold day is logged as novel and credited to the nearest
        existing channel.
        """
        U = np.asarray(U, dtype=float)
        if self.channels:
            d2 = np.array([np.sum((U - c.centroid) ** 2) for c in self.channels])
            best = int(np.argmin(d2))
            within = d2[best] <= self.lambda_sq
        else:
            best, within = -1, False

        if evaluating:
            if not within:
                self.novelty_log.append(date)
            if best >= 0:
                self.eval_hits.append((best, t, date))
            return best
        if within:
            self.channels[best].absorb(U, t, date, macro_z, asset_ret)
            return best
        ch = ShockChannel(
            id=len(self.channels),
            centroid=np.zeros_like(U),
            macro_signature=np.zeros(len(macro_z)),
            mover_mean=np.zeros(len(asset_ret)),
        )
        ch.absorb(U, t, date, macro_z, asset_ret)
        self.channels.append(ch)
        return ch.id

    def hits_by_channel(self):
        """Day indices of every hit, training and evaluation, per channel."""
        hits = [list(c.hit_index) for c in self.channels]
        for c, t, _ in self.eval_hits:
            hits[c].append(t)
        return [sorted(h) for h in hits]

    def activation_matrix(self, n_days, lookback=10):
        """Row ``t`` flags channels with a hit in ``(t - lookback, t]``."""
        chi = np.zeros((n_days, self.n_channels))
        for c, hits in enumerate(self.hits_by_channel()):
            for t in hits:
                chi[t : min(n_days, t + lookback), c] = 1.0
        return chi

    def to_dict(self):
        return {
            "lambda_sq": self.lambda_sq,
            "asset_ids": list(self.asset_ids),
            "macro_ids": list(self.macro_ids),
            "novelty_log": [str(d) for d in self.novelty_log],
            "eval_hits": [[int(c), int(t), str(d)] for c, t, d in self.eval_hits],
            "channels": [
                {
                    "id": c.id,
                    "count": c.count,
                    "centroid": c.centroid.tolist(),
                    "hit_dates": [str(d) for d in c.hit_dates],
                    "hit_index": [int(t) for t in c.hit_index],
                    "macro_signature": dict(zip(self.macro_ids, c.macro_signature.tolist())),
                    "top_movers": c.top_movers(self.asset_ids),
                    "mover_mean": c.mover_mean.tolist(),
                }
                for c in self.channels
            ],
        }

    @classmethod
    def from_dict(cls, d):
        ledger = cls(
            lambda_sq=float(d["lambda_sq"]),
            asset_ids=tuple(d["asset_ids"]),
            macro_ids=tuple(d["macro_ids"]),
            novelty_log=[np.datetime64(x) for x in d["novelty_log"]],
            eval_hits=[(c, t, np.datetime64(x)) for c, t, x in d["eval_hits"]],
        )
        for c in d["channels"]:
            ledger.channels.append(
                ShockChannel(
                    id=c["id"],
                    centroid=np.array(c["centroid"]),
                    count=c["count"],
                    hit_dates=[np.datetime64(x) for x in c["hit_dates"]],
                    hit_index=list(c["hit_index"]),
                    macro_signature=np.array([c["macro_signature"][m] for m in ledger.macro_ids]),
                    mover_mean=np.array(c["mover_mean"]),
                )
            )
        return ledger

    def save(self, path):
        Path(path).write_text(json.dumps(self.to_dict(), indent=2))

    @classmethod
    def load(cls, path):
        return cls.from_dict(json.loads(Path(path).read_text()))


def activation_vector(ledger, t, lookback=10):
    """Binary channel-activation row for day ``t``."""
    chi = np.zeros(ledger.n_channels)
    for c, hits in enumerate(ledger.hits_by_channel()):
        if any(t - lookback < s <= t for s in hits):
            chi[c] = 1.0
    return chi


def default_lambda_sq(U_shock, U_train):
    """25th percentile of pairwise squared distances among train shock days.

    Falls back to all train embeddings when fewer than two shock days exist.
    """
    X = U_shock if len(U_shock) >= 2 else U_train
    d2 = np.sum((X[:, None, :] - X[None, :, :]) ** 2, axis=-1)
    iu = np.triu_indices(len(X), k=1)
    return float(np.percentile(d2[iu], 25)) if len(iu[0]) else 1.0


@dataclass
class RegimeModel:
    """Frozen regime machinery fitted on ``[0, fit_stop)``."""

    embedder: RegimeEmbedder
    stats: ShockStats
    ledger: ShockLedger
    embeddings: np.ndarray
    shock: np.ndarray
    channel_of_day: np.ndarray
    q_shock: float
    fit_stop: int


def build_regime_model(tape, fit_stop, window=20, k=None, q_shock=0.99, lambda_sq=None):
    """Fit the embedding and shock test on training rows, then sweep all days.

    The ledger is built sequentially in date order; days at or after
    ``fit_stop`` are handled in evaluation mode.
    """
    emb = RegimeEmbedder(window=window, k=k).fit(tape, fit_stop)
    U = emb.embed_all(tape)
    train = U[window:fit_stop]
    stats = ShockStats.fit(train)
    T = tape.n_days
    shock = np.zeros(T, dtype=int)
    valid = np.all(np.isfinite(U), axis=1)
    shock[valid] = detect_shock(U[valid], stats, q_shock)
    if lambda_sq is None:
        train_days = np.arange(window, fit_stop)
        lambda_sq = default_lambda_sq(U[train_days[shock[train_days] == 1]], train)

    ledger = ShockLedger(lambda_sq=lambda_sq, asset_ids=tape.asset_ids, macro_ids=tape.macro_ids)
    channel = np.full(T, -1)
    for t in np.flatnonzero(shock):
        channel[t] = ledger.assign(
            U[t], int(t), tape.dates[t], tape.macro[t], tape.returns[t - 1],
            evaluating=t >= fit_stop,
        )
    return RegimeModel(emb, stats, ledger, U, shock, channel, q_shock, fit_stop)
