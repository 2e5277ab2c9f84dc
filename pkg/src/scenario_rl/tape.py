"""
Return tapes: aligned daily closing prices, simple returns and macro features.

A tape is the logged market record an agent trains on. It is immutable;
every transformation (asset selection, slicing, re-standardization)
returns a new tape. Macro columns are z-scored with parameters fitted on
the training rows only, and those parameters travel with every slice so
that validation and test rows are always scaled by frozen train statistics.
"""

from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass, field, replace
from functools import cached_property
from pathlib import Path

import numpy as np

logger = logging.getLogger(__name__)

MIN_USABLE_ROWS = 30
CATEGORIES = ("MarketProxy", "HighVol", "LowVol", "General")
_MISSING = {"", "na", "nan", "null", "none"}


class TapeError(ValueError):
    """Raised for malformed, inconsistent or insufficient tape data."""


@dataclass(frozen=True, eq=False)
class ReturnTape:
    """Daily close prices for ``N`` assets plus ``M`` macro series.

    ``returns[t]`` is the simple return realized from day ``t`` to day
    ``t + 1``, so a decision taken at the close of day ``t`` is scored by
    ``returns[t]`` and may only look at rows ``<= t``.
    """

    dates: np.ndarray
    prices: np.ndarray
    macro_raw: np.ndarray
    asset_ids: tuple
    macro_ids: tuple
    macro_mean: np.ndarray
    macro_std: np.ndarray
    labels: np.ndarray | None = field(default=None)

    def __post_init__(self):
        T, N = self.prices.shape
        if len(self.dates) != T or self.macro_raw.shape[0] != T:
            raise TapeError("dates, prices and macro must have the same number of rows")
        if len(self.asset_ids) != N:
            raise TapeError("asset_ids does not match the price columns")
        if len(self.macro_ids) != self.macro_raw.shape[1]:
            raise TapeError("macro_ids does not match the macro columns")

    @property
    def n_days(self):
        return self.prices.shape[0]

    @property
    def n_assets(self):
        return self.prices.shape[1]

    @property
    def n_macro(self):
        return self.macro_raw.shape[1]

    @cached_property
    def returns(self):
        p = self.prices
        return (p[1:] - p[:-1]) / p[:-1]

    @cached_property
    def macro(self):
        return (self.macro_raw - self.macro_mean) / self.macro_std

    def validate(self):
        if self.n_days < 2:
            raise TapeError("tape needs at least two rows")
        if not np.all(np.diff(self.dates) > np.timedelta64(0, "D")):
            raise TapeError("dates must be strictly increasing")
        if not np.all(np.isfinite(self.prices)) or not np.all(self.prices > 0):
            raise TapeError("all prices must be finite and strictly positive")
        if not np.all(np.isfinite(self.macro_raw)):
            raise TapeError("macro features must be finite")
        return self

    def slice(self, start, stop):
        labels = None if self.labels is None else self.labels[start:stop]
        return replace(
            self,
            dates=self.dates[start:stop],
            prices=self.prices[start:stop],
            macro_raw=self.macro_raw[start:stop],
            labels=labels,
        )

    def select(self, asset_ids):
        missing = [a for a in asset_ids if a not in self.asset_ids]
        if missing:
            raise TapeError(f"unknown assets: {missing}")
        cols = [self.asset_ids.index(a) for a in asset_ids]
        return replace(self, prices=self.prices[:, cols], asset_ids=tuple(asset_ids))

    def standardized(self, train_stop):
        """Re-fit the macro z-score parameters on rows ``[0, train_stop)``."""
        mean, std = fit_standardizer(self.macro_raw[:train_stop])
        return replace(self, macro_mean=mean, macro_std=std)

    def index_of(self, date):
        """Index of the last trading day on or before ``date`` (-1 if none)."""
        d = np.datetime64(date, "D")
        return int(np.searchsorted(self.dates, d, side="right")) - 1


def fit_standardizer(x):
    mean = x.mean(axis=0)
    std = x.std(axis=0)
    std = np.where(std > 1e-12, std, 1.0)
    return mean, std


@dataclass(frozen=True)
class Universe:
    name: str
    asset_ids: tuple
    category: str = "General"

    def __post_init__(self):
        object.__setattr__(self, "asset_ids", tuple(self.asset_ids))
        if self.category not in CATEGORIES:
            raise TapeError(f"category must be one of {CATEGORIES}, got {self.category!r}")
        if len(self.asset_ids) < 2:
            raise TapeError("a universe needs at least two assets")
        if len(set(self.asset_ids)) != len(self.asset_ids):
            raise TapeError("duplicate asset ids in universe")

    def apply(self, tape):
        if len(self.asset_ids) > tape.n_assets:
            raise TapeError("universe larger than the tape")
        return tape.select(self.asset_ids)


@dataclass(frozen=True)
class SplitSpec:
    train_end: np.datetime64
    valid_end: np.datetime64
    test_end: np.datetime64

    def __post_init__(self):
        for name in ("train_end", "valid_end", "test_end"):
            object.__setattr__(self, name, np.datetime64(getattr(self, name), "D"))
        if not (self.train_end < self.valid_end < self.test_end):
            raise TapeError("split dates must satisfy train_end < valid_end < test_end")

    @classmethod
    def from_fractions(cls, tape, train=0.6, valid=0.8):
        """Split at the given fractions of the tape's rows."""
        T = tape.n_days
        i1 = int(round(train * T)) - 1
        i2 = int(round(valid * T)) - 1
        return cls(tape.dates[i1], tape.dates[i2], tape.dates[-1])


def split_indices(tape, spec):
    """Row ranges ``(train, valid, test)`` as ``range`` objects.

    Boundaries snap to the last trading day on or before each split date.
    """
    if spec.test_end < tape.dates[0]:
        raise TapeError("split lies entirely before the tape start")
    i1 = tape.index_of(spec.train_end)
    i2 = tape.index_of(spec.valid_end)
    i3 = tape.index_of(spec.test_end)
    segments = (range(0, i1 + 1), range(i1 + 1, i2 + 1), range(i2 + 1, i3 + 1))
    for name, seg in zip(("train", "valid", "test"), segments):
        if len(seg) == 0:
            raise TapeError(f"empty {name} segment")
    return segments


def split(tape, spec):
    """Chronological train/valid/test segments as independent tapes.

    Segments share the tape's frozen macro standardization. Agent state
    (weights, memory) is never carried across a boundary; consumers start
    each segment from a fresh state.
    """
    return tuple(tape.slice(seg.start, seg.stop) for seg in split_indices(tape, spec))


def _parse_float(cell):
    if cell.strip().lower() in _MISSING:
        return math.nan
    return float(cell)


def load_tape(path, schema=None, train_end=None, train_fraction=0.6):
    """Load and validate a CSV tape.

    Parameters
    ----------
    path : str or Path
        CSV with a header row, an ISO-8601 date column, one close-price
        column per asset and macro columns (prefixed ``macro_`` unless a
        schema says otherwise).
    schema : dict, optional
        Column map with keys ``date`` (column name), ``assets`` and
        ``macro`` (lists of column names). Missing keys fall back to the
        prefix convention.
    train_end : date-like, optional
        Last training date; macro z-scores are fitted on rows up to it.
        Defaults to the first ``train_fraction`` of usable rows.

    Rows with any missing cell are dropped with a warning.
    """
    path = Path(path)
    schema = dict(schema or {})
    date_col = schema.get("date", "date")
    try:
        with path.open(newline="") as fh:
            reader = csv.reader(fh)
            header = [h.strip() for h in next(reader)]
            rows = [r for r in reader if any(c.strip() for c in r)]
    except (OSError, StopIteration, csv.Error) as exc:
        raise TapeError(f"cannot read tape {path}: {exc}") from exc

    if date_col not in header:
        raise TapeError(f"missing date column {date_col!r}")
    macro_cols = list(schema.get("macro", [h for h in header if h.startswith("macro_")]))
    asset_cols = list(
        schema.get("assets", [h for h in header if h != date_col and h not in macro_cols])
    )
    for col in macro_cols + asset_cols:
        if col not in header:
            raise TapeError(f"missing column {col!r}")
    if not asset_cols:
        raise TapeError("no asset price columns")

    di = header.index(date_col)
    ai = [header.index(c) for c in asset_cols]
    mi = [header.index(c) for c in macro_cols]
    dates, prices, macro = [], [], []
    for lineno, row in enumerate(rows, start=2):
        if len(row) != len(header):
            raise TapeError(f"line {lineno}: expected {len(header)} cells, got {len(row)}")
        try:
            p = [_parse_float(row[i]) for i in ai]
            m = [_parse_float(row[i]) for i in mi]
            d = np.datetime64(row[di].strip(), "D")
        except ValueError as exc:
            raise TapeError(f"line {lineno}: {exc}") from exc
        if any(math.isnan(v) for v in p + m):
            logger.warning("dropping row %d (%s): missing value", lineno, row[di])
            continue
        if any(v <= 0 for v in p):
            raise TapeError(f"line {lineno}: non-positive price")
        dates.append(d)
        prices.append(p)
        macro.append(m)

    if len(dates) < MIN_USABLE_ROWS:
        raise TapeError(f"only {len(dates)} usable rows; need at least {MIN_USABLE_ROWS}")
    dates = np.array(dates, dtype="datetime64[D]")
    prices = np.array(prices, dtype=float)
    macro_raw = np.array(macro, dtype=float).reshape(len(dates), len(macro_cols))
    if train_end is None:
        train_stop = max(2, int(round(train_fraction * len(dates))))
    else:
        train_stop = int(np.searchsorted(dates, np.datetime64(train_end, "D"), side="right"))
    mean, std = fit_standardizer(macro_raw[:train_stop])
    tape = ReturnTape(
        dates=dates,
        prices=prices,
        macro_raw=macro_raw,
        asset_ids=tuple(asset_cols),
        macro_ids=tuple(macro_cols),
        macro_mean=mean,
        macro_std=std,
    )
    return tape.validate()


def write_tape(tape, path):
    """Write a tape in the CSV layout ``load_tape`` reads."""
    path = Path(path)
    macro_cols = [m if m.startswith("macro_") else f"macro_{m}" for m in tape.macro_ids]
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["date", *tape.asset_ids, *macro_cols])
        for t in range(tape.n_days):
            w.writerow(
                [str(tape.dates[t])]
                + [repr(float(v)) for v in tape.prices[t]]
                + [repr(float(v)) for v in tape.macro_raw[t]]
            )
    return path


@dataclass(frozen=True)
class RegimeSpec:
    mean: np.ndarray
    cov: np.ndarray
    duration: float

    def __post_init__(self):
        mean = np.asarray(self.mean, dtype=float)
        cov = np.atleast_2d(np.asarray(self.cov, dtype=float))
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "cov", cov)
        if cov.shape != (mean.size, mean.size):
            raise TapeError("regime covariance shape does not match its mean")
        if not np.allclose(cov, cov.T, atol=1e-12):
            raise TapeError("regime covariance must be symmetric")
        if np.linalg.eigvalsh(cov).min() < -1e-12 * max(1.0, np.abs(cov).max()):
            raise TapeError("regime covariance must be positive semidefinite")
        if self.duration < 1:
            raise TapeError("regime duration must be >= 1 day")


@dataclass(frozen=True)
class SyntheticTapeConfig:
    """Markov regime-switching Gaussian market.

    ``schedule`` entries ``(start, length, regime)`` force the regime on a
    block of days; ``anomalies`` entries ``(start, length)`` inject shock
    blocks that move every macro column by ``anomaly_macro_shift`` and
    every asset return by ``anomaly_return_shift``.
    """

    n_assets: int
    n_days: int
    regimes: tuple
    seed: int = 0
    macro_noise: float = 0.1
    schedule: tuple = ()
    anomalies: tuple = ()
    anomaly_macro_shift: float = 1.0
    anomaly_return_shift: float = -0.02
    start_date: str = "2010-01-04"

    def __post_init__(self):
        regimes = tuple(r if isinstance(r, RegimeSpec) else RegimeSpec(**r) for r in self.regimes)
        object.__setattr__(self, "regimes", regimes)
        if not regimes:
            raise TapeError("at least one regime is required")
        for r in regimes:
            if r.mean.size != self.n_assets:
                raise TapeError("regime mean length must equal n_assets")
        if self.n_days < 2:
            raise TapeError("n_days must be >= 2")


def _regime_path(cfg, rng):
    K = len(cfg.regimes)
    forced = np.full(cfg.n_days, -1)
    for start, length, regime in cfg.schedule:
        forced[start : start + length] = regime
    labels = np.empty(cfg.n_days, dtype=int)
    state = 0
    u = rng.random(cfg.n_days)
    pick = rng.integers(0, max(K - 1, 1), size=cfg.n_days)
    for t in range(cfg.n_days):
        if t > 0 and K > 1 and u[t] < 1.0 / cfg.regimes[state].duration:
            others = [k for k in range(K) if k != state]
            state = others[pick[t] % len(others)]
        if forced[t] >= 0:
            state = int(forced[t])
        labels[t] = state
    return labels


def generate_synthetic_tape(cfg):
    """Simulate a tape from ``cfg``; bit-identical for a fixed seed.

    Macro columns are the one-hot of the active regime plus Gaussian
    noise, so the regime is recoverable from macro data dated <= t.
    """
    rng = np.random.default_rng(cfg.seed)
    T, N, K = cfg.n_days, cfg.n_assets, len(cfg.regimes)
    labels = _regime_path(cfg, rng)
    factors = []
    for r in cfg.regimes:
        lam, vec = np.linalg.eigh(r.cov)
        factors.append(vec * np.sqrt(np.clip(lam, 0.0, None)))
    shocks = rng.standard_normal((T, N))
    rets = np.zeros((T, N))
    for k, r in enumerate(cfg.regimes):
        rows = labels == k
        rets[rows] = r.mean + shocks[rows] @ factors[k].T

    macro = np.eye(K)[labels] + cfg.macro_noise * rng.standard_normal((T, K))
    anomaly = np.zeros(T, dtype=bool)
    for start, length in cfg.anomalies:
        anomaly[start : start + length] = True
    macro[anomaly] += cfg.anomaly_macro_shift
    rets[anomaly] += cfg.anomaly_return_shift
    rets = np.clip(rets, -0.95, None)

    prices = np.empty((T, N))
    prices[0] = 100.0
    for t in range(1, T):
        prices[t] = prices[t - 1] * (1.0 + rets[t])

    dates = np.busday_offset(np.datetime64(cfg.start_date, "D"), np.arange(T), roll="forward")
    mean, std = fit_standardizer(macro[: max(2, int(0.6 * T))])
    return ReturnTape(
        dates=dates.astype("datetime64[D]"),
        prices=prices,
        macro_raw=macro,
        asset_ids=tuple(f"A{i:02d}" for i in range(N)),
        macro_ids=tuple(f"macro_regime{k}" for k in range(K)),
        macro_mean=mean,
        macro_std=std,
        labels=labels,
    )


def anomaly_mask(cfg):
    mask = np.zeros(cfg.n_days, dtype=bool)
    for start, length in cfg.anomalies:
        mask[start : start + length] = True
    return mask
