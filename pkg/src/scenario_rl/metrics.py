"""Out-of-sample performance metrics and training diagnostics.

Daily returns are annualized with 252 trading days and a zero risk-free
rate. Undefined ratios (zero variance, zero drawdown) are reported as NaN.
"""

from __future__ import annotations

import csv
import math
from dataclasses import asdict, dataclass, fields
from pathlib import Path

import numpy as np

PERIODS = 252
UNDEFINED = math.nan
METRIC_COLUMNS = ("sharpe", "calmar", "ann_vol", "max_dd", "turnover", "gap_final", "resid_auc")


def sharpe(returns, periods=PERIODS):
    r = np.asarray(returns, dtype=float)
    if r.size < 2:
        return UNDEFINED
    sd = r.std(ddof=1)
    if not sd > 1e-15 * max(1.0, np.abs(r).max()):
        return UNDEFINED
    return float(r.mean() / sd * math.sqrt(periods))


def ann_vol(returns, periods=PERIODS):
    r = np.asarray(returns, dtype=float)
    if r.size < 2:
        return UNDEFINED
    return float(r.std(ddof=1) * math.sqrt(periods))


def wealth(returns):
    """Compounded wealth curve starting from 1 (the start is included)."""
    return np.concatenate([[1.0], np.cumprod(1.0 + np.asarray(returns, dtype=float))])


def max_drawdown(returns):
    W = wealth(returns)
    peak = np.maximum.accumulate(W)
    return float(np.max(1.0 - W / peak))


def cagr(returns, periods=PERIODS):
    r = np.asarray(returns, dtype=float)
    final = wealth(r)[-1]
    if final <= 0:
        return -1.0
    return float(final ** (periods / r.size) - 1.0)


def calmar(returns, periods=PERIODS):
    dd = max_drawdown(returns)
    if dd <= 0:
        return UNDEFINED
    return cagr(returns, periods) / dd


def turnover(weights):
    W = np.asarray(weights, dtype=float)
    if len(W) < 2:
        return 0.0
    return float(np.mean(np.abs(np.diff(W, axis=0)).sum(axis=1)))


def cumulative_average(x):
    x = np.asarray(x, dtype=float)
    return np.cumsum(x) / np.arange(1, x.size + 1)


def gap_final(scen_scores, real_returns):
    """``|J_scen - J_real|`` at the last test date.

    Both inputs are per-day portfolio returns over the same dates; the final
    cumulative average is the plain mean.
    """
    s = np.asarray(scen_scores, dtype=float)
    r = np.asarray(real_returns, dtype=float)
    if s.shape != r.shape or s.size == 0:
        raise ValueError("scenario and realized series must be nonempty and aligned")
    return float(abs(cumulative_average(s)[-1] - cumulative_average(r)[-1]))


def resid_auc(residuals):
    """Trapezoid area under a residual curve placed on ``[0, 1]``."""
    y = np.asarray(residuals, dtype=float)
    if y.size == 0:
        return UNDEFINED
    if y.size == 1:
        return float(y[0])
    x = np.linspace(0.0, 1.0, y.size)
    return float(np.sum((y[1:] + y[:-1]) * np.diff(x)) / 2.0)


@dataclass(frozen=True)
class MetricsReport:
    sharpe: float
    calmar: float
    ann_vol: float
    max_dd: float
    turnover: float
    gap_final: float = UNDEFINED
    resid_auc: float = UNDEFINED

    @classmethod
    def from_backtest(cls, net_returns, weights, scen_scores=None, residuals=None):
        return cls(
            sharpe=sharpe(net_returns),
            calmar=calmar(net_returns),
            ann_vol=ann_vol(net_returns),
            max_dd=max_drawdown(net_returns),
            turnover=turnover(weights),
            gap_final=UNDEFINED if scen_scores is None else gap_final(scen_scores, net_returns),
            resid_auc=UNDEFINED if residuals is None else resid_auc(residuals),
        )

    def to_dict(self):
        return asdict(self)


def quartiles(values):
    v = np.asarray([x for x in values if not math.isnan(x)], dtype=float)
    if v.size == 0:
        return UNDEFINED, UNDEFINED, UNDEFINED
    q1, med, q3 = np.quantile(v, [0.25, 0.5, 0.75])
    return float(med), float(q1), float(q3)


def summarize(reports, group_key="method"):
    """Median and quartiles per group and metric.

    ``reports`` is an iterable of ``(group, MetricsReport)`` pairs. Returns
    rows ``{group_key, metric_median, metric_q1, metric_q3, ...}`` in first
    appearance order of the groups. NaN entries are skipped.
    """
    groups = {}
    for name, rep in reports:
        groups.setdefault(name, []).append(rep)
    rows = []
    for name, reps in groups.items():
        row = {group_key: name, "n": len(reps)}
        for f in fields(MetricsReport):
            med, q1, q3 = quartiles([getattr(r, f.name) for r in reps])
            row[f"{f.name}_median"] = med
            row[f"{f.name}_q1"] = q1
            row[f"{f.name}_q3"] = q3
        rows.append(row)
    return rows


def format_cell(x):
    if isinstance(x, float):
        return repr(x)
    return str(x)


def write_rows(path, rows, columns=None):
    """CSV with ``repr`` floats so reruns compare byte for byte."""
    rows = list(rows)
    if columns is None:
        columns = list(rows[0]) if rows else []
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for row in rows:
            w.writerow([format_cell(row.get(c, "")) for c in columns])
    return path


def table_rows(summary, group_key="method"):
    """Table-style rows: ``median [Q1, Q3]`` strings per metric."""
    out = []
    for row in summary:
        cells = {group_key: row[group_key]}
        for m in METRIC_COLUMNS:
            cells[m] = f"{row[m + '_median']:.3f} [{row[m + '_q1']:.3f}, {row[m + '_q3']:.3f}]"
        out.append(cells)
    return out
