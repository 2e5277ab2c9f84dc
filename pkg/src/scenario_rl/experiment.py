"""
Run configuration, run directories and the train / backtest / sweep / report
pipeline behind the command-line tool.

A run is identified by the hash of everything that determines its outputs
(data source, universe, split, scenario/env/agent parameters, seed). Runs
live under ``<out>/runs/<hash>``, so a sweep and an ablation that share a
configuration share the run instead of training it twice.
"""

from __future__ import annotations

import csv
import datetime as _dt
import hashlib
import json
import logging
import math
import re
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path

import numpy as np

from . import __version__
from . import metrics as M
from ._rng import substream
from .agent import Agent, ConfigError, TrainConfig, deterministic_rollout, train, training_days
from .baselines import ALLOCATORS, AllocatorSpec, baseline_rl_configs, equal_weight, run_allocator
from .benchmarks import PRESETS
from .env import ConstraintSet, EnvParams
from .scr import SCRParams, ScenarioContext
from .tape import SplitSpec, TapeError, Universe, generate_synthetic_tape, load_tape, split_indices

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

logger = logging.getLogger(__name__)

RL_STRATEGIES = tuple(baseline_rl_configs())
STRATEGY_ALIASES = {"1/N": "EqualWeight", "GMV": "GMV_LW"}
TOP_KEYS = {"tape", "universes", "split", "scr", "env", "agent", "allocator", "strategy",
            "seeds", "seed", "out"}
ENV_KEYS = {"w_lo", "w_hi", "tau_max", "cost_rate", "lambda_rho", "eta", "lambda_conc"}


def _locate(text, key):
    """Best-effort line number of ``key`` in a config file's text."""
    if not text:
        return None
    m = re.search(rf'^\s*"?{re.escape(key)}"?\s*[=:]', text, re.MULTILINE)
    if m is None:
        m = re.search(rf"^\s*\[+[^\]]*\b{re.escape(key)}\b", text, re.MULTILINE)
    return None if m is None else text.count("\n", 0, m.start()) + 1


def _where(text, key):
    line = _locate(text, key)
    return f" (line {line})" if line else ""


def _check_keys(d, allowed, section, text):
    if not isinstance(d, dict):
        raise ConfigError(f"[{section}] must be a table")
    for k in d:
        if k not in allowed:
            raise ConfigError(f"unknown key {k!r} in [{section}]{_where(text, k)}")


def _build(cls, d, section, text):
    names = {f.name for f in fields(cls)}
    _check_keys(d, names, section, text)
    try:
        return cls(**d)
    except (ValueError, TypeError) as exc:
        bad = next((k for k in d if k in str(exc)), None)
        loc = _where(text, bad) if bad else ""
        raise ConfigError(f"[{section}] {exc}{loc}") from exc


@dataclass(frozen=True)
class RunConfig:
    tape: dict
    universes: tuple = ()
    split: dict = field(default_factory=lambda: {"train": 0.6, "valid": 0.8})
    scr: SCRParams = field(default_factory=SCRParams)
    constraints: ConstraintSet = field(default_factory=ConstraintSet)
    env: EnvParams = field(default_factory=EnvParams)
    agent: TrainConfig = field(default_factory=TrainConfig)
    allocator: dict = field(default_factory=dict)
    strategies: tuple = ("SCR-PPO-Full",)
    seeds: tuple = (0,)
    out: str | None = None

    def to_dict(self):
        return {
            "tape": self.tape,
            "universes": [
                {"name": u.name, "assets": list(u.asset_ids), "category": u.category}
                for u in self.universes
            ],
            "split": self.split,
            "scr": asdict(self.scr),
            "env": {**asdict(self.constraints), **{k: v for k, v in asdict(self.env).items() if k in ENV_KEYS}},
            "agent": self.agent.to_dict(),
            "allocator": self.allocator,
            "strategy": list(self.strategies),
            "seeds": list(self.seeds),
            "out": self.out,
        }


def parse_config(raw, text=None):
    """Validate a config mapping; unknown keys and bad ranges raise ConfigError."""
    _check_keys(raw, TOP_KEYS, "top level", text)
    if "tape" not in raw:
        raise ConfigError("missing [tape] section")
    tape = dict(raw["tape"])
    _check_keys(tape, {"path", "schema", "synthetic"}, "tape", text)
    if ("path" in tape) == ("synthetic" in tape):
        raise ConfigError("[tape] needs exactly one of 'path' or 'synthetic'")
    if "synthetic" in tape:
        syn = dict(tape["synthetic"])
        _check_keys(syn, {"preset", "n_assets", "n_days", "crash_start", "crash_length",
                          "macro_noise", "n_blocks", "block_len", "return_shift"}, "tape.synthetic", text)
        if syn.get("preset", "regime-shift") not in PRESETS:
            raise ConfigError(f"unknown synthetic preset {syn.get('preset')!r}{_where(text, 'preset')}")
        syn.setdefault("preset", "regime-shift")
        tape["synthetic"] = syn

    universes = []
    for u in raw.get("universes", []):
        _check_keys(u, {"name", "assets", "category"}, "universes", text)
        try:
            universes.append(Universe(u["name"], tuple(u["assets"]), u.get("category", "General")))
        except (KeyError, TapeError) as exc:
            raise ConfigError(f"[universes] {exc}") from exc

    split = dict(raw.get("split", {"train": 0.6, "valid": 0.8}))
    _check_keys(split, {"train", "valid", "train_end", "valid_end", "test_end"}, "split", text)
    if {"train", "valid"} & set(split) and {"train_end", "valid_end", "test_end"} & set(split):
        raise ConfigError("[split] uses either fractions or dates, not both")
    if "train" in split and not 0.0 < split["train"] < split.get("valid", 0.8) < 1.0:
        raise ConfigError(f"[split] need 0 < train < valid < 1{_where(text, 'train')}")

    scr = _build(SCRParams, dict(raw.get("scr", {})), "scr", text)
    env_raw = dict(raw.get("env", {}))
    _check_keys(env_raw, ENV_KEYS, "env", text)
    constraints = _build(ConstraintSet, {k: env_raw[k] for k in ("w_lo", "w_hi", "tau_max") if k in env_raw},
                         "env", text)
    env = _build(EnvParams, {k: v for k, v in env_raw.items() if k not in ("w_lo", "w_hi", "tau_max")},
                 "env", text)
    for name in ("cost_rate", "lambda_rho", "eta", "lambda_conc"):
        if getattr(env, name) < 0:
            raise ConfigError(f"[env] {name} must be nonnegative{_where(text, name)}")
    if env.eta <= 0:
        raise ConfigError(f"[env] eta must be positive{_where(text, 'eta')}")
    agent = _build(TrainConfig, dict(raw.get("agent", {})), "agent", text)
    allocator = dict(raw.get("allocator", {}))
    _check_keys(allocator, {"lookback", "risk_aversion", "iterations"}, "allocator", text)

    strat = raw.get("strategy", "SCR-PPO-Full")
    strategies = tuple([strat] if isinstance(strat, str) else strat)
    strategies = tuple(STRATEGY_ALIASES.get(s, s) for s in strategies)
    for s in strategies:
        if s not in RL_STRATEGIES and s not in ALLOCATORS:
            raise ConfigError(
                f"unknown strategy {s!r}{_where(text, 'strategy')}; "
                f"choose from {list(RL_STRATEGIES) + list(ALLOCATORS)}"
            )
    if "seeds" in raw and "seed" in raw:
        raise ConfigError("give either 'seed' or 'seeds', not both")
    seeds = raw.get("seeds", [raw.get("seed", 0)])
    if not seeds or not all(isinstance(s, int) and s >= 0 for s in seeds):
        raise ConfigError(f"seeds must be nonnegative integers{_where(text, 'seeds')}")
    return RunConfig(
        tape=tape, universes=tuple(universes), split=split, scr=scr, constraints=constraints,
        env=env, agent=agent, allocator=allocator, strategies=strategies, seeds=tuple(seeds),
        out=raw.get("out"),
    )


def load_config(path):
    """Read a TOML or JSON config file and validate it."""
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    try:
        if path.suffix.lower() == ".json":
            raw = json.loads(text)
        else:
            raw = tomllib.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON at line {exc.lineno}: {exc.msg}") from exc
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: invalid TOML: {exc}") from exc
    return parse_config(raw, text)


def canonical_hash(obj):
    """SHA-256 of a canonical JSON encoding (key order does not matter)."""
    blob = json.dumps(obj, sort_keys=True, separators=(",", ":"), default=str)
    return hashlib.sha256(blob.encode()).hexdigest()


def resolve_tape(cfg, seed):
    """The tape for ``seed`` with macro z-scores fitted on its training rows."""
    src = cfg.tape
    if "synthetic" in src:
        syn = dict(src["synthetic"])
        preset = PRESETS[syn.pop("preset")]
        tape_seed = int(substream(seed, "tape").integers(2**31 - 1))
        tape = generate_synthetic_tape(preset(tape_seed, **syn))
    else:
        tape = load_tape(src["path"], schema=src.get("schema"))
    return tape


def segments(cfg, tape):
    """``(train, valid, test)`` row ranges."""
    s = cfg.split
    if "train_end" in s:
        spec = SplitSpec(s["train_end"], s["valid_end"], s["test_end"])
    else:
        spec = SplitSpec.from_fractions(tape, s.get("train", 0.6), s.get("valid", 0.8))
    return split_indices(tape, spec)


def universes_for(cfg, tape):
    if cfg.universes:
        return cfg.universes
    category = "General"
    name = "Synthetic" if "synthetic" in cfg.tape else "All"
    return (Universe(name, tape.asset_ids, category),)


def strategy_train_config(cfg, strategy, seed):
    base = replace(cfg.agent, seed=seed)
    return baseline_rl_configs(base)[strategy]


def allocator_spec(cfg, strategy):
    return AllocatorSpec(kind=strategy, **cfg.allocator)


@dataclass(frozen=True)
class RunSpec:
    """Everything needed to reproduce one (strategy, universe, seed) run."""

    config: dict
    strategy: str
    universe: dict
    seed: int

    def identity(self):
        c = self.config
        ident = {
            "tape": c["tape"], "split": c["split"], "universe": self.universe["assets"],
            "seed": self.seed, "env": c["env"],
        }
        if self.strategy in ALLOCATORS:
            ident.update(kind=self.strategy, allocator=c["allocator"])
        else:
            # RL runs are keyed by their effective training config, not their label,
            # so a beta sweep and the named ablations share identical runs
            ident.update(scr=c["scr"], agent=self.train_config().to_dict())
        return ident

    def key(self):
        return canonical_hash(self.identity())[:16]

    def run_config(self):
        return parse_config({k: v for k, v in self.config.items() if v is not None})

    def train_config(self):
        cfg = self.run_config()
        return strategy_train_config(cfg, self.strategy, self.seed)


def run_specs(cfg):
    """All (strategy, universe, seed) runs a config describes."""
    specs = []
    d = cfg.to_dict()
    for seed in cfg.seeds:
        tape = resolve_tape(cfg, seed)
        for u in universes_for(cfg, tape):
            ud = {"name": u.name, "assets": list(u.asset_ids), "category": u.category}
            for s in cfg.strategies:
                specs.append(RunSpec(d, s, ud, seed))
    return specs


class RunContext:
    """Tape, segments and (for RL runs) the scenario context of one run."""

    def __init__(self, spec):
        self.spec = spec
        self.cfg = spec.run_config()
        tape = resolve_tape(self.cfg, spec.seed)
        u = Universe(spec.universe["name"], spec.universe["assets"], spec.universe["category"])
        tape = u.apply(tape)
        self.train_seg, self.valid_seg, self.test_seg = segments(self.cfg, tape)
        self.fit_stop = self.train_seg.stop
        self.tape = tape.standardized(self.fit_stop)
        self._ctx = None

    @property
    def scenario(self):
        if self._ctx is None:
            self._ctx = ScenarioContext(self.tape, self.fit_stop, self.cfg.scr, seed=self.spec.seed)
        return self._ctx

    def decision_days(self, segment):
        seg = {"train": self.train_seg, "valid": self.valid_seg, "test": self.test_seg}[segment]
        # the last row has no realized next-day return
        return np.arange(seg.start, min(seg.stop, self.tape.n_days - 1))


def _write_json(path, obj):
    Path(path).write_text(json.dumps(obj, indent=2, sort_keys=True, default=str) + "\n")


def _now():
    return _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds")


def write_manifest(run_dir, spec, started, extra=None):
    run_dir = Path(run_dir)
    files = sorted(p.name for p in run_dir.iterdir() if p.is_file() and p.name != "manifest.json")
    manifest = {
        "config_hash": canonical_hash(spec.identity()),
        "code_version": __version__,
        "strategy": spec.strategy,
        "universe": spec.universe["name"],
        "category": spec.universe["category"],
        "seed": spec.seed,
        "started": started,
        "finished": _now(),
        "files": files,
        **(extra or {}),
    }
    _write_json(run_dir / "manifest.json", manifest)
    return manifest


def _read_manifest(run_dir):
    p = Path(run_dir) / "manifest.json"
    return json.loads(p.read_text()) if p.exists() else None


def train_run(spec, root, trace=False):
    """Train (or, for allocators, just register) one run; reuses a finished run."""
    run_dir = Path(root) / "runs" / spec.key()
    done = _read_manifest(run_dir)
    if done is not None and done["config_hash"] == canonical_hash(spec.identity()):
        logger.info("reusing %s", run_dir)
        return run_dir
    run_dir.mkdir(parents=True, exist_ok=True)
    started = _now()
    _write_json(run_dir / "run.json", {"config": spec.config, "strategy": spec.strategy,
                                       "universe": spec.universe, "seed": spec.seed})
    if spec.strategy in ALLOCATORS:
        write_manifest(run_dir, spec, started)
        return run_dir

    rc = RunContext(spec)
    tcfg = spec.train_config()
    ctx = rc.scenario
    days = training_days(ctx, rc.train_seg.start, rc.train_seg.stop, tcfg)
    result = train(ctx, days, tcfg, rc.cfg.constraints, rc.cfg.env)
    M.write_rows(run_dir / "train_stats.csv", result.stats)
    _write_json(run_dir / "checkpoint.json", {"version": 1, **result.agent.to_dict()})
    ctx.regime.ledger.save(run_dir / "shock_ledger.json")
    if trace:
        write_trace(run_dir / "trace.csv", result.trajectory, rc.tape)
        ctx.write_diagnostics(run_dir / "scr_diagnostics.csv")
    write_manifest(run_dir, spec, started, {"train_days": [int(days[0]), int(days[-1])]})
    return run_dir


def write_trace(path, traj, tape):
    rows = []
    for i, t in enumerate(traj.days):
        rows.append({
            "date": str(tape.dates[t]), "reward": float(traj.rewards[i]),
            "v": float(traj.v[i]), "v_next": float(traj.v_next[i]), "v_cf": float(traj.v_cf[i]),
            "target": float(traj.targets[i]), "advantage": float(traj.advantages[i]),
            "net_return": float(traj.net_returns[i]),
        })
    M.write_rows(path, rows)


def load_run(run_dir):
    info = json.loads((Path(run_dir) / "run.json").read_text())
    return RunSpec(info["config"], info["strategy"], info["universe"], info["seed"])


def backtest_run(run_dir, segment="test"):
    """Deterministic out-of-sample evaluation; writes returns, weights and metrics."""
    run_dir = Path(run_dir)
    if not (run_dir / "run.json").exists():
        raise FileNotFoundError(f"{run_dir} is not a run directory")
    spec = load_run(run_dir)
    rc = RunContext(spec)
    days = rc.decision_days(segment)
    rets = rc.tape.returns
    residuals = None
    scen = None
    if spec.strategy in ALLOCATORS:
        aspec = allocator_spec(rc.cfg, spec.strategy)
        W, net = run_allocator(aspec, rets, days, rc.cfg.constraints, rc.cfg.env.cost_rate)
    else:
        ck = run_dir / "checkpoint.json"
        if not ck.exists():
            raise FileNotFoundError(f"missing checkpoint in {run_dir}")
        agent = Agent.from_dict(json.loads(ck.read_text()))
        traj = deterministic_rollout(agent, rc.scenario, days, rc.cfg.constraints, rc.cfg.env)
        W, net, scen = traj.weights, traj.net_returns, traj.scen_returns
        with (run_dir / "train_stats.csv").open() as fh:
            residuals = [float(r["resid_mean"]) for r in csv.DictReader(fh)]
    report = M.MetricsReport.from_backtest(net, W, scen, residuals)
    wealth = M.wealth(net)
    rows = []
    for i, t in enumerate(days):
        row = {"date": str(rc.tape.dates[t]), "net_return": float(net[i]), "wealth": float(wealth[i + 1])}
        if scen is not None:
            row["scen_score"] = float(scen[i])
        rows.append(row)
    M.write_rows(run_dir / f"returns_{segment}.csv", rows)
    M.write_rows(
        run_dir / f"weights_{segment}.csv",
        [{"date": str(rc.tape.dates[t]), **dict(zip(rc.tape.asset_ids, map(float, W[i])))}
         for i, t in enumerate(days)],
    )
    M.write_rows(run_dir / f"wealth_{segment}.csv",
                 [{"date": str(rc.tape.dates[days[0]]), "wealth": 1.0}]
                 + [{"date": str(rc.tape.dates[t + 1]), "wealth": float(wealth[i + 1])}
                    for i, t in enumerate(days)])
    _write_json(run_dir / f"metrics_{segment}.json", report.to_dict())
    return report


def _train_and_backtest(args):
    spec, root, segment, trace = args
    run_dir = train_run(spec, root, trace)
    report = backtest_run(run_dir, segment)
    return str(run_dir), report.to_dict()


def run_experiment(cfg, out, segment="test", jobs=1, trace=False):
    """Train and backtest every run in ``cfg``; writes ``experiment.csv`` and the report."""
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    specs = run_specs(cfg)
    work = [(s, str(out), segment, trace) for s in specs]
    results = _map(_train_and_backtest, work, jobs)
    index = []
    for spec, (run_dir, rep) in zip(specs, results):
        index.append({"strategy": spec.strategy, "universe": spec.universe["name"],
                      "category": spec.universe["category"], "seed": spec.seed,
                      "run": str(Path(run_dir).relative_to(out)), **rep})
    M.write_rows(out / "experiment.csv", index)
    return index


def _map(fn, items, jobs):
    if jobs <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(fn, items))


def sweep_beta(cfg, out, grid=(0.0, 0.25, 0.5, 0.75, 1.0), segment="test", jobs=1):
    """Train and backtest the full variant at every ``beta_cf`` in ``grid``.

    Writes ``beta_sweep_runs.csv`` (one row per run), ``beta_sweep.csv``
    (median and quartile Sharpe per beta and universe group) and
    ``beta_sweep_table.csv`` (one row per beta, one column per group).
    Returns the long-format rows and the best beta per group.
    """
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    grid = tuple(float(b) for b in grid)
    for b in grid:
        if not 0.0 <= b <= 1.0:
            raise ConfigError(f"beta grid value {b} outside [0, 1]")
    work, labels = [], []
    for b in grid:
        c = replace(cfg, agent=replace(cfg.agent, beta_cf=b), strategies=("SCR-PPO-Full",))
        for spec in run_specs(c):
            work.append((spec, str(out), segment, False))
            labels.append((b, spec.universe["category"], spec.seed, spec.universe["name"]))
    results = _map(_train_and_backtest, work, jobs)
    per_run = []
    for (b, group, seed, uname), (run_dir, rep) in zip(labels, results):
        per_run.append({"beta_cf": b, "group": group, "universe": uname, "seed": seed,
                        "sharpe": rep["sharpe"], "run": str(Path(run_dir).relative_to(out))})
    M.write_rows(out / "beta_sweep_runs.csv", per_run)
    groups = list(dict.fromkeys(r["group"] for r in per_run))
    rows, table = [], []
    best = {}
    for b in grid:
        trow = {"setting": f"beta_cf={b}"}
        for g in groups:
            vals = [r["sharpe"] for r in per_run if r["beta_cf"] == b and r["group"] == g]
            med, q1, q3 = M.quartiles(vals)
            rows.append({"beta_cf": b, "group": g, "n": len(vals),
                         "sharpe_median": med, "sharpe_q1": q1, "sharpe_q3": q3})
            trow[g] = med
            if not math.isnan(med) and (g not in best or med > best[g][1]):
                best[g] = (b, med)
        table.append(trow)
    M.write_rows(out / "beta_sweep.csv", rows)
    M.write_rows(out / "beta_sweep_table.csv", table, ["setting"] + groups)
    summary = {g: {"best_beta": b, "sharpe_median": s, "interior": 0.0 < b < 1.0}
               for g, (b, s) in best.items()}
    _write_json(out / "beta_sweep_best.json", summary)
    return rows, summary


def report(exp_dir, segment="test"):
    """Aggregate backtested runs into quartile tables and plot-data CSVs.

    Writes ``table.csv`` (numeric median/Q1/Q3 per metric and strategy),
    ``table_formatted.csv`` (``median [Q1, Q3]`` cells), ``gap_curves.csv``
    (cumulative average scenario vs realized return, mean and 95% band
    across seeds) and ``residual_curves.csv`` (training residual vs progress).
    """
    exp_dir = Path(exp_dir)
    index_path = exp_dir / "experiment.csv"
    if not index_path.exists():
        raise FileNotFoundError(f"no experiment.csv in {exp_dir}")
    with index_path.open() as fh:
        index = list(csv.DictReader(fh))
    index.sort(key=lambda r: (r["strategy"], r["category"], r["universe"], int(r["seed"])))
    pairs = []
    for r in index:
        rep = json.loads((exp_dir / r["run"] / f"metrics_{segment}.json").read_text())
        pairs.append((r["strategy"], M.MetricsReport(**rep)))
    summary = M.summarize(pairs, "method")
    M.write_rows(exp_dir / "table.csv", summary)
    M.write_rows(exp_dir / "table_formatted.csv", M.table_rows(summary, "method"))

    gap_rows, resid_rows = [], []
    for strategy in dict.fromkeys(r["strategy"] for r in index):
        runs = [r for r in index if r["strategy"] == strategy]
        scen, real, resid = [], [], []
        for r in runs:
            with (exp_dir / r["run"] / f"returns_{segment}.csv").open() as fh:
                rows = list(csv.DictReader(fh))
            if rows and "scen_score" in rows[0]:
                scen.append(M.cumulative_average([float(x["scen_score"]) for x in rows]))
                real.append(M.cumulative_average([float(x["net_return"]) for x in rows]))
            stats = exp_dir / r["run"] / "train_stats.csv"
            if stats.exists():
                with stats.open() as fh:
                    resid.append([float(x["resid_mean"]) for x in csv.DictReader(fh)])
        if scen:
            n = min(map(len, scen))
            S = np.array([s[:n] for s in scen])
            R = np.array([s[:n] for s in real])
            ms, hs = mean_ci(S)
            mr, hr = mean_ci(R)
            for i in range(n):
                gap_rows.append({"strategy": strategy, "step": i, "scen_mean": float(ms[i]),
                                 "scen_ci": float(hs[i]), "real_mean": float(mr[i]),
                                 "real_ci": float(hr[i])})
        if resid:
            n = min(map(len, resid))
            Rz = np.array([x[:n] for x in resid])
            m, h = mean_ci(Rz)
            prog = np.linspace(0.0, 1.0, n)
            for i in range(n):
                resid_rows.append({"strategy": strategy, "progress": float(prog[i]),
                                   "resid_mean": float(m[i]), "resid_ci": float(h[i])})
    if gap_rows:
        M.write_rows(exp_dir / "gap_curves.csv", gap_rows)
    if resid_rows:
        M.write_rows(exp_dir / "residual_curves.csv", resid_rows)
    return summary


def mean_ci(X):
    """Pointwise mean and 95% half-width ``1.96 std / sqrt(n)`` across rows."""
    X = np.asarray(X, dtype=float)
    n = X.shape[0]
    m = X.mean(axis=0)
    if n < 2:
        return m, np.zeros_like(m)
    return m, 1.96 * X.std(axis=0, ddof=1) / math.sqrt(n)


def equal_weight_trail(n_assets, n_days):
    return np.tile(equal_weight(n_assets), (n_days, 1))
