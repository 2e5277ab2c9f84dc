"""
Command-line entry point: ``scenario-rl <command> [options]``.

Exit codes: 0 success, 2 configuration or input error, 3 a verified bound
or assertion failed, 1 anything unexpected.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import replace
from pathlib import Path

from . import experiment as X
from . import theory
from .agent import ConfigError
from .benchmarks import PRESETS
from .tape import TapeError, generate_synthetic_tape, write_tape

logger = logging.getLogger("scenario_rl")

EXIT_OK, EXIT_ERROR, EXIT_CONFIG, EXIT_BOUND = 0, 1, 2, 3


def _config(args):
    cfg = X.load_config(args.config)
    if args.seed is not None:
        cfg = replace(cfg, seeds=(args.seed,))
    return cfg


def _out(args, cfg=None):
    out = args.out or (cfg.out if cfg is not None else None)
    if out is None:
        raise ConfigError("no output directory: pass --out or set 'out' in the config")
    return Path(out)


def cmd_train(args):
    cfg = _config(args)
    out = _out(args, cfg)
    specs = X.run_specs(cfg)
    dirs = X._map(_train_one, [(s, str(out), args.trace) for s in specs], args.jobs)
    for d in dirs:
        print(d)
    return EXIT_OK


def _train_one(item):
    spec, out, trace = item
    return str(X.train_run(spec, out, trace))


def cmd_backtest(args):
    if args.config:
        cfg = _config(args)
        out = _out(args, cfg)
        X.run_experiment(cfg, out, args.segment, args.jobs, args.trace)
        X.report(out, args.segment)
        print(out / "experiment.csv")
        return EXIT_OK
    if not args.runs:
        raise ConfigError("backtest needs run directories or --config")
    for run in args.runs:
        rep = X.backtest_run(run, args.segment)
        print(run, json.dumps(rep.to_dict(), sort_keys=True))
    return EXIT_OK


def cmd_sweep_beta(args):
    cfg = _config(args)
    out = _out(args, cfg)
    try:
        grid = [float(b) for b in args.grid.split(",") if b.strip()]
    except ValueError as exc:
        raise ConfigError(f"bad --grid: {exc}") from exc
    _, best = X.sweep_beta(cfg, out, grid, args.segment, args.jobs)
    print(json.dumps(best, sort_keys=True))
    return EXIT_OK


def cmd_verify_theory(args):
    if args.seeds < 1:
        raise ConfigError("--seeds must be >= 1")
    rep = theory.verify_suite(args.seeds, seed=args.seed or 0)
    text = json.dumps(rep, indent=2, sort_keys=True, default=float)
    if args.out:
        Path(args.out).parent.mkdir(parents=True, exist_ok=True)
        Path(args.out).write_text(text + "\n")
    else:
        print(text)
    status = {k: rep[k]["ok"] for k in
              ("lemma", "operator_gap", "fixed_point_bias", "contraction", "mixing_bound", "beta_star")}
    for k, ok in status.items():
        logger.info("%-18s %s", k, "pass" if ok else "FAIL")
    return EXIT_OK if rep["ok"] else EXIT_BOUND


def cmd_report(args):
    X.report(args.exp_dir, args.segment)
    print(Path(args.exp_dir) / "table_formatted.csv")
    return EXIT_OK


def cmd_synth_tape(args):
    if args.out is None:
        raise ConfigError("synth-tape needs --out")
    kw = {}
    if args.n_days is not None:
        kw["n_days"] = args.n_days
    if args.n_assets is not None:
        kw["n_assets"] = args.n_assets
    cfg = PRESETS[args.preset](args.seed or 0, **kw)
    path = write_tape(generate_synthetic_tape(cfg), args.out)
    print(path)
    return EXIT_OK


def build_parser():
    p = argparse.ArgumentParser(prog="scenario-rl", description=__doc__.strip().splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, config=True):
        if config:
            sp.add_argument("--config", help="TOML or JSON run configuration")
        sp.add_argument("--seed", type=int, help="override the configured seeds")
        sp.add_argument("--out", help="output directory")
        sp.add_argument("--trace", action="store_true", help="write per-step training traces")
        sp.add_argument("--jobs", type=int, default=1, help="worker processes")

    sp = sub.add_parser("train", help="train every configured run")
    common(sp)
    sp.set_defaults(func=cmd_train, need_config=True)

    sp = sub.add_parser("backtest", help="evaluate run directories, or a whole config")
    sp.add_argument("runs", nargs="*")
    sp.add_argument("--segment", default="test", choices=("train", "valid", "test"))
    common(sp)
    sp.set_defaults(func=cmd_backtest)

    sp = sub.add_parser("sweep-beta", help="train and backtest over a beta_cf grid")
    sp.add_argument("--grid", default="0,0.25,0.5,0.75,1.0")
    sp.add_argument("--segment", default="test", choices=("train", "valid", "test"))
    common(sp)
    sp.set_defaults(func=cmd_sweep_beta, need_config=True)

    sp = sub.add_parser("verify-theory", help="randomized exact checks of the operator bounds")
    sp.add_argument("--seeds", type=int, default=100, help="number of random models")
    common(sp, config=False)
    sp.set_defaults(func=cmd_verify_theory)

    sp = sub.add_parser("report", help="aggregate a backtested experiment directory")
    sp.add_argument("exp_dir")
    sp.add_argument("--segment", default="test", choices=("train", "valid", "test"))
    sp.set_defaults(func=cmd_report)

    sp = sub.add_parser("synth-tape", help="write a synthetic tape CSV")
    sp.add_argument("--preset", default="regime-shift", choices=sorted(PRESETS))
    sp.add_argument("--n-days", type=int)
    sp.add_argument("--n-assets", type=int)
    common(sp, config=False)
    sp.set_defaults(func=cmd_synth_tape)
    return p


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO,
                        format="%(levelname)s %(name)s: %(message)s")
    if getattr(args, "need_config", False) and not args.config:
        parser.error(f"{args.command} needs --config")
    try:
        return args.func(args)
    except (ConfigError, TapeError) as exc:
        logger.error("%s", exc)
        return EXIT_CONFIG
    except FileNotFoundError as exc:
        logger.error("%s", exc)
        return EXIT_CONFIG
    except AssertionError as exc:
        # BoundViolation is an AssertionError
        logger.error("%s", exc)
        return EXIT_BOUND


if __name__ == "__main__":
    sys.exit(main())
