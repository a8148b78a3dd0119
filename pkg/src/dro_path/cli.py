"""Command-line interface.

Exit codes: 0 on success, 2 for an invalid configuration, 3 when any
instance-level solver failure occurred (output is still written).
"""
from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from typing import Sequence

import numpy as np

from . import __version__
from .baselines import budgeted_robust_sp, censored_moment_estimates, dr0_solve, membership_flags
from .datagen import ExperimentConfig
from .errors import DroPathError
from .experiments import (RESULT_HEADER, TIME_COLUMNS, TIMING_HEADER, example1_table,
                          generate_instance, result_records, run_comparison, run_sweep,
                          run_timing, summarize, write_csv)
from .moment import bounds_all
from .solver import DrsppInstance, solve

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_FAILURE = 3

SEED_ENV = "DRO_PATH_SEED"


class ConfigError(Exception):
    pass


def _floats(text: str) -> list[float]:
    return [float(x) for x in text.split(",") if x.strip()]


def _ints(text: str) -> list[int]:
    return [int(x) for x in text.split(",") if x.strip()]


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--seed", type=int, default=None,
                   help=f"base seed (default: config value or 0; {SEED_ENV} overrides)")
    p.add_argument("--out", default=None, help="output file (default: stdout)")
    p.add_argument("--workers", type=int, default=1, help="worker processes (default: 1)")


def _config_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", default=None, help="ExperimentConfig JSON file")
    p.add_argument("--v", type=int, default=None, help="intermediate layers (default 20)")
    p.add_argument("--r", type=int, default=None, help="nodes per layer (default 10)")
    p.add_argument("--n0", type=int, default=None, help="samples per arc (default 100)")
    p.add_argument("--n1", type=int, default=None, help="subintervals per arc (default 4)")
    p.add_argument("--kappa", type=float, default=None, help="relative subinterval width (default 0.6)")
    p.add_argument("--eta0", type=float, default=None, help="total violation probability (default 0.05)")
    p.add_argument("--gammas", default=None, help="comma-separated budgets (default 0,7,14,21)")
    p.add_argument("--no-expectation", action="store_true", help="skip expectation rows")


def _instance_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("instance", help="instance JSON (graph plus ambiguity)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="dro-path", allow_abbrev=False,
                                     description="Distributionally robust shortest paths.")
    parser.add_argument("--version", action="version", version=__version__)
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", allow_abbrev=False, help="write a random layered instance and its nominal model")
    _common(p)
    _config_args(p)
    p.add_argument("--model-out", default=None, help="nominal-model JSON file")

    p = sub.add_parser("solve", allow_abbrev=False, help="solve an instance")
    _common(p)
    _instance_args(p)
    p.add_argument("--method", choices=("auto", "poly", "mip", "oracle"), default="auto")
    p.add_argument("--node-limit", type=int, default=1_000_000)

    p = sub.add_parser("baseline", allow_abbrev=False, help="solve an instance with a comparison method")
    _common(p)
    _instance_args(p)
    p.add_argument("--method", choices=("budget", "dr0"), required=True)
    p.add_argument("--gamma", type=int, default=0, help="budget for --method budget")
    p.add_argument("--samples", default=None,
                   help="CSV of cost samples (one row per sample) for --method dr0")
    p.add_argument("--eta0", type=float, default=0.05)

    p = sub.add_parser("bounds", allow_abbrev=False, help="per-arc best- and worst-case expected costs as CSV")
    _common(p)
    _instance_args(p)

    for name, text in (("compare", "compare all methods on random instances"),
                       ("sweep", "compare methods across values of one parameter")):
        p = sub.add_parser(name, help=text, allow_abbrev=False)
        _common(p)
        _config_args(p)
        p.add_argument("--instances", type=int, default=10)
        p.add_argument("--summary", default=None, help="summary CSV file")
        p.add_argument("--omit-times", action="store_true",
                       help="leave timing columns empty for reproducible output")
        if name == "sweep":
            p.add_argument("--param", required=True,
                           choices=("kappa", "n1", "gamma", "v", "n0", "eta0"))
            p.add_argument("--values", required=True, help="comma-separated values")

    p = sub.add_parser("timing", allow_abbrev=False, help="stage times of the exact solver")
    _common(p)
    _config_args(p)
    p.add_argument("--v-list", default="5,10,20")
    p.add_argument("--instances", type=int, default=1)

    p = sub.add_parser("example1", allow_abbrev=False, help="path-cost table of the four-node example")
    _common(p)
    return parser


def _seed(args, default: int) -> int:
    env = os.environ.get(SEED_ENV)
    if env is not None:
        try:
            return int(env)
        except ValueError as exc:
            raise ConfigError(f"{SEED_ENV} must be an integer") from exc
    return default if args.seed is None else args.seed


def _config(args) -> ExperimentConfig:
    try:
        cfg = ExperimentConfig.from_json(args.config) if args.config else ExperimentConfig()
        changes = {k: getattr(args, k) for k in ("v", "r", "n0", "n1", "kappa", "eta0")
                   if getattr(args, k) is not None}
        if args.gammas is not None:
            changes["gamma_list"] = tuple(_ints(args.gammas))
        if args.no_expectation:
            changes["use_expectation"] = False
        changes["seed"] = _seed(args, cfg.seed)
        return cfg.with_(**changes)
    except (ValueError, TypeError, OSError, json.JSONDecodeError) as exc:
        raise ConfigError(str(exc)) from exc


def _emit(text: str, out) -> None:
    if out is None:
        sys.stdout.write(text)
    else:
        with open(out, "w", newline="") as fh:
            fh.write(text)


def _load_instance(path) -> DrsppInstance:
    try:
        with open(path) as fh:
            return DrsppInstance.from_dict(json.load(fh))
    except (OSError, KeyError, ValueError, TypeError) as exc:
        raise ConfigError(f"cannot read instance {path}: {exc}") from exc


def cmd_generate(args) -> int:
    cfg = _config(args)
    gi = generate_instance(cfg, cfg.seed)
    inst = gi.drspp.to_dict()
    inst["config"] = cfg.to_dict()
    _emit(json.dumps(inst, indent=1) + "\n", args.out)
    if args.model_out:
        with open(args.model_out, "w") as fh:
            json.dump(gi.model.to_dict(), fh, indent=1)
    return EXIT_OK


def cmd_solve(args) -> int:
    inst = _load_instance(args.instance)
    kwargs = {"node_limit": args.node_limit} if args.method == "mip" or (
        args.method == "auto" and inst.has_expectations) else {}
    sol = solve(inst, args.method, **kwargs)
    _emit(json.dumps(sol.to_dict(), indent=1) + "\n", args.out)
    return EXIT_OK


def cmd_baseline(args) -> int:
    inst = _load_instance(args.instance)
    amb = inst.ambiguity
    if args.method == "budget":
        path, value = budgeted_robust_sp(inst.graph, amb.lower, amb.upper, args.gamma,
                                         inst.source, inst.sink)
    else:
        if args.samples is None:
            raise ConfigError("--method dr0 needs --samples")
        try:
            samples = np.loadtxt(args.samples, delimiter=",", ndmin=2)
        except (OSError, ValueError) as exc:
            raise ConfigError(f"cannot read samples: {exc}") from exc
        if samples.shape[1] != inst.graph.arc_count:
            raise ConfigError("samples need one column per arc")
        flags = [membership_flags(samples[:, a], amb.per_arc[a]) for a in range(amb.arc_count)]
        est = censored_moment_estimates(flags, amb.per_arc, args.eta0)
        path, value, _ = dr0_solve(inst.graph, (amb.lower, amb.upper), est, inst.source, inst.sink)
    _emit(json.dumps({"path": list(path.arc_ids), "objective": value}, indent=1) + "\n", args.out)
    return EXIT_OK


def cmd_bounds(args) -> int:
    inst = _load_instance(args.instance)
    b = bounds_all(inst.ambiguity)
    records = [(a, b.c_min[a], b.c_max[a]) for a in range(len(b))]
    _emit(write_csv(("arc", "c_min", "c_max"), records), args.out)
    return EXIT_OK


def _write_results(args, rows) -> int:
    omit = TIME_COLUMNS if args.omit_times else ()
    _emit(write_csv(RESULT_HEADER, result_records(rows), omit=omit), args.out)
    if args.summary:
        summ = summarize(rows)
        header = ("method", "instances", "failures", "mean_rho", "std_rho")
        write_csv(header, [tuple(s[h] for h in header) for s in summ], out=args.summary)
    return EXIT_FAILURE if any(r.error for r in rows) else EXIT_OK


def cmd_compare(args) -> int:
    cfg = _config(args)
    rows, _ = run_comparison(cfg, args.instances, args.workers)
    return _write_results(args, rows)


def cmd_sweep(args) -> int:
    cfg = _config(args)
    try:
        values = _floats(args.values)
    except ValueError as exc:
        raise ConfigError(f"bad --values: {exc}") from exc
    if args.param in ("n1", "v", "n0", "gamma"):
        values = [int(v) for v in values]
    out = run_sweep(cfg, args.param, values, args.instances, args.workers)
    omit = TIME_COLUMNS if args.omit_times else ()
    header = ("param", "value") + RESULT_HEADER
    records = [(p, v) + rec for (p, v, _), rec in zip(out, result_records(r for _, _, r in out))]
    _emit(write_csv(header, records, omit=omit), args.out)
    rows = [r for _, _, r in out]
    if args.summary:
        header = ("param", "value", "method", "instances", "failures", "mean_rho", "std_rho")
        recs = []
        for v in values:
            for s in summarize(r for _, x, r in out if x == v):
                recs.append((args.param, v) + tuple(s[h] for h in header[2:]))
        write_csv(header, recs, out=args.summary)
    return EXIT_FAILURE if any(r.error for r in rows) else EXIT_OK


def cmd_timing(args) -> int:
    cfg = _config(args)
    try:
        v_list = _ints(args.v_list)
    except ValueError as exc:
        raise ConfigError(f"bad --v-list: {exc}") from exc
    rows = run_timing(v_list, cfg.r, cfg, args.instances, args.workers)
    records = [tuple(getattr(r, h) for h in TIMING_HEADER) for r in rows]
    _emit(write_csv(TIMING_HEADER, records), args.out)
    return EXIT_FAILURE if any(r.error for r in rows) else EXIT_OK


def cmd_example1(args) -> int:
    table = example1_table()
    header = ("path", "naive_robust", "distributionally_robust", "nominal", "rho")
    records = [tuple(row[h] for h in header) for row in table["rows"]]
    _emit(write_csv(header, records), args.out)
    return EXIT_OK


COMMANDS = {"generate": cmd_generate, "solve": cmd_solve, "baseline": cmd_baseline,
            "bounds": cmd_bounds, "compare": cmd_compare, "sweep": cmd_sweep,
            "timing": cmd_timing, "example1": cmd_example1}


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2),
                        format="%(levelname)s %(name)s: %(message)s")
    if args.workers < 1:
        parser.error("--workers must be at least 1")
    try:
        return COMMANDS[args.command](args)
    except ConfigError as exc:
        print(f"dro-path: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except DroPathError as exc:
        print(f"dro-path: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_FAILURE


if __name__ == "__main__":
    sys.exit(main())
