"""Command-line front end: ``solve``, ``compare`` and ``gen``.

Exit codes: 0 optimal or success, 2 budget-truncated, 3 input error,
4 internal error.
"""

from __future__ import annotations

import argparse
import re
import sys
from dataclasses import fields
from pathlib import Path
from typing import Optional, Sequence

from . import balance
from .bench import (ConfigError, ExperimentConfig, RandomSpec, parse_config_text, read_instances,
                    run_compare)
from .core import FlowshopError, Instance, format_taillard
from .taillard import load_taillard
from .tree import solve_sequential

EXIT_OK = 0
EXIT_TRUNCATED = 2
EXIT_INPUT = 3
EXIT_INTERNAL = 4

_TAILLARD_NAME = re.compile(r"^ta\d{3}$")


class InputError(Exception):
    pass


def _load_solve_input(args) -> Instance:
    if args.random:
        spec = RandomSpec.parse(args.random)
        if spec.count != 1:
            raise InputError("solve takes exactly one instance; use count=1")
        return spec.instances()[0]
    if not args.instance:
        raise InputError("give --instance PATH|taNNN or --random SPEC")
    path = Path(args.instance)
    if not path.exists() and _TAILLARD_NAME.match(args.instance):
        return load_taillard(args.instance)
    found = read_instances([args.instance])
    if not found:
        raise InputError(f"{args.instance}: no instances in file")
    if not 0 <= args.index < len(found):
        raise InputError(f"{args.instance}: --index {args.index} out of range (file holds {len(found)})")
    return found[args.index]


def cmd_solve(args) -> int:
    inst = _load_solve_input(args)
    result = solve_sequential(inst, budget=args.budget, bound=args.bound)
    stats = result.stats
    status = "optimal" if result.complete else "truncated"
    print(f"instance: {inst.name} ({inst.n} jobs x {inst.m} machines)")
    print(f"makespan: {result.makespan}")
    print(f"permutation: {' '.join(str(j) for j in result.permutation)}")
    print(f"status: {status}")
    if inst.lower_bound is not None:
        print(f"lower_bound: {inst.lower_bound}")
    print(f"nodes_expanded: {stats.nodes_expanded}")
    print(f"nodes_pruned: {stats.nodes_pruned}")
    print(f"incumbent_updates: {stats.incumbent_updates}")
    print(f"elapsed_s: {stats.elapsed:.3f}")
    return EXIT_OK if result.complete else EXIT_TRUNCATED


# Flag dest -> ExperimentConfig field, for flags that override the config file.
_OVERRIDES = {
    "instance": "instance_paths", "strategy": "strategies", "transfer": "transfers",
    "random": "random", "topology": "topology", "k_split": "k_split", "het": "het",
    "mode": "mode", "budget": "budget", "seed": "seed", "repeats": "repeats",
    "sync_interval": "sync_interval", "latency": "latency", "pfs_weight": "pfs_weight",
    "overload_factor": "overload_factor", "baseline": "baseline", "out": "out",
}


def build_config(args) -> ExperimentConfig:
    values = {}
    if args.config:
        try:
            text = Path(args.config).read_text()
        except OSError as exc:
            raise InputError(f"cannot read config {args.config}: {exc.strerror}") from None
        values.update(parse_config_text(text))
    for dest, name in _OVERRIDES.items():
        value = getattr(args, dest, None)
        if value is None:
            continue
        if dest == "random":
            value = RandomSpec.parse(value)
        elif dest == "strategy":
            value = [s for item in value for s in item.split(",") if s]
        elif dest == "transfer":
            value = [t for item in value for t in item.split(",") if t]
        values[name] = value
    known = {f.name for f in fields(ExperimentConfig)}
    config = ExperimentConfig(**{k: v for k, v in values.items() if k in known})
    config.validate()
    return config


def cmd_compare(args) -> int:
    config = build_config(args)
    report = run_compare(config)
    csv_text = report.csv_text()
    summary_text = report.summary_csv_text()
    if config.out:
        out = Path(config.out)
        out.parent.mkdir(parents=True, exist_ok=True)
        out.write_text(csv_text)
        out.with_suffix(".summary.csv").write_text(summary_text)
        sys.stdout.write(summary_text)
    else:
        sys.stdout.write(csv_text)
        sys.stderr.write(summary_text)
    statuses = {row.status.split(":")[0] for row in report.rows}
    if "error" in statuses:
        return EXIT_INTERNAL
    return EXIT_TRUNCATED if "truncated" in statuses else EXIT_OK


def cmd_gen(args) -> int:
    if args.random:
        spec = RandomSpec.parse(args.random)
    else:
        if args.n is None or args.m is None:
            raise InputError("gen needs --n and --m (or --random)")
        spec = RandomSpec(n=args.n, m=args.m, count=args.count, mean=args.mean,
                          stddev=args.stddev, seed=args.seed or 0)
    if spec.n < 1 or spec.m < 1 or spec.count < 0 or spec.stddev < 0:
        raise InputError("gen needs n, m >= 1, count >= 0 and stddev >= 0")
    out = Path(args.out)
    try:
        out.mkdir(parents=True, exist_ok=True)
        for inst in spec.instances():
            (out / f"{inst.name}.txt").write_text(format_taillard([inst]))
    except OSError as exc:
        raise InputError(f"cannot write to {out}: {exc.strerror}") from None
    print(f"wrote {spec.count} instance(s) to {out}")
    return EXIT_OK


def _add_run_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="key = value file; flags override it")
    p.add_argument("--instance", action="append", help="Taillard-format file (repeatable)")
    p.add_argument("--random", help="random source, e.g. n=10,m=5,count=20,seed=1")
    p.add_argument("--strategy", action="append", help=f"one of {','.join(balance.STRATEGIES)} (repeatable)")
    p.add_argument("--transfer", action="append", help="1in1 or min1 (repeatable)")
    p.add_argument("--k-split", dest="k_split", type=int)
    p.add_argument("--topology", help="M:w1,w2,... workers per master, or M:w for uniform")
    p.add_argument("--het", help="homogeneous or mixed:f1,f2,...")
    p.add_argument("--mode", choices=("sim", "threads"))
    p.add_argument("--budget", type=int, help="node budget per run")
    p.add_argument("--seed", type=int, help="root seed")
    p.add_argument("--repeats", type=int, help="seeds per (instance, strategy, transfer) cell")
    p.add_argument("--sync-interval", dest="sync_interval", type=int)
    p.add_argument("--latency", type=int, help="link latency in virtual time units")
    p.add_argument("--pfs-weight", dest="pfs_weight", choices=balance.PFS_WEIGHTS)
    p.add_argument("--overload-factor", dest="overload_factor", type=float)
    p.add_argument("--baseline", help="strategy[/transfer] the summary compares against")
    p.add_argument("--out", help="CSV output path (summary goes next to it)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="pbb-flowshop",
                                     description="Parallel branch and bound for the permutation flowshop.")
    sub = parser.add_subparsers(dest="command", required=True)

    solve = sub.add_parser("solve", help="solve one instance sequentially")
    solve.add_argument("--instance", help="Taillard-format file or a packaged name such as ta021")
    solve.add_argument("--index", type=int, default=0, help="which instance of a multi-instance file")
    solve.add_argument("--random", help="random instance, e.g. n=7,m=3,seed=42")
    solve.add_argument("--budget", type=int, help="stop after this many expanded nodes")
    solve.add_argument("--bound", choices=("machine", "johnson"), default="machine")
    solve.set_defaults(func=cmd_solve)

    compare = sub.add_parser("compare", help="run the strategy x transfer cross-product")
    _add_run_flags(compare)
    compare.set_defaults(func=cmd_compare)

    gen = sub.add_parser("gen", help="write random instances in Taillard format")
    gen.add_argument("--n", type=int)
    gen.add_argument("--m", type=int)
    gen.add_argument("--count", type=int, default=1)
    gen.add_argument("--mean", type=float, default=50)
    gen.add_argument("--stddev", type=float, default=25)
    gen.add_argument("--seed", type=int, default=0)
    gen.add_argument("--random", help="alternative to the flags above")
    gen.add_argument("--out", required=True, help="output directory")
    gen.set_defaults(func=cmd_gen)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (InputError, ConfigError, FlowshopError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except Exception as exc:
        print(f"internal error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
