"""Strategy-comparison experiments and their CSV reports."""

from __future__ import annotations

import csv
import hashlib
import io
import statistics
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Optional

from . import balance
from .core import Instance, generate_random, parse_taillard
from .runtime import HeterogeneityModel, Topology, run_experiment
from .runtime.actors import TRANSFERS

CSV_FIELDS = ("instance", "strategy", "transfer", "seed", "time", "makespan",
              "optimal", "nodes", "messages", "bytes", "status")
SUMMARY_FIELDS = ("strategy", "transfer", "cells", "mean_time", "improvement_vs_baseline_pct",
                  "improvement_vs_sld_pct")

_TRANSFER_ALIASES = {"1in1": "1in1", "one": "1in1", "oneinone": "1in1",
                     "min1": "min1", "multi": "min1", "multiinone": "min1"}


class ConfigError(ValueError):
    pass


def derive_seed(root: int, *counters: int) -> int:
    """Per-cell seed: first 8 bytes of sha256("root/c1/c2/...") as an int."""
    text = "/".join(str(v) for v in (root, *counters))
    return int.from_bytes(hashlib.sha256(text.encode()).digest()[:8], "little") >> 1


def normalize_transfer(token: str) -> str:
    try:
        return _TRANSFER_ALIASES[token.strip().lower()]
    except KeyError:
        raise ConfigError(f"unknown transfer {token!r}; use 1in1 or min1") from None


@dataclass
class RandomSpec:
    n: int
    m: int
    count: int = 1
    mean: float = 50
    stddev: float = 25
    seed: int = 0

    @classmethod
    def parse(cls, text: str) -> "RandomSpec":
        """``n=10,m=5[,count=20,mean=50,stddev=25,seed=1]``."""
        fields = {}
        for part in filter(None, (p.strip() for p in text.split(","))):
            key, sep, value = part.partition("=")
            if not sep:
                raise ConfigError(f"random spec item {part!r} is not key=value")
            fields[key.strip()] = value.strip()
        try:
            spec = cls(n=int(fields.pop("n")), m=int(fields.pop("m")),
                       count=int(fields.pop("count", 1)), mean=float(fields.pop("mean", 50)),
                       stddev=float(fields.pop("stddev", 25)), seed=int(fields.pop("seed", 0)))
        except KeyError as exc:
            raise ConfigError(f"random spec needs {exc.args[0]}=") from None
        except ValueError as exc:
            raise ConfigError(f"random spec {text!r}: {exc}") from None
        if fields:
            raise ConfigError(f"unknown random spec keys: {sorted(fields)}")
        if spec.n < 1 or spec.m < 1 or spec.count < 0 or spec.stddev < 0:
            raise ConfigError(f"invalid random spec {text!r}")
        return spec

    def instances(self) -> list[Instance]:
        return [generate_random(self.n, self.m, self.mean, self.stddev,
                                seed=derive_seed(self.seed, i), name=f"rand{self.n}x{self.m}_{i:03d}")
                for i in range(self.count)]


def read_instances(paths: Iterable[str]) -> list[Instance]:
    out = []
    for path in paths:
        stem = Path(path).stem
        found = parse_taillard(Path(path).read_text(), name_prefix=f"{stem}_")
        if len(found) == 1 and found[0].name == f"{stem}_001":
            found = [Instance(p=found[0].p, name=stem, seed=found[0].seed,
                              upper_bound=found[0].upper_bound, lower_bound=found[0].lower_bound)]
        out.extend(found)
    return out


@dataclass
class ExperimentConfig:
    instance_paths: list[str] = field(default_factory=list)
    random: Optional[RandomSpec] = None
    topology: str = "4:2"
    strategies: list[str] = field(default_factory=lambda: list(balance.STRATEGIES))
    transfers: list[str] = field(default_factory=lambda: list(TRANSFERS))
    k_split: int = 1
    het: str = "homogeneous"
    mode: str = "sim"
    budget: Optional[int] = None
    seed: int = 0
    repeats: int = 1
    sync_interval: int = 50
    latency: int = 1
    pfs_weight: str = "time"
    overload_factor: float = 2.0
    baseline: Optional[str] = None
    out: Optional[str] = None

    def validate(self) -> None:
        if not self.strategies:
            raise ConfigError("at least one strategy is required")
        for s in self.strategies:
            if s not in balance.STRATEGIES:
                raise ConfigError(f"unknown strategy {s!r}; choose from {balance.STRATEGIES}")
        self.transfers = [normalize_transfer(t) for t in self.transfers]
        if not self.transfers:
            raise ConfigError("at least one transfer scheme is required")
        if not self.instance_paths and self.random is None:
            raise ConfigError("no instances: give --instance or --random")
        for path in self.instance_paths:
            if not Path(path).is_file():
                raise ConfigError(f"instance file not found: {path}")
        if self.mode not in ("sim", "threads"):
            raise ConfigError(f"unknown mode {self.mode!r}")
        if self.pfs_weight not in balance.PFS_WEIGHTS:
            raise ConfigError(f"unknown pfs weight {self.pfs_weight!r}")
        if self.repeats < 1:
            raise ConfigError("repeats must be at least 1")
        try:
            self.topology_obj()
            self.het_obj()
        except ValueError as exc:
            raise ConfigError(str(exc)) from None

    def topology_obj(self) -> Topology:
        return Topology.parse(self.topology, self.sync_interval)

    def het_obj(self) -> HeterogeneityModel:
        return HeterogeneityModel.parse(self.het, self.latency)

    def load_instances(self) -> list[Instance]:
        out = read_instances(self.instance_paths)
        if self.random is not None:
            out.extend(self.random.instances())
        if not out:
            raise ConfigError("the configured sources contain no instances")
        return out


# Config keys that may repeat and accumulate into lists.
LIST_KEYS = {"instance": "instance_paths", "strategy": "strategies", "transfer": "transfers"}
SCALAR_KEYS = {"random": RandomSpec.parse, "topology": str, "k_split": int, "het": str,
               "mode": str, "budget": int, "seed": int, "repeats": int, "sync_interval": int,
               "latency": int, "pfs_weight": str, "overload_factor": float, "baseline": str,
               "out": str}


def parse_config_text(text: str) -> dict:
    """Flat ``key = value`` lines; ``#`` starts a comment; list keys may repeat."""
    values: dict = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        key, value = key.strip().replace("-", "_"), value.strip()
        if not sep or not key:
            raise ConfigError(f"config line {lineno}: expected key = value")
        if key in LIST_KEYS:
            values.setdefault(LIST_KEYS[key], []).append(value)
        elif key in SCALAR_KEYS:
            try:
                values[key] = SCALAR_KEYS[key](value)
            except ValueError as exc:
                raise ConfigError(f"config line {lineno}: {exc}") from None
        else:
            raise ConfigError(f"config line {lineno}: unknown key {key!r}")
    return values


@dataclass
class ReportRow:
    instance: str
    strategy: str
    transfer: str
    seed: int
    time: float
    makespan: Optional[int]
    optimal: bool
    nodes: int
    messages: int
    bytes: int
    status: str = "ok"

    def as_csv(self) -> list:
        return [self.instance, self.strategy, self.transfer, self.seed, self.time,
                "" if self.makespan is None else self.makespan, int(self.optimal),
                self.nodes, self.messages, self.bytes, self.status]


@dataclass
class CompareReport:
    rows: list[ReportRow]
    summary: list[dict]

    def csv_text(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(CSV_FIELDS)
        for row in self.rows:
            writer.writerow(row.as_csv())
        return buf.getvalue()

    def summary_csv_text(self) -> str:
        buf = io.StringIO()
        writer = csv.DictWriter(buf, SUMMARY_FIELDS, lineterminator="\n")
        writer.writeheader()
        writer.writerows(self.summary)
        return buf.getvalue()


def improvement_pct(baseline: float, candidate: float) -> float:
    return (baseline - candidate) / baseline * 100 if baseline else 0.0


def summarize(rows: list[ReportRow], baseline: Optional[tuple[str, str]] = None) -> list[dict]:
    groups: dict[tuple[str, str], list[float]] = {}
    for row in rows:
        if row.status in ("ok", "truncated"):
            groups.setdefault((row.strategy, row.transfer), []).append(row.time)
    means = {key: statistics.mean(times) for key, times in groups.items()}
    if baseline is None and means:
        baseline = next(iter(means))
    sld = [v for (s, _), v in means.items() if s == "sld"]
    sld_mean = statistics.mean(sld) if sld else None
    out = []
    for (strategy, transfer), mean in means.items():
        base = means.get(baseline)
        out.append({
            "strategy": strategy,
            "transfer": transfer,
            "cells": len(groups[(strategy, transfer)]),
            "mean_time": round(mean, 6),
            "improvement_vs_baseline_pct": "" if base is None else round(improvement_pct(base, mean), 3),
            "improvement_vs_sld_pct": "" if sld_mean is None else round(improvement_pct(sld_mean, mean), 3),
        })
    return out


def run_compare(config: ExperimentConfig) -> CompareReport:
    """Every (instance, strategy, transfer, repeat) cell, one row each.

    The cell seed depends on the root seed, the instance index and the
    repeat index only, so strategies are compared on identical draws.
    """
    config.validate()
    instances = config.load_instances()
    topology, het = config.topology_obj(), config.het_obj()
    rows = []
    for i, inst in enumerate(instances):
        for rep in range(config.repeats):
            seed = derive_seed(config.seed, i, rep)
            for strategy in config.strategies:
                for transfer in config.transfers:
                    rows.append(_run_cell(inst, strategy, transfer, seed, topology, het, config))
    baseline = None
    if config.baseline:
        strategy, _, transfer = config.baseline.partition("/")
        baseline = (strategy, normalize_transfer(transfer or config.transfers[0]))
    return CompareReport(rows, summarize(rows, baseline))


def _run_cell(inst, strategy, transfer, seed, topology, het, config) -> ReportRow:
    try:
        metrics = run_experiment(inst, topology, strategy, transfer, k_split=config.k_split,
                                 het=het, mode=config.mode, budget=config.budget, seed=seed,
                                 pfs_weight=config.pfs_weight,
                                 overload_factor=config.overload_factor)
    except Exception as exc:  # a failed cell must not stop the sweep
        return ReportRow(inst.name, strategy, transfer, seed, 0, None, False, 0, 0, 0,
                         f"error: {type(exc).__name__}: {exc}".replace("\n", " "))
    return ReportRow(inst.name, strategy, transfer, seed, metrics.completion_time,
                     metrics.makespan, metrics.complete, metrics.nodes_expanded,
                     metrics.messages, metrics.bytes,
                     "ok" if metrics.complete else "truncated")
