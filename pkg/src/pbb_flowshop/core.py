"""Permutation flowshop primitives.

An :class:`Instance` stores processing times indexed ``p[job][machine]``.
Everything in this module is a pure function over immutable values.
"""

from __future__ import annotations

import random
import re
from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence, TextIO, Union


class FlowshopError(ValueError):
    """Invalid argument passed to a flowshop routine."""


class TaillardParseError(FlowshopError):
    def __init__(self, line: int, message: str):
        super().__init__(f"line {line}: {message}")
        self.line = line


@dataclass(frozen=True)
class Instance:
    """An n-job, m-machine permutation flowshop problem."""

    p: tuple[tuple[int, ...], ...]
    name: str = "instance"
    seed: Optional[int] = None
    upper_bound: Optional[int] = None
    lower_bound: Optional[int] = None
    n: int = field(init=False)
    m: int = field(init=False)

    def __post_init__(self):
        rows = tuple(tuple(int(v) for v in row) for row in self.p)
        if not rows:
            raise FlowshopError("instance needs at least one job")
        m = len(rows[0])
        if m < 1:
            raise FlowshopError("instance needs at least one machine")
        for j, row in enumerate(rows):
            if len(row) != m:
                raise FlowshopError(f"job {j} has {len(row)} times, expected {m}")
            if any(v < 0 for v in row):
                raise FlowshopError(f"job {j} has a negative processing time")
        object.__setattr__(self, "p", rows)
        object.__setattr__(self, "n", len(rows))
        object.__setattr__(self, "m", m)

    @classmethod
    def from_machine_rows(cls, rows: Sequence[Sequence[int]], **kwargs) -> "Instance":
        """Build from machine-major rows (row k = all jobs on machine k)."""
        return cls(p=tuple(zip(*rows)), **kwargs)

    def machine_rows(self) -> list[list[int]]:
        return [[self.p[j][k] for j in range(self.n)] for k in range(self.m)]


def _check_prefix(inst: Instance, perm: Sequence[int]) -> None:
    seen = set()
    for job in perm:
        if not 0 <= job < inst.n:
            raise FlowshopError(f"job index {job} out of range for n={inst.n}")
        if job in seen:
            raise FlowshopError(f"job {job} appears twice")
        seen.add(job)


def empty_front(inst: Instance) -> tuple[int, ...]:
    return (0,) * inst.m


def extend_front(inst: Instance, front: Sequence[int], job: int) -> tuple[int, ...]:
    """Completion times on every machine after appending ``job`` to a prefix."""
    if not 0 <= job < inst.n:
        raise FlowshopError(f"job index {job} out of range for n={inst.n}")
    times = inst.p[job]
    out = [0] * inst.m
    prev = 0
    for k in range(inst.m):
        c = front[k] if front[k] > prev else prev
        prev = c + times[k]
        out[k] = prev
    return tuple(out)


def front_of(inst: Instance, prefix: Sequence[int]) -> tuple[int, ...]:
    _check_prefix(inst, prefix)
    front = empty_front(inst)
    for job in prefix:
        front = extend_front(inst, front, job)
    return front


def makespan(inst: Instance, perm: Sequence[int]) -> int:
    if len(perm) != inst.n:
        raise FlowshopError(f"permutation has {len(perm)} jobs, expected {inst.n}")
    return front_of(inst, perm)[-1]


def johnson_order(inst: Instance) -> list[int]:
    """Johnson's rule for the two-machine flowshop (optimal makespan)."""
    if inst.m != 2:
        raise FlowshopError(f"Johnson's rule needs m == 2, got m={inst.m}")
    return _johnson([(inst.p[j][0], inst.p[j][1]) for j in range(inst.n)])


def _johnson(pairs: Sequence[tuple[int, int]]) -> list[int]:
    first = sorted((a, j) for j, (a, b) in enumerate(pairs) if a < b)
    last = sorted((-b, j) for j, (a, b) in enumerate(pairs) if a >= b)
    return [j for _, j in first] + [j for _, j in last]


def _tails(inst: Instance) -> list[list[int]]:
    # tails[j][k] = sum of p[j][k+1:]
    out = []
    for row in inst.p:
        acc, t = 0, [0] * inst.m
        for k in range(inst.m - 1, -1, -1):
            t[k] = acc
            acc += row[k]
        out.append(t)
    return out


def machine_bound(inst: Instance, front: Sequence[int], remaining: Iterable[int]) -> int:
    """max over machines of front + remaining work + smallest tail."""
    remaining = list(remaining)
    if not remaining:
        return front[-1]
    tails = _tails(inst)
    best = 0
    for k in range(inst.m):
        load = sum(inst.p[r][k] for r in remaining)
        tail = min(tails[r][k] for r in remaining)
        value = front[k] + load + tail
        if value > best:
            best = value
    return best


def johnson_bound(inst: Instance, front: Sequence[int], remaining: Iterable[int]) -> int:
    """Two-machine relaxation on each adjacent machine pair, combined with
    the machine bound."""
    remaining = list(remaining)
    if not remaining:
        return front[-1]
    best = machine_bound(inst, front, remaining)
    tails = _tails(inst)
    for k in range(inst.m - 1):
        pairs = [(inst.p[r][k], inst.p[r][k + 1]) for r in remaining]
        c1, c2 = front[k], front[k + 1]
        for i in _johnson(pairs):
            c1 += pairs[i][0]
            c2 = max(c1, c2) + pairs[i][1]
        value = c2 + min(tails[r][k + 1] for r in remaining)
        if value > best:
            best = value
    return best


BOUNDS = {"machine": machine_bound, "johnson": johnson_bound}


def lower_bound(inst: Instance, front: Sequence[int], remaining: Iterable[int],
                kind: str = "machine") -> int:
    try:
        fn = BOUNDS[kind]
    except KeyError:
        raise FlowshopError(f"unknown bound {kind!r}; choose from {sorted(BOUNDS)}") from None
    return fn(inst, front, remaining)


def generate_random(n: int, m: int, mean: float = 50, stddev: float = 25,
                    seed: Optional[int] = None, name: Optional[str] = None) -> Instance:
    """Normally distributed processing times, rounded and clamped to >= 1."""
    if n < 1 or m < 1:
        raise FlowshopError("n and m must be positive")
    if stddev < 0:
        raise FlowshopError("stddev must be non-negative")
    rng = random.Random(seed)
    p = [[max(1, int(round(rng.gauss(mean, stddev)))) for _ in range(m)] for _ in range(n)]
    return Instance(p=tuple(map(tuple, p)), name=name or f"rand_{n}x{m}_s{seed}", seed=seed)


# --- Taillard text format ---------------------------------------------------

_LABEL = re.compile(r"^[^\d]*:\s*$")
_NAME = re.compile(r"^#\s*name\s*:\s*(\S+)")


def _tokens(text: str):
    """Yield (lineno, name-or-None, line) for lines carrying data or names."""
    for lineno, raw in enumerate(text.splitlines(), start=1):
        stripped = raw.strip()
        hit = _NAME.match(stripped)
        if hit:
            yield lineno, hit.group(1), None
            continue
        line = stripped.split("#", 1)[0].strip()
        if line and not _LABEL.match(line):
            yield lineno, None, line


def _ints(lineno: int, line: str) -> list[int]:
    try:
        return [int(tok) for tok in line.split()]
    except ValueError:
        bad = next(tok for tok in line.split() if not tok.lstrip("-").isdigit())
        raise TaillardParseError(lineno, f"non-numeric token {bad!r}") from None


def parse_taillard(source: Union[str, TextIO], name_prefix: str = "inst") -> list[Instance]:
    """Parse one or more concatenated Taillard instances.

    Each instance is a header ``n m [seed [upper [lower]]]`` followed by m
    machine-major rows of n integers. Lines starting with ``#`` and the
    textual labels of the original Taillard files are skipped; a comment
    ``# name: ta021`` names the instance that follows it.
    """
    text = source if isinstance(source, str) else source.read()
    instances: list[Instance] = []
    name = None
    header = None
    header_line = 0
    rows: list[list[int]] = []
    for lineno, label, line in _tokens(text):
        if label is not None:
            if header is not None:
                raise TaillardParseError(lineno, f"expected {header[1]} machine rows, found {len(rows)}")
            name = label
            continue
        values = _ints(lineno, line)
        if header is None:
            if not 2 <= len(values) <= 5:
                raise TaillardParseError(lineno, f"header needs 2 to 5 integers, got {len(values)}")
            if values[0] < 1 or values[1] < 1:
                raise TaillardParseError(lineno, f"bad dimensions n={values[0]} m={values[1]}")
            header, header_line, rows = values, lineno, []
            continue
        n, m = header[0], header[1]
        if len(values) != n:
            raise TaillardParseError(lineno, f"expected {n} values, got {len(values)}")
        if any(v < 0 for v in values):
            raise TaillardParseError(lineno, "negative processing time")
        rows.append(values)
        if len(rows) == m:
            extra = header[2:] + [None] * (5 - len(header))
            instances.append(Instance.from_machine_rows(
                rows, name=name or f"{name_prefix}{len(instances) + 1:03d}",
                seed=extra[0], upper_bound=extra[1], lower_bound=extra[2]))
            header, name = None, None
    if header is not None:
        raise TaillardParseError(header_line, f"expected {header[1]} machine rows, found {len(rows)}")
    return instances


def format_taillard(instances: Iterable[Instance]) -> str:
    """Serialize in the layout of the original Taillard files."""
    out = []
    for inst in instances:
        head = [inst.n, inst.m]
        for v in (inst.seed, inst.upper_bound, inst.lower_bound):
            if v is None:
                break
            head.append(v)
        out.append(f"# name: {inst.name}")
        out.append("number of jobs, number of machines, initial seed, upper bound and lower bound :")
        out.append(" ".join(f"{v:>10}" for v in head))
        out.append("processing times :")
        for row in inst.machine_rows():
            out.append(" ".join(f"{v:>3}" for v in row))
    return "\n".join(out) + ("\n" if out else "")
