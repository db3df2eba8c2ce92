"""Load-distribution strategies between masters.

``sld`` splits the particles once and never revises the split. ``rand``
hands surplus work to a uniformly chosen master, ``acwn`` to the least
loaded one. ``pfs`` sizes each master's share by

    N_i = A * T_i * W_i / sum_j(T_j * W_j)

where ``T_i`` is the master's average particle execution time and ``W_i``
its worker count. ``weight="rate"`` swaps ``T_i * W_i`` for ``W_i / T_i``.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, replace
from fractions import Fraction
from typing import Sequence, Union

STRATEGIES = ("sld", "rand", "acwn", "pfs")
PFS_WEIGHTS = ("time", "rate")


@dataclass(frozen=True)
class MasterStats:
    master_id: int
    n_workers: int
    completed: int = 0
    total_exec_time: int = 0
    pending_load: int = 0

    def __post_init__(self):
        if self.n_workers < 1:
            raise ValueError(f"master {self.master_id} needs at least one worker")
        if self.pending_load < 0 or self.completed < 0 or self.total_exec_time < 0:
            raise ValueError("master statistics must be non-negative")

    @property
    def avg_exec_time(self) -> Fraction | None:
        if self.completed == 0:
            return None
        return Fraction(self.total_exec_time, self.completed)


@dataclass(frozen=True)
class AllocationPlan:
    counts: tuple[int, ...]
    total: int


def record_completion(stats: MasterStats, exec_time: int) -> MasterStats:
    if exec_time < 0:
        raise ValueError(f"execution time must be non-negative, got {exec_time}")
    return replace(stats, completed=stats.completed + 1,
                   total_exec_time=stats.total_exec_time + exec_time)


def largest_remainder(total: int, weights: Sequence[Fraction]) -> list[int]:
    """Integer shares of ``total`` proportional to ``weights``.

    Floors first, then the leftover units go to the largest fractional
    parts; equal remainders favour the earlier entry.
    """
    wsum = sum(weights)
    shares = [Fraction(total) * w / wsum for w in weights]
    counts = [s.numerator // s.denominator for s in shares]
    leftover = total - sum(counts)
    order = sorted(range(len(weights)), key=lambda i: (-(shares[i] - counts[i]), i))
    for i in order[:leftover]:
        counts[i] += 1
    return counts


def pfs_weights(stats: Sequence[MasterStats], weight: str = "time") -> list[Fraction]:
    if weight not in PFS_WEIGHTS:
        raise ValueError(f"unknown PFS weight {weight!r}; choose from {PFS_WEIGHTS}")
    # Until every master has finished something, worker count is the only signal.
    if any(s.completed == 0 for s in stats):
        return [Fraction(s.n_workers) for s in stats]
    if weight == "time":
        return [s.avg_exec_time * s.n_workers for s in stats]
    if any(s.total_exec_time == 0 for s in stats):
        return [Fraction(s.n_workers) for s in stats]
    return [s.n_workers / s.avg_exec_time for s in stats]


def pfs_allocate(total: int, stats: Sequence[MasterStats], weight: str = "time") -> AllocationPlan:
    """Split ``total`` unexecuted subproblems in proportion to performance."""
    if total < 0:
        raise ValueError("total must be non-negative")
    if not stats:
        raise ValueError("no masters to allocate to")
    ordered = sorted(range(len(stats)), key=lambda i: stats[i].master_id)
    weights = pfs_weights([stats[i] for i in ordered], weight)
    if sum(weights) == 0:
        weights = [Fraction(1)] * len(weights)
    shares = largest_remainder(total, weights)
    counts = [0] * len(stats)
    for i, share in zip(ordered, shares):
        counts[i] = share
    return AllocationPlan(tuple(counts), total)


def sld_partition(total: int, masters: Union[int, Sequence]) -> AllocationPlan:
    """Equal split; the first ``total % M`` masters take one extra."""
    count = masters if isinstance(masters, int) else len(masters)
    if count < 1:
        raise ValueError("need at least one master")
    base, extra = divmod(total, count)
    return AllocationPlan(tuple(base + (1 if i < extra else 0) for i in range(count)), total)


def acwn_select(neighborhood: Sequence[MasterStats]) -> int:
    """Least loaded master; ties go to the lowest id."""
    if not neighborhood:
        raise ValueError("empty neighborhood")
    return min(neighborhood, key=lambda s: (s.pending_load, s.master_id)).master_id


def rand_select(neighborhood: Sequence[MasterStats], rng: random.Random) -> int:
    if not neighborhood:
        raise ValueError("empty neighborhood")
    ids = sorted(s.master_id for s in neighborhood)
    return ids[rng.randrange(len(ids))]
