"""Branch-and-bound tree over job prefixes.

A node on floor ``k`` fixes ``k + 1`` jobs. Nodes are numbered densely:
floor ``k`` holds ``n!/(n-k-1)!`` nodes and a node's id is the number of
nodes on shallower floors plus its lexicographic rank within its floor.
Ids therefore cover ``[0, sum_{i=1..n} n!/(n-i)! - 1]`` without gaps, which
lets workers rebuild a subproblem from the integer alone.
"""

from __future__ import annotations

import itertools
import threading
import time
from dataclasses import dataclass, field
from typing import Optional, Sequence

from .core import FlowshopError, Instance, _tails, extend_front, front_of, lower_bound

MAX_JOBS = 33
ID_BITS = 128


class CapacityError(FlowshopError):
    """A count or id would not fit the supported range."""


class InvalidStateError(FlowshopError):
    pass


def falling(a: int, b: int) -> int:
    """a * (a-1) * ... * (a-b+1)."""
    out = 1
    for v in range(a - b + 1, a + 1):
        out *= v
    return out


def _check_n(n: int) -> None:
    if n < 1:
        raise FlowshopError(f"n must be positive, got {n}")
    if n > MAX_JOBS:
        raise CapacityError(f"n={n} exceeds the {ID_BITS}-bit id range (max {MAX_JOBS} jobs)")


def _check_floor(n: int, k: int) -> None:
    _check_n(n)
    if not 0 <= k <= n - 1:
        raise FlowshopError(f"floor {k} outside [0, {n - 1}]")


def floor_size(n: int, k: int) -> int:
    """Number of subproblems on floor k: n!/(n-k-1)!."""
    _check_floor(n, k)
    return falling(n, k + 1)


def leaves_count(n: int, k: int) -> int:
    """Complete permutations below one floor-k subproblem: (n-k-1)!."""
    _check_floor(n, k)
    return falling(n - k - 1, n - k - 1)


def floor_offset(n: int, k: int) -> int:
    """Id of the first node on floor k."""
    _check_floor(n, k)
    return sum(falling(n, i) for i in range(1, k + 1))


def id_count(n: int) -> int:
    """Total number of node ids for n jobs."""
    _check_n(n)
    return sum(falling(n, i) for i in range(1, n + 1))


def prefix_rank(n: int, prefix: Sequence[int]) -> int:
    """Lexicographic rank of a prefix among all prefixes of its length."""
    length = len(prefix)
    free = list(range(n))
    rank = 0
    for i, job in enumerate(prefix):
        digit = free.index(job)
        free.pop(digit)
        rank += digit * falling(n - i - 1, length - i - 1)
    return rank


def prefix_unrank(n: int, length: int, rank: int) -> list[int]:
    free = list(range(n))
    out = []
    for i in range(length):
        weight = falling(n - i - 1, length - i - 1)
        digit, rank = divmod(rank, weight)
        out.append(free.pop(digit))
    return out


def encode_id(n: int, prefix: Sequence[int]) -> int:
    _check_n(n)
    if not prefix:
        raise FlowshopError("cannot encode an empty prefix")
    if len(prefix) > n:
        raise FlowshopError(f"prefix of length {len(prefix)} is longer than n={n}")
    if len(set(prefix)) != len(prefix):
        raise FlowshopError(f"duplicate job in prefix {list(prefix)}")
    for job in prefix:
        if not 0 <= job < n:
            raise FlowshopError(f"job index {job} out of range for n={n}")
    k = len(prefix) - 1
    return floor_offset(n, k) + prefix_rank(n, prefix)


def decode_id(n: int, node_id: int) -> list[int]:
    _check_n(n)
    if not 0 <= node_id < id_count(n):
        raise FlowshopError(f"id {node_id} outside [0, {id_count(n) - 1}] for n={n}")
    rest = node_id
    for k in range(n):
        size = falling(n, k + 1)
        if rest < size:
            return prefix_unrank(n, k + 1, rest)
        rest -= size
    raise AssertionError("unreachable")


def split_id(n: int, node_id: int) -> tuple[int, int]:
    """(floor, rank) of an id."""
    prefix = decode_id(n, node_id)
    return len(prefix) - 1, node_id - floor_offset(n, len(prefix) - 1)


@dataclass(frozen=True)
class Subproblem:
    prefix: tuple[int, ...]
    front: tuple[int, ...]
    bound: int

    @property
    def floor(self) -> int:
        return len(self.prefix) - 1

    @classmethod
    def from_prefix(cls, inst: Instance, prefix: Sequence[int], bound: str = "machine") -> "Subproblem":
        prefix = tuple(prefix)
        front = front_of(inst, prefix)
        remaining = [j for j in range(inst.n) if j not in prefix]
        return cls(prefix, front, lower_bound(inst, front, remaining, bound))

    @classmethod
    def from_id(cls, inst: Instance, node_id: int, bound: str = "machine") -> "Subproblem":
        return cls.from_prefix(inst, decode_id(inst.n, node_id), bound)

    def node_id(self, n: int) -> int:
        return encode_id(n, self.prefix)


def children(inst: Instance, sub: Subproblem, bound: str = "machine") -> list[Subproblem]:
    if len(sub.prefix) >= inst.n:
        raise InvalidStateError(f"subproblem {sub.prefix} is a leaf")
    out = []
    used = set(sub.prefix)
    for job in range(inst.n):
        if job in used:
            continue
        front = extend_front(inst, sub.front, job)
        remaining = [r for r in range(inst.n) if r not in used and r != job]
        out.append(Subproblem(sub.prefix + (job,), front, lower_bound(inst, front, remaining, bound)))
    return out


def split_frontier(inst: Instance, k_split: int, max_particles: int = 1_000_000) -> list[int]:
    """Ids of every floor-``k_split`` node, ascending."""
    size = floor_size(inst.n, k_split)
    if size > max_particles:
        raise CapacityError(f"floor {k_split} has {size} nodes, above the cap of {max_particles}")
    start = floor_offset(inst.n, k_split)
    return list(range(start, start + size))


# --- search ------------------------------------------------------------------

@dataclass
class Incumbent:
    makespan: int
    permutation: Optional[tuple[int, ...]] = None


class IncumbentCell:
    """Thread-shared best makespan. Reads may be stale; writes only improve."""

    def __init__(self, makespan: Optional[int] = None, permutation=None):
        self._lock = threading.Lock()
        self.makespan = makespan if makespan is not None else float("inf")
        self.permutation = tuple(permutation) if permutation is not None else None

    def offer(self, makespan: int, permutation=None) -> bool:
        with self._lock:
            if makespan < self.makespan:
                self.makespan = makespan
                self.permutation = tuple(permutation) if permutation is not None else None
                return True
            return False


@dataclass
class SearchStats:
    nodes_expanded: int = 0
    nodes_pruned: int = 0
    incumbent_updates: int = 0
    elapsed: float = 0.0


@dataclass
class SearchResult:
    permutation: Optional[tuple[int, ...]]
    makespan: Optional[int]
    stats: SearchStats = field(default_factory=SearchStats)
    complete: bool = True
    improved: bool = False


def solve_sequential(inst: Instance, incumbent: Optional[Incumbent] = None,
                     budget: Optional[int] = None, root: Sequence[int] = (),
                     bound: str = "machine", shared: Optional[IncumbentCell] = None,
                     pruned_log: Optional[list] = None) -> SearchResult:
    """Depth-first branch and bound below ``root``.

    Children are visited by ascending bound, ties by job index. A node is
    pruned when its bound is not below the incumbent. With ``budget`` the
    search stops after that many expanded nodes and reports
    ``complete=False``. ``pruned_log`` collects pruned prefixes.
    """
    started = time.perf_counter()
    stats = SearchStats()
    n, m = inst.n, inst.m
    p = inst.p
    tails = _tails(inst)
    johnson = bound == "johnson"
    if bound not in ("machine", "johnson"):
        lower_bound(inst, (0,) * m, [], bound)  # raises for unknown kinds

    best_perm = incumbent.permutation if incumbent else None
    ub = incumbent.makespan if incumbent else float("inf")
    if shared is not None and shared.makespan < ub:
        ub = shared.makespan
    improved = False

    root = tuple(root)
    root_front = front_of(inst, root)
    root_rem = tuple(j for j in range(n) if j not in set(root))
    root_bound = lower_bound(inst, root_front, root_rem, bound)
    # stack entries: (bound, prefix, front, remaining)
    stack = [(root_bound, root, root_front, root_rem)]
    complete = True

    while stack:
        node_bound, prefix, front, rem = stack.pop()
        if shared is not None and shared.makespan < ub:
            ub = shared.makespan
        if node_bound >= ub:
            stats.nodes_pruned += 1
            if pruned_log is not None:
                pruned_log.append(prefix)
            continue
        if budget is not None and stats.nodes_expanded >= budget:
            complete = False
            break
        stats.nodes_expanded += 1
        if not rem:
            ub, best_perm, improved = front[-1], prefix, True
            stats.incumbent_updates += 1
            if shared is not None:
                shared.offer(ub, prefix)
            continue

        loads = [0] * m
        for r in rem:
            row = p[r]
            for k in range(m):
                loads[k] += row[k]
        if len(rem) > 1:
            # smallest and second-smallest tail per machine
            lo1 = [None] * m
            lo2 = [None] * m
            arg = [None] * m
            for r in rem:
                tr = tails[r]
                for k in range(m):
                    t = tr[k]
                    if lo1[k] is None or t < lo1[k]:
                        lo2[k], lo1[k], arg[k] = lo1[k], t, r
                    elif lo2[k] is None or t < lo2[k]:
                        lo2[k] = t

        kids = []
        for job in rem:
            row = p[job]
            child_front = [0] * m
            prev = 0
            for k in range(m):
                c = front[k] if front[k] > prev else prev
                prev = c + row[k]
                child_front[k] = prev
            child_rem = tuple(r for r in rem if r != job)
            if not child_rem:
                b = prev
            else:
                b = 0
                for k in range(m):
                    v = child_front[k] + loads[k] - row[k] + (lo2[k] if arg[k] == job else lo1[k])
                    if v > b:
                        b = v
                if johnson:
                    b = max(b, lower_bound(inst, child_front, child_rem, "johnson"))
            kids.append((b, job, tuple(child_front), child_rem))
        kids.sort()
        for b, job, child_front, child_rem in reversed(kids):
            stack.append((b, prefix + (job,), child_front, child_rem))

    stats.elapsed = time.perf_counter() - started
    makespan_value = ub if ub != float("inf") else None
    return SearchResult(best_perm, makespan_value, stats, complete, improved)


def brute_force(inst: Instance, max_jobs: int = 9) -> tuple[tuple[int, ...], int]:
    """Exhaustive minimum; ties go to the lexicographically smallest order."""
    if inst.n > max_jobs:
        raise CapacityError(f"brute force limited to n <= {max_jobs}, got n={inst.n}")
    best_perm, best = None, None
    for perm in itertools.permutations(range(inst.n)):
        value = front_of(inst, perm)[-1]
        if best is None or value < best:
            best_perm, best = perm, value
    return best_perm, best
