"""Deterministic discrete-event execution of the hierarchical runtime."""

from __future__ import annotations

import heapq
from dataclasses import dataclass
from typing import Optional, Sequence

from .. import balance
from ..core import Instance
from ..tree import IncumbentCell, split_frontier
from .actors import (MULTI_IN_ONE, SUPERVISOR, TRANSFERS, Budget, Master, Supervisor, Timer,
                     Worker)
from .messages import HEADER_BYTES, Kind, Message, ProtocolError, id_width, transfer_cost


@dataclass(frozen=True)
class Topology:
    workers_per_master: tuple[int, ...]
    sync_interval: int = 50

    def __post_init__(self):
        object.__setattr__(self, "workers_per_master", tuple(self.workers_per_master))
        if not self.workers_per_master:
            raise ValueError("topology needs at least one master")
        if any(w < 1 for w in self.workers_per_master):
            raise ValueError("every master needs at least one worker")
        if self.sync_interval < 1:
            raise ValueError("sync_interval must be positive")

    @classmethod
    def uniform(cls, n_masters: int, workers: int, sync_interval: int = 50) -> "Topology":
        return cls((workers,) * n_masters, sync_interval)

    @classmethod
    def parse(cls, text: str, sync_interval: int = 50) -> "Topology":
        """``"M:w1,w2,..."``; a single worker count is repeated for every master."""
        head, _, tail = text.partition(":")
        n_masters = int(head)
        counts = [int(v) for v in tail.split(",")] if tail else [1]
        if len(counts) == 1:
            counts = counts * n_masters
        if len(counts) != n_masters:
            raise ValueError(f"topology {text!r}: {n_masters} masters but {len(counts)} worker counts")
        return cls(tuple(counts), sync_interval)

    @property
    def n_masters(self) -> int:
        return len(self.workers_per_master)

    @property
    def n_workers(self) -> int:
        return sum(self.workers_per_master)

    def master_ids(self) -> list[int]:
        return list(range(1, self.n_masters + 1))

    def worker_ids(self) -> dict[int, list[int]]:
        out, nxt = {}, self.n_masters + 1
        for mid, count in zip(self.master_ids(), self.workers_per_master):
            out[mid] = list(range(nxt, nxt + count))
            nxt += count
        return out


@dataclass(frozen=True)
class HeterogeneityModel:
    """Per-master worker speed factors (execution-time divisors) and link latency.

    ``factors`` are applied to masters cyclically: every worker of master i
    runs at ``factors[i % len(factors)]``.
    """

    factors: tuple[float, ...] = (1.0,)
    latency: int = 1
    link_latency: tuple[tuple[int, int, int], ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "factors", tuple(float(f) for f in self.factors))
        if not self.factors or any(f <= 0 for f in self.factors):
            raise ValueError("speed factors must be positive")
        if self.latency < 0 or any(lat < 0 for _, _, lat in self.link_latency):
            raise ValueError("latencies must be non-negative")

    @classmethod
    def homogeneous(cls, latency: int = 1) -> "HeterogeneityModel":
        return cls((1.0,), latency)

    @classmethod
    def mixed(cls, factors: Sequence[float], latency: int = 1) -> "HeterogeneityModel":
        return cls(tuple(factors), latency)

    @classmethod
    def parse(cls, text: str, latency: int = 1) -> "HeterogeneityModel":
        """``homogeneous`` or ``mixed:f1,f2,...``."""
        if text == "homogeneous":
            return cls.homogeneous(latency)
        kind, _, tail = text.partition(":")
        if kind != "mixed" or not tail:
            raise ValueError(f"heterogeneity preset {text!r}: expected homogeneous or mixed:f1,f2,...")
        return cls.mixed([float(v) for v in tail.split(",")], latency)

    def speed(self, master_index: int) -> float:
        return self.factors[master_index % len(self.factors)]

    def delay(self, src: int, dst: int) -> int:
        for a, b, lat in self.link_latency:
            if {a, b} == {src, dst}:
                return lat
        return self.latency


@dataclass(frozen=True)
class TraceRecord:
    time: int
    kind: Kind
    src: int
    dst: int
    bytes: int
    payload: tuple[int, ...]

    def line(self) -> str:
        return f"{self.time}\t{self.kind.name}\t{self.src}\t{self.dst}\t{self.bytes}"


@dataclass
class RunMetrics:
    completion_time: float
    makespan: Optional[int]
    permutation: Optional[tuple[int, ...]]
    nodes_expanded: int
    particles: int
    per_master_particles: dict[int, int]
    per_master_busy: dict[int, int]
    messages_by_kind: dict[str, int]
    bytes_by_kind: dict[str, int]
    complete: bool
    rebalances: int = 0
    trace: Optional[list[TraceRecord]] = None

    @property
    def messages(self) -> int:
        return sum(self.messages_by_kind.values())

    @property
    def bytes(self) -> int:
        return sum(self.bytes_by_kind.values())


@dataclass
class RunConfig:
    strategy: str = "pfs"
    transfer: str = MULTI_IN_ONE
    k_split: int = 1
    pfs_weight: str = "time"
    overload_factor: float = 2.0
    refresh_interval: int = 10
    bound: str = "machine"
    seed: int = 0
    budget: Optional[int] = None
    trace: bool = False

    def __post_init__(self):
        if self.strategy not in balance.STRATEGIES:
            raise ValueError(f"unknown strategy {self.strategy!r}; choose from {balance.STRATEGIES}")
        if self.transfer not in TRANSFERS:
            raise ValueError(f"unknown transfer {self.transfer!r}; choose from {TRANSFERS}")


def initial_split(particles: Sequence[int], topology: Topology, strategy: str) -> dict[int, list[int]]:
    """Contiguous blocks of ascending particle ids, one per master."""
    if strategy == "pfs":
        stats = [balance.MasterStats(mid, w)
                 for mid, w in zip(topology.master_ids(), topology.workers_per_master)]
        counts = balance.pfs_allocate(len(particles), stats).counts
    else:
        counts = balance.sld_partition(len(particles), topology.n_masters).counts
    out, start = {}, 0
    for mid, count in zip(topology.master_ids(), counts):
        out[mid] = list(particles[start:start + count])
        start += count
    return out


@dataclass
class Actors:
    supervisor: Supervisor
    masters: dict[int, Master]
    workers: dict[int, Worker]
    particles: list[int]
    budget: Budget
    width: int


def build_actors(inst: Instance, topology: Topology, config: RunConfig,
                 het: HeterogeneityModel, shared: Optional[IncumbentCell] = None) -> Actors:
    width = id_width(inst.n)
    budget = Budget(config.budget)
    particles = split_frontier(inst, config.k_split)
    split = initial_split(particles, topology, config.strategy)
    workers = topology.worker_ids()
    supervisor = Supervisor(
        dict(zip(topology.master_ids(), topology.workers_per_master)),
        {mid: len(ids) for mid, ids in split.items()}, len(particles),
        strategy=config.strategy, transfer=config.transfer,
        sync_interval=topology.sync_interval, pfs_weight=config.pfs_weight,
        overload_factor=config.overload_factor, seed=config.seed, width=width)
    masters = {mid: Master(mid, workers[mid], split[mid], inst.n, config.transfer, width)
               for mid in topology.master_ids()}
    worker_actors = {}
    for index, mid in enumerate(topology.master_ids()):
        for wid in workers[mid]:
            worker_actors[wid] = Worker(wid, mid, inst, het.speed(index), config.refresh_interval,
                                        config.bound, budget, shared)
    return Actors(supervisor, masters, worker_actors, particles, budget, width)


class Simulation:
    """One run of the supervisor/master/worker hierarchy on a virtual clock.

    Events are ordered by ``(time, sequence)`` so a run is fully
    determined by its inputs.
    """

    def __init__(self, inst: Instance, topology: Topology, config: RunConfig,
                 het: Optional[HeterogeneityModel] = None):
        self.inst = inst
        self.topology = topology
        self.config = config
        self.het = het or HeterogeneityModel.homogeneous()
        built = build_actors(inst, topology, config, self.het)
        self.width = built.width
        self.budget = built.budget
        self.particles = built.particles
        self.supervisor = built.supervisor
        self.masters = built.masters
        self.workers = built.workers
        self.actors = {SUPERVISOR: self.supervisor, **self.masters, **self.workers}

        self.now = 0
        self._queue: list = []
        self._seq = 0
        self.messages_by_kind: dict[str, int] = {}
        self.bytes_by_kind: dict[str, int] = {}
        self.trace: Optional[list[TraceRecord]] = [] if config.trace else None
        self.last_completion = 0
        self._last_progress = 0

    def _push(self, time: int, dst: int, event) -> None:
        heapq.heappush(self._queue, (time, self._seq, dst, event))
        self._seq += 1

    def _emit(self, actor_id: int, effects) -> None:
        for effect in effects:
            if isinstance(effect, Timer):
                self._push(self.now + effect.delay, actor_id, effect)
                continue
            size = transfer_cost(effect, self.width, HEADER_BYTES)
            name = effect.kind.name
            self.messages_by_kind[name] = self.messages_by_kind.get(name, 0) + 1
            self.bytes_by_kind[name] = self.bytes_by_kind.get(name, 0) + size
            if self.trace is not None:
                self.trace.append(TraceRecord(self.now, effect.kind, effect.src, effect.dst,
                                              size, effect.payload))
            self._push(self.now + self.het.delay(effect.src, effect.dst), effect.dst, effect)

    def _stall_window(self) -> int:
        return 20 * (self.topology.sync_interval + 4 * self.het.latency) + 100

    def run(self) -> RunMetrics:
        self._push(0, SUPERVISOR, Timer(0, "start"))
        for wid in self.workers:
            self._push(0, wid, Timer(0, "start"))
        complete = True
        while self._queue:
            time, _, dst, event = heapq.heappop(self._queue)
            self.now = time
            if isinstance(event, Timer) and event.tag == "done":
                self.last_completion = time
                self._last_progress = time
            elif isinstance(event, Message) and event.kind is Kind.TASK_GRANT:
                self._last_progress = time
            self._emit(dst, self.actors[dst].step(event, time))
            if self.budget.exhausted:
                complete = False
                break
            if (not self.supervisor.terminated
                    and time - self._last_progress > self._stall_window()
                    and not any(w.busy for w in self.workers.values())):
                raise ProtocolError(f"deadlock at t={time}: no worker busy, "
                                    f"{self._outstanding()} particles outstanding")
        if complete and self._outstanding():
            raise ProtocolError(f"event queue drained with {self._outstanding()} particles outstanding")
        return self.metrics(complete)

    def _outstanding(self) -> int:
        return len(self.particles) - sum(m.completed for m in self.masters.values())

    def best(self) -> tuple[Optional[int], Optional[tuple[int, ...]]]:
        found = [w.found for w in self.workers.values() if w.found is not None]
        if not found:
            return None, None
        value, perm = min(found)
        return value, perm

    def metrics(self, complete: bool = True) -> RunMetrics:
        value, perm = self.best()
        return RunMetrics(
            completion_time=self.last_completion,
            makespan=value,
            permutation=perm,
            nodes_expanded=sum(w.nodes for w in self.workers.values()),
            particles=len(self.particles),
            per_master_particles={mid: m.completed for mid, m in self.masters.items()},
            per_master_busy={mid: m.total_exec for mid, m in self.masters.items()},
            messages_by_kind=dict(sorted(self.messages_by_kind.items())),
            bytes_by_kind=dict(sorted(self.bytes_by_kind.items())),
            complete=complete,
            rebalances=len(self.supervisor.rebalance_log),
            trace=self.trace,
        )


def run_experiment(inst: Instance, topology: Topology, strategy: str = "pfs",
                   transfer: str = MULTI_IN_ONE, k_split: int = 1,
                   het: Optional[HeterogeneityModel] = None, mode: str = "sim",
                   budget: Optional[int] = None, **options) -> RunMetrics:
    """Solve ``inst`` on the hierarchical runtime and report what it cost.

    ``options`` are forwarded to :class:`RunConfig` (``pfs_weight``,
    ``overload_factor``, ``refresh_interval``, ``bound``, ``seed``,
    ``trace``) and, in thread mode, to the thread runtime.
    """
    thread_options = {k: options.pop(k) for k in ("time_unit", "timeout", "share_incumbent")
                      if k in options}
    config = RunConfig(strategy=strategy, transfer=transfer, k_split=k_split, budget=budget, **options)
    if mode == "sim":
        return Simulation(inst, topology, config, het).run()
    if mode == "threads":
        from .threads import ThreadedRun
        return ThreadedRun(inst, topology, config, het, **thread_options).run()
    raise ValueError(f"unknown mode {mode!r}; choose sim or threads")
