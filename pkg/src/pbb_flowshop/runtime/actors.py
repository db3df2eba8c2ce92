"""Supervisor, master and worker state machines.

Each actor exposes ``step(event, now)`` which consumes one delivered
:class:`Message` or fired :class:`Timer` and returns the messages and
timers it emits. Runtimes only move those effects around, so the
simulated and threaded runtimes share every protocol decision.

Actor ids: the supervisor is 0, masters are 1..M, workers follow.
"""

from __future__ import annotations

import bisect
import math
import random
import threading
from dataclasses import dataclass, replace
from typing import Optional, Sequence

from .. import balance
from ..core import FlowshopError, Instance
from ..tree import Incumbent, IncumbentCell, decode_id, floor_offset, id_count, solve_sequential
from .messages import Kind, Message, ProtocolError, max_batch

SUPERVISOR = 0
ONE_IN_ONE = "1in1"
MULTI_IN_ONE = "min1"
TRANSFERS = (ONE_IN_ONE, MULTI_IN_ONE)
INF = float("inf")


@dataclass(frozen=True)
class Timer:
    delay: int
    tag: str


class Budget:
    """Global node budget shared by the workers of one run."""

    def __init__(self, limit: Optional[int] = None):
        self.limit = limit
        self.used = 0
        self._lock = threading.Lock()

    @property
    def remaining(self) -> Optional[int]:
        return None if self.limit is None else max(0, self.limit - self.used)

    @property
    def exhausted(self) -> bool:
        return self.limit is not None and self.used >= self.limit

    def charge(self, nodes: int) -> None:
        with self._lock:
            self.used += nodes


class Worker:
    def __init__(self, actor_id: int, master: int, inst: Instance, speed: float = 1.0,
                 refresh_interval: int = 10, bound: str = "machine",
                 budget: Optional[Budget] = None, shared: Optional[IncumbentCell] = None):
        if speed <= 0:
            raise ValueError("speed factor must be positive")
        self.id = actor_id
        self.master = master
        self.inst = inst
        self.speed = speed
        self.refresh_interval = refresh_interval
        self.bound = bound
        self.budget = budget or Budget()
        self.shared = shared
        self.incumbent = INF
        self.found: Optional[tuple[int, tuple[int, ...]]] = None
        self.current = None
        self.executed: list[int] = []
        self.nodes = 0
        self.history: list[int] = []
        self.terminated = False

    @property
    def busy(self) -> bool:
        return self.current is not None

    def _to_master(self, kind: Kind, payload=()) -> Message:
        return Message(kind, self.id, self.master, tuple(payload))

    def adopt(self, value) -> None:
        if value < self.incumbent:
            self.incumbent = value
            self.history.append(value)

    def step(self, event, now) -> list:
        if self.terminated:
            return []
        if isinstance(event, Timer):
            if event.tag == "start":
                return [self._to_master(Kind.ASK_FOR_TASKS), Timer(self.refresh_interval, "refresh")]
            if event.tag == "refresh":
                return [self._to_master(Kind.UPDATE_SOLUTION_REQUEST),
                        Timer(self.refresh_interval, "refresh")]
            if event.tag == "done":
                return self._finish()
            raise ProtocolError(f"worker {self.id}: unknown timer {event.tag!r}")

        if event.kind is Kind.TASK_GRANT:
            return self._start(event.ids[0])
        if event.kind is Kind.BEST_SOLUTION:
            self.adopt(event.payload[0])
            return []
        if event.kind is Kind.NO_TASKS:
            return []
        if event.kind is Kind.TERMINATE:
            self.terminated = True
            return []
        raise ProtocolError(f"worker {self.id} cannot handle {event.kind.name}")

    def _start(self, node_id: int) -> list:
        if self.current is not None:
            raise ProtocolError(f"worker {self.id} granted {node_id} while busy with {self.current[0]}")
        try:
            prefix = decode_id(self.inst.n, node_id)
        except FlowshopError as exc:
            raise ProtocolError(f"worker {self.id}: {exc}") from None
        incumbent = Incumbent(self.incumbent) if self.incumbent < INF else None
        result = solve_sequential(self.inst, incumbent, budget=self.budget.remaining,
                                  root=prefix, bound=self.bound, shared=self.shared)
        expanded = result.stats.nodes_expanded
        self.budget.charge(expanded)
        self.nodes += expanded
        duration = math.ceil(max(1, expanded) / self.speed)
        self.current = (node_id, duration, result)
        return [Timer(duration, "done")]

    def _finish(self) -> list:
        node_id, duration, result = self.current
        self.current = None
        self.executed.append(node_id)
        out = []
        if result.improved:
            value = result.makespan
            if self.found is None or value < self.found[0]:
                self.found = (value, tuple(result.permutation))
            if value < self.incumbent:
                self.adopt(value)
                out.append(self._to_master(Kind.BEST_SOLUTION, (value,)))
        out.append(self._to_master(Kind.ASK_FOR_TASKS, (duration,)))
        return out


UNASSIGNED, ASSIGNED, DONE = "unassigned", "assigned", "done"


class Master:
    def __init__(self, actor_id: int, workers: Sequence[int], particles: Sequence[int],
                 n: int, transfer: str = MULTI_IN_ONE, width: int = 8):
        if transfer not in TRANSFERS:
            raise ValueError(f"unknown transfer scheme {transfer!r}")
        self.id = actor_id
        self.workers = tuple(workers)
        self.n = n
        self.transfer = transfer
        self.width = width
        self._id_limit = id_count(n)
        self._offsets = [floor_offset(n, k) for k in range(n)]
        self.pending: list[int] = []
        self.ledger: dict[int, str] = {}
        self.assigned: dict[int, int] = {}
        self.done_by: dict[int, int] = {}
        self.idle: list[int] = []
        self.local_best = INF
        self.history: list[int] = []
        self.completed = 0
        self.total_exec = 0
        self.received = 0
        self.surrendered = 0
        self.terminated = False
        self._receive(particles)

    def floor(self, node_id: int) -> int:
        return bisect.bisect_right(self._offsets, node_id) - 1

    def audit(self) -> dict[str, int]:
        counts = {UNASSIGNED: 0, ASSIGNED: 0, DONE: 0}
        for state in self.ledger.values():
            counts[state] += 1
        counts["received"] = self.received
        counts["surrendered"] = self.surrendered
        return counts

    def load_report(self) -> Message:
        return Message(Kind.LOAD_REPORT, self.id, SUPERVISOR,
                       (len(self.pending), self.completed, self.total_exec))

    def _receive(self, ids) -> None:
        for node_id in ids:
            if not 0 <= node_id < self._id_limit:
                raise ProtocolError(f"master {self.id}: particle id {node_id} out of range")
            if node_id in self.ledger:
                raise ProtocolError(f"master {self.id}: particle {node_id} already held ({self.ledger[node_id]})")
            self.ledger[node_id] = UNASSIGNED
            bisect.insort(self.pending, node_id)
            self.received += 1

    def _grant(self, worker: int) -> list:
        if self.pending:
            node_id = self.pending.pop(0)
            self.ledger[node_id] = ASSIGNED
            self.assigned[worker] = node_id
            return [Message(Kind.TASK_GRANT, self.id, worker, (node_id,))]
        bisect.insort(self.idle, worker)
        return [Message(Kind.NO_TASKS, self.id, worker), self.load_report()]

    def _surrender(self, count: int) -> list:
        if count <= 0 or not self.pending:
            return []
        if self.transfer == ONE_IN_ONE:
            # one shallow (heavy) particle
            chosen = [min(self.pending, key=lambda i: (self.floor(i), -i))]
        else:
            # the deepest (cheapest) particles, as many as requested
            ranked = sorted(self.pending, key=lambda i: (-self.floor(i), -i))
            chosen = ranked[:count]
        for node_id in chosen:
            self.pending.remove(node_id)
            del self.ledger[node_id]
            self.surrendered += 1
        if self.transfer == ONE_IN_ONE:
            return [Message(Kind.REALLOCATE_SINGLE, self.id, SUPERVISOR, (chosen[0],))]
        size = max_batch(self.width)
        return [Message.batch(self.id, SUPERVISOR, chosen[i:i + size])
                for i in range(0, len(chosen), size)]

    def step(self, event, now) -> list:
        if self.terminated:
            return []
        if isinstance(event, Timer):
            return []
        kind, src = event.kind, event.src

        if kind is Kind.ASK_FOR_TASKS:
            if src not in self.workers:
                raise ProtocolError(f"master {self.id}: task request from foreign actor {src}")
            if event.payload:
                if src not in self.assigned:
                    raise ProtocolError(f"master {self.id}: worker {src} reports a particle it was never granted")
                node_id = self.assigned.pop(src)
                self.ledger[node_id] = DONE
                self.done_by[node_id] = src
                self.completed += 1
                self.total_exec += event.payload[0]
            elif src in self.assigned:
                raise ProtocolError(f"master {self.id}: worker {src} asks for work while holding {self.assigned[src]}")
            return self._grant(src)

        if kind is Kind.UPDATE_SOLUTION_REQUEST:
            out = []
            if self.local_best < INF:
                out.append(Message(Kind.BEST_SOLUTION, self.id, src, (self.local_best,)))
            if src == SUPERVISOR:
                out.extend(self._surrender(event.payload[0] if event.payload else 0))
                out.append(self.load_report())
            return out

        if kind is Kind.BEST_SOLUTION:
            value = event.payload[0]
            if value < self.local_best:
                self.local_best = value
                self.history.append(value)
                if src != SUPERVISOR:
                    return [Message(Kind.BEST_SOLUTION, self.id, SUPERVISOR, (value,))]
            return []

        if kind in (Kind.TASK_GRANT, Kind.REALLOCATE_SINGLE, Kind.REALLOCATE_BATCH):
            if src != SUPERVISOR:
                raise ProtocolError(f"master {self.id}: particles from non-supervisor {src}")
            self._receive(event.ids)
            out = []
            while self.idle and self.pending:
                out.extend(self._grant(self.idle.pop(0)))
            return out

        if kind is Kind.TERMINATE:
            self.terminated = True
            return [Message(Kind.TERMINATE, self.id, w) for w in self.workers]

        raise ProtocolError(f"master {self.id} cannot handle {kind.name}")


class Supervisor:
    """Coordinates masters: relays best solutions and rebalances particles.

    Every ``sync_interval`` the supervisor polls each master. The poll tells
    an overloaded master how many particles to give back: a master is
    overloaded when its pending load exceeds ``overload_factor`` times the
    mean pending load, and its surplus is the excess over the mean. With two
    masters and the default factor of 2 this can never trigger. Returned
    particles go to the least loaded master (``acwn``), a random one
    (``rand``) or the one furthest below its proportional quota (``pfs``).
    """

    def __init__(self, masters: dict[int, int], initial: dict[int, int], total_particles: int,
                 strategy: str = "pfs", transfer: str = MULTI_IN_ONE, sync_interval: int = 50,
                 pfs_weight: str = "time", overload_factor: float = 2.0,
                 seed: Optional[int] = 0, width: int = 8):
        if strategy not in balance.STRATEGIES:
            raise ValueError(f"unknown strategy {strategy!r}")
        if transfer not in TRANSFERS:
            raise ValueError(f"unknown transfer scheme {transfer!r}")
        self.id = SUPERVISOR
        self.strategy = strategy
        self.transfer = transfer
        self.sync_interval = sync_interval
        self.pfs_weight = pfs_weight
        self.overload_factor = overload_factor
        self.rng = random.Random(seed)
        self.width = width
        self.total = total_particles
        self.stats = {mid: balance.MasterStats(mid, workers, pending_load=initial.get(mid, 0))
                      for mid, workers in sorted(masters.items())}
        self.best = INF
        self.history: list[int] = []
        self.rebalance_log: list[tuple[int, int, int]] = []  # (time, master, requested)
        self.terminated = False

    @property
    def master_ids(self) -> list[int]:
        return list(self.stats)

    def _set_pending(self, mid: int, value: int) -> None:
        self.stats[mid] = replace(self.stats[mid], pending_load=max(0, value))

    def surrender_requests(self) -> dict[int, int]:
        """Particles each master must give back at this tick."""
        requests = {mid: 0 for mid in self.stats}
        if self.strategy == "sld" or len(self.stats) < 2:
            return requests
        loads = {mid: s.pending_load for mid, s in self.stats.items()}
        mean = sum(loads.values()) / len(loads)
        for mid, load in loads.items():
            if load > self.overload_factor * mean:
                surplus = load - math.ceil(mean)
                if surplus >= 1:
                    requests[mid] = 1 if self.transfer == ONE_IN_ONE else surplus
        return requests

    def _all_done(self) -> bool:
        return sum(s.completed for s in self.stats.values()) >= self.total

    def _terminate(self) -> list:
        self.terminated = True
        return [Message(Kind.TERMINATE, self.id, mid) for mid in self.stats]

    def step(self, event, now) -> list:
        if self.terminated:
            return []
        if isinstance(event, Timer):
            if event.tag == "start":
                return [Timer(self.sync_interval, "tick")]
            if event.tag != "tick":
                raise ProtocolError(f"supervisor: unknown timer {event.tag!r}")
            if self._all_done():
                return self._terminate()
            out = []
            for mid, count in self.surrender_requests().items():
                if count:
                    self.rebalance_log.append((now, mid, count))
                    self._set_pending(mid, self.stats[mid].pending_load - count)
                out.append(Message(Kind.UPDATE_SOLUTION_REQUEST, self.id, mid, (count,)))
            out.append(Timer(self.sync_interval, "tick"))
            return out

        kind, src = event.kind, event.src
        if src not in self.stats:
            raise ProtocolError(f"supervisor: message from unknown master {src}")

        if kind is Kind.LOAD_REPORT:
            pending, completed, total_exec = event.payload
            self.stats[src] = replace(self.stats[src], pending_load=pending,
                                              completed=completed, total_exec_time=total_exec)
            if self._all_done():
                return self._terminate()
            return []

        if kind is Kind.BEST_SOLUTION:
            value = event.payload[0]
            if value < self.best:
                self.best = value
                self.history.append(value)
                return [Message(Kind.BEST_SOLUTION, self.id, mid, (value,))
                        for mid in self.stats if mid != src]
            return []

        if kind in (Kind.REALLOCATE_SINGLE, Kind.REALLOCATE_BATCH):
            if self.strategy == "sld":
                raise ProtocolError("static distribution never reallocates")
            return self._reallocate(src, event.ids)

        raise ProtocolError(f"supervisor cannot handle {kind.name}")

    def _reallocate(self, donor: int, ids: Sequence[int]) -> list:
        others = [mid for mid in self.stats if mid != donor] or [donor]
        targets: dict[int, list[int]] = {}
        if self.strategy == "pfs":
            stats = list(self.stats.values())
            total = sum(s.pending_load for s in stats) + len(ids)
            plan = balance.pfs_allocate(total, stats, self.pfs_weight)
            quota = {s.master_id: c - s.pending_load for s, c in zip(stats, plan.counts)}
        for node_id in ids:
            if self.strategy == "acwn":
                mid = balance.acwn_select([self.stats[o] for o in others])
            elif self.strategy == "rand":
                mid = balance.rand_select([self.stats[o] for o in others], self.rng)
            else:
                mid = max(others, key=lambda o: (quota[o], -o))
                quota[mid] -= 1
            self._set_pending(mid, self.stats[mid].pending_load + 1)
            targets.setdefault(mid, []).append(node_id)
        out = []
        for mid, chunk in targets.items():
            if self.transfer == ONE_IN_ONE:
                out.extend(Message(Kind.REALLOCATE_SINGLE, self.id, mid, (i,)) for i in chunk)
            else:
                size = max_batch(self.width)
                out.extend(Message.batch(self.id, mid, chunk[i:i + size])
                           for i in range(0, len(chunk), size))
        return out
