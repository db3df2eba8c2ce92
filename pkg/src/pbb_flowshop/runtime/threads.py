"""Run the same actors on real threads.

Every actor gets a thread and a mailbox. A scheduler thread delivers
messages after their link latency and fires timers; one virtual time unit
lasts ``time_unit`` seconds. Workers do their searches for real, then wait
out the modelled execution time before reporting, so speed factors still
apply. Reported times are wall-clock seconds.
"""

from __future__ import annotations

import heapq
import queue
import threading
import time
from typing import Optional

from ..core import Instance
from ..tree import IncumbentCell
from .actors import SUPERVISOR, Timer
from .messages import HEADER_BYTES, ProtocolError, transfer_cost
from .sim import HeterogeneityModel, RunConfig, RunMetrics, Topology, build_actors

_STOP = object()


class ThreadedRun:
    def __init__(self, inst: Instance, topology: Topology, config: RunConfig,
                 het: Optional[HeterogeneityModel] = None, time_unit: float = 1e-4,
                 timeout: float = 120.0, share_incumbent: bool = True):
        self.het = het or HeterogeneityModel.homogeneous()
        self.config = config
        self.time_unit = time_unit
        self.timeout = timeout
        self.cell = IncumbentCell() if share_incumbent else None
        built = build_actors(inst, topology, config, self.het, self.cell)
        self.built = built
        self.actors = {SUPERVISOR: built.supervisor, **built.masters, **built.workers}
        self.mailboxes = {aid: queue.Queue() for aid in self.actors}
        self._heap: list = []
        self._seq = 0
        self._cond = threading.Condition()
        self._lock = threading.Lock()
        self._stopping = False
        self.errors: list[BaseException] = []
        self.messages_by_kind: dict[str, int] = {}
        self.bytes_by_kind: dict[str, int] = {}
        self.last_completion = 0.0
        self._start = 0.0

    def _now(self) -> float:
        return (time.monotonic() - self._start) / self.time_unit

    def _schedule(self, delay_units: float, dst: int, event) -> None:
        due = time.monotonic() + delay_units * self.time_unit
        with self._cond:
            heapq.heappush(self._heap, (due, self._seq, dst, event))
            self._seq += 1
            self._cond.notify()

    def _scheduler(self) -> None:
        with self._cond:
            while not self._stopping:
                if not self._heap:
                    self._cond.wait()
                    continue
                due, _, dst, event = self._heap[0]
                wait = due - time.monotonic()
                if wait > 0:
                    self._cond.wait(wait)
                    continue
                heapq.heappop(self._heap)
                self.mailboxes[dst].put(event)

    def _emit(self, actor_id: int, effects) -> None:
        for effect in effects:
            if isinstance(effect, Timer):
                self._schedule(effect.delay, actor_id, effect)
                continue
            size = transfer_cost(effect, self.built.width, HEADER_BYTES)
            name = effect.kind.name
            with self._lock:
                self.messages_by_kind[name] = self.messages_by_kind.get(name, 0) + 1
                self.bytes_by_kind[name] = self.bytes_by_kind.get(name, 0) + size
            self._schedule(self.het.delay(effect.src, effect.dst), effect.dst, effect)

    def _actor_loop(self, actor_id: int) -> None:
        actor = self.actors[actor_id]
        box = self.mailboxes[actor_id]
        try:
            while not actor.terminated:
                event = box.get()
                if event is _STOP:
                    return
                if isinstance(event, Timer) and event.tag == "done":
                    with self._lock:
                        self.last_completion = max(self.last_completion, time.monotonic() - self._start)
                self._emit(actor_id, actor.step(event, self._now()))
                if self.built.budget.exhausted:
                    self._abort()
                    return
        except BaseException as exc:  # surfaced in run()
            self.errors.append(exc)
            self._abort()

    def _abort(self) -> None:
        for box in self.mailboxes.values():
            box.put(_STOP)

    def run(self) -> RunMetrics:
        self._start = time.monotonic()
        scheduler = threading.Thread(target=self._scheduler, name="scheduler", daemon=True)
        scheduler.start()
        threads = [threading.Thread(target=self._actor_loop, args=(aid,), name=f"actor-{aid}", daemon=True)
                   for aid in self.actors]
        for t in threads:
            t.start()
        self._schedule(0, SUPERVISOR, Timer(0, "start"))
        for wid in self.built.workers:
            self._schedule(0, wid, Timer(0, "start"))

        deadline = time.monotonic() + self.timeout
        for t in threads:
            t.join(max(0.0, deadline - time.monotonic()))
        hung = [t.name for t in threads if t.is_alive()]
        with self._cond:
            self._stopping = True
            self._cond.notify_all()
        if hung:
            self._abort()
        scheduler.join(1.0)
        if self.errors:
            raise self.errors[0]

        complete = not self.built.budget.exhausted
        if hung and complete:
            raise ProtocolError(f"run did not terminate within {self.timeout}s: {hung}")
        found = [w.found for w in self.built.workers.values() if w.found is not None]
        value, perm = min(found) if found else (None, None)
        return RunMetrics(
            completion_time=round(self.last_completion, 6),
            makespan=value,
            permutation=perm,
            nodes_expanded=sum(w.nodes for w in self.built.workers.values()),
            particles=len(self.built.particles),
            per_master_particles={mid: m.completed for mid, m in self.built.masters.items()},
            per_master_busy={mid: m.total_exec for mid, m in self.built.masters.items()},
            messages_by_kind=dict(sorted(self.messages_by_kind.items())),
            bytes_by_kind=dict(sorted(self.bytes_by_kind.items())),
            complete=complete,
            rebalances=len(self.built.supervisor.rebalance_log),
        )
