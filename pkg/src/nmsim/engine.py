"""Deterministic discrete-event kernel.

Time is an integer count of picoseconds.  Handshake transitions live at
O(100 ps) and neuron dynamics at O(ms); integer time keeps tie-breaking exact
across both scales.  Events at equal time are dispatched in insertion order.
"""

from __future__ import annotations

import hashlib
import heapq
from dataclasses import dataclass, field
from typing import Any, Callable, Hashable

PS_PER_S = 10**12


def seconds_to_ps(t: float) -> int:
    return int(round(t * PS_PER_S))


def ps_to_seconds(t: int) -> float:
    return t / PS_PER_S


class SchedulingError(ValueError):
    """Raised when an event is scheduled before the current simulation time."""


@dataclass(eq=False)
class EventHandle:
    time: int
    seq: int
    target: Hashable
    payload: Any
    cancelled: bool = False

    def cancel(self) -> None:
        self.cancelled = True


@dataclass
class SimClock:
    now: int = 0
    rng_seed: int = 0


class EventQueue:
    """Priority queue ordered by (time, insertion sequence)."""

    def __init__(self) -> None:
        self._heap: list[tuple[int, int, EventHandle]] = []
        self._seq = 0

    def __len__(self) -> int:
        return len(self._heap)

    def push(self, time: int, target: Hashable, payload: Any) -> EventHandle:
        handle = EventHandle(time, self._seq, target, payload)
        heapq.heappush(self._heap, (time, self._seq, handle))
        self._seq += 1
        return handle

    def peek_time(self) -> int | None:
        while self._heap and self._heap[0][2].cancelled:
            heapq.heappop(self._heap)
        return self._heap[0][0] if self._heap else None

    def pop(self) -> EventHandle:
        while True:
            _, _, handle = heapq.heappop(self._heap)
            if not handle.cancelled:
                return handle


Handler = Callable[[EventHandle], None]


class Simulator:
    """Single global event queue plus a registry of node handlers.

    Handlers are registered per node id and receive the dequeued
    :class:`EventHandle`.  With ``trace=True`` every dispatched event is folded
    into a SHA-256 digest (``trace_hash``) and, optionally, kept in ``trace``.
    """

    def __init__(self, seed: int = 0, trace: bool = False, keep_trace: bool = False):
        self.clock = SimClock(now=0, rng_seed=seed)
        self.queue = EventQueue()
        self.handlers: dict[Hashable, Handler] = {}
        self.processed = 0
        self._tracing = trace or keep_trace
        self._hash = hashlib.sha256()
        self.trace: list[tuple[int, Hashable, str]] | None = [] if keep_trace else None

    @property
    def now(self) -> int:
        return self.clock.now

    def register(self, node: Hashable, handler: Handler) -> None:
        if node in self.handlers:
            raise ValueError(f"node {node!r} already registered")
        self.handlers[node] = handler

    def schedule(self, time: int, target: Hashable, payload: Any = None) -> EventHandle:
        if time < self.clock.now:
            raise SchedulingError(
                f"cannot schedule at t={time} ps: clock is at t={self.clock.now} ps"
            )
        return self.queue.push(int(time), target, payload)

    def schedule_in(self, delay: int, target: Hashable, payload: Any = None) -> EventHandle:
        return self.schedule(self.clock.now + delay, target, payload)

    def _dispatch(self, ev: EventHandle) -> None:
        self.clock.now = ev.time
        self.processed += 1
        if self._tracing:
            line = f"{ev.time}|{ev.target!r}|{ev.payload!r}"
            self._hash.update(line.encode())
            self._hash.update(b"\n")
            if self.trace is not None:
                self.trace.append((ev.time, ev.target, repr(ev.payload)))
        handler = self.handlers.get(ev.target)
        if handler is None:
            raise KeyError(f"no handler registered for node {ev.target!r}")
        handler(ev)

    def step(self) -> EventHandle | None:
        """Dispatch the next pending event, or return None if the queue is empty."""
        if self.queue.peek_time() is None:
            return None
        ev = self.queue.pop()
        self._dispatch(ev)
        return ev

    def run_until(self, t_end: int) -> int:
        """Process every event with time <= t_end and return how many ran.

        Afterwards ``now`` is t_end if later events remain queued, otherwise the
        time of the last processed event.
        """
        if t_end < self.clock.now:
            raise SchedulingError(f"t_end={t_end} ps precedes clock t={self.clock.now} ps")
        count = 0
        while True:
            t = self.queue.peek_time()
            if t is None or t > t_end:
                break
            self._dispatch(self.queue.pop())
            count += 1
        if self.queue.peek_time() is not None:
            self.clock.now = t_end
        return count

    def run(self) -> int:
        """Drain the queue."""
        count = 0
        while self.step() is not None:
            count += 1
        return count

    @property
    def trace_hash(self) -> str:
        return self._hash.hexdigest()
