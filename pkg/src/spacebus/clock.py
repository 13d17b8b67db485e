"""Clocks and the deterministic event scheduler.

Everything time-related in the package runs against a ``Clock`` so the same
components work in two modes: real time (``SystemClock``) for live services
and benchmarks, and virtual time (``VirtualClock`` + ``Scheduler``) for the
deterministic scenario harness.
"""

from __future__ import annotations

import heapq
import itertools
import time
from typing import Callable, Protocol

MS = 1_000_000  # nanoseconds per millisecond

TICK_NS = 1 * MS  # scheduler resolution: timers quantize to 1 ms


class Clock(Protocol):
    def now_ns(self) -> int: ...


class SystemClock:
    """Monotonic wall clock."""

    def now_ns(self) -> int:
        return time.monotonic_ns()


class VirtualClock:
    """Manually advanced clock starting at t=0."""

    def __init__(self, start_ns: int = 0):
        self._now = start_ns

    def now_ns(self) -> int:
        return self._now

    def advance_to(self, t_ns: int) -> None:
        if t_ns < self._now:
            raise ValueError(f"clock cannot go backwards: {t_ns} < {self._now}")
        self._now = t_ns


class Scheduler:
    """Deterministic timer queue over a ``VirtualClock``.

    Callbacks fire in (time, schedule-order) order. Scheduled times are
    quantized up to the 1 ms tick grid, so two timers requested inside the
    same millisecond run in the order they were scheduled.
    """

    def __init__(self, clock: VirtualClock):
        self.clock = clock
        self._heap: list[tuple[int, int, Callable[[], None]]] = []
        self._seq = itertools.count()
        self._cancelled: set[int] = set()

    def schedule(self, at_ns: int, fn: Callable[[], None]) -> int:
        """Schedule ``fn`` at ``at_ns`` (quantized up to the tick grid)."""
        at_ns = max(at_ns, self.clock.now_ns())
        at_ns = ((at_ns + TICK_NS - 1) // TICK_NS) * TICK_NS
        handle = next(self._seq)
        heapq.heappush(self._heap, (at_ns, handle, fn))
        return handle

    def schedule_in(self, delay_ns: int, fn: Callable[[], None]) -> int:
        return self.schedule(self.clock.now_ns() + delay_ns, fn)

    def cancel(self, handle: int) -> None:
        self._cancelled.add(handle)

    def pending(self) -> int:
        return len(self._heap)

    def run_until(self, t_ns: int) -> int:
        """Run every timer due at or before ``t_ns``; returns count fired."""
        fired = 0
        while self._heap and self._heap[0][0] <= t_ns:
            at, handle, fn = heapq.heappop(self._heap)
            if handle in self._cancelled:
                self._cancelled.discard(handle)
                continue
            if at > self.clock.now_ns():
                self.clock.advance_to(at)
            fn()
            fired += 1
        if t_ns > self.clock.now_ns():
            self.clock.advance_to(t_ns)
        return fired

    def run_all(self, limit: int = 1_000_000) -> int:
        """Drain the queue completely (new timers included), up to ``limit``."""
        fired = 0
        while self._heap and fired < limit:
            at, handle, fn = heapq.heappop(self._heap)
            if handle in self._cancelled:
                self._cancelled.discard(handle)
                continue
            if at > self.clock.now_ns():
                self.clock.advance_to(at)
            fn()
            fired += 1
        if self._heap:
            raise RuntimeError(f"scheduler did not quiesce within {limit} events")
        return fired
