"""Deterministic discrete-event engine and the synchronization-interval timeline.

Simulation time is an integer count of microseconds; floating-point clocks
are avoided so that identically seeded runs replay byte-for-byte.
"""

from __future__ import annotations

import heapq
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Callable, Optional

SimTime = int  # microseconds

US_PER_MS = 1_000
US_PER_S = 1_000_000


class Phase(Enum):
    """Sub-phases of one synchronization interval."""

    GUARD = "guard"
    E1 = "e1"
    E2 = "e2"
    E3 = "e3"
    SCHI = "schi"


@dataclass(frozen=True, slots=True)
class SyncIntervalConfig:
    """Timing layout of one synchronization interval, all fields in microseconds.

    The control-channel interval (cchi) is partitioned into a guard slot, a
    broadcast slot (e1), a computation slot (e2) and an exchange slot (e3);
    the remainder of the interval is the service-channel interval (schi).
    """

    guard: int
    e1: int
    e2: int
    e3: int
    cchi: int
    schi: int
    si_length: int

    def __post_init__(self) -> None:
        for name in ("guard", "e1", "e2", "e3", "cchi", "schi", "si_length"):
            value = getattr(self, name)
            if not isinstance(value, int) or value <= 0:
                raise ValueError(f"si.{name} must be a positive integer, got {value!r}")
        if self.guard + self.e1 + self.e2 + self.e3 != self.cchi:
            raise ValueError(
                "si.guard + si.e1 + si.e2 + si.e3 must equal si.cchi "
                f"({self.guard} + {self.e1} + {self.e2} + {self.e3} != {self.cchi})"
            )
        if self.cchi + self.schi != self.si_length:
            raise ValueError(
                "si.cchi + si.schi must equal si.si_length "
                f"({self.cchi} + {self.schi} != {self.si_length})"
            )

    @property
    def e1_start(self) -> int:
        return self.guard

    @property
    def e2_start(self) -> int:
        return self.guard + self.e1

    @property
    def e3_start(self) -> int:
        return self.guard + self.e1 + self.e2

    @property
    def schi_start(self) -> int:
        return self.cchi


#: Named interval layouts.  "paper-literal" keeps the published sub-slot
#: lengths, which only fit a 55 ms control interval; "std-50" trims the
#: exchange slot so the control interval is the standard 50 ms.
SI_PRESETS: dict[str, SyncIntervalConfig] = {
    "paper-literal": SyncIntervalConfig(
        guard=4_000, e1=26_000, e2=5_000, e3=20_000,
        cchi=55_000, schi=45_000, si_length=100_000,
    ),
    "std-50": SyncIntervalConfig(
        guard=4_000, e1=26_000, e2=5_000, e3=15_000,
        cchi=50_000, schi=50_000, si_length=100_000,
    ),
}

DEFAULT_PRESET = "std-50"


def si_phase(t: SimTime, cfg: SyncIntervalConfig) -> Phase:
    """Classify an instant into its sub-phase via cumulative boundaries."""
    offset = t % cfg.si_length
    if offset < cfg.guard:
        return Phase.GUARD
    if offset < cfg.e2_start:
        return Phase.E1
    if offset < cfg.e3_start:
        return Phase.E2
    if offset < cfg.cchi:
        return Phase.E3
    return Phase.SCHI


def si_index(t: SimTime, cfg: SyncIntervalConfig) -> int:
    """Index of the synchronization interval containing t."""
    return t // cfg.si_length


def phase_window(index: int, phase: Phase, cfg: SyncIntervalConfig) -> tuple[int, int]:
    """Absolute [start, end) of a phase within the index-th interval."""
    base = index * cfg.si_length
    bounds = {
        Phase.GUARD: (0, cfg.guard),
        Phase.E1: (cfg.e1_start, cfg.e2_start),
        Phase.E2: (cfg.e2_start, cfg.e3_start),
        Phase.E3: (cfg.e3_start, cfg.cchi),
        Phase.SCHI: (cfg.schi_start, cfg.si_length),
    }[phase]
    return base + bounds[0], base + bounds[1]


@dataclass(order=True, slots=True)
class Event:
    """One scheduled occurrence; equal times process in insertion order."""

    time: SimTime
    sequence: int
    kind: str = field(compare=False)
    vehicle_id: Optional[int] = field(compare=False, default=None)
    channel: Optional[int] = field(compare=False, default=None)
    callback: Optional[Callable[["Engine", "Event"], None]] = field(compare=False, default=None)
    payload: Any = field(compare=False, default=None)
    cancelled: bool = field(compare=False, default=False)


class Engine:
    """Single-threaded event queue with an integer-microsecond clock.

    One instance owns all of a run's mutable state; independent runs use
    independent instances.
    """

    def __init__(self, trace: bool = False) -> None:
        self.now: SimTime = 0
        self._sequence = 0
        self._queue: list[Event] = []
        self.processed = 0
        self.tracing = trace
        self.trace_rows: list[tuple[int, str, Optional[int], Optional[int]]] = []

    def schedule(self, event: Event) -> Event:
        """Queue an event; the returned object doubles as a cancel handle."""
        if event.time < self.now:
            raise ValueError(
                f"cannot schedule event {event.kind!r} at {event.time} before current time {self.now}"
            )
        heapq.heappush(self._queue, event)
        return event

    def schedule_at(
        self,
        time: SimTime,
        kind: str,
        callback: Optional[Callable[["Engine", Event], None]] = None,
        vehicle_id: Optional[int] = None,
        channel: Optional[int] = None,
        payload: Any = None,
    ) -> Event:
        event = Event(
            time=time, sequence=self._sequence, kind=kind,
            vehicle_id=vehicle_id, channel=channel, callback=callback, payload=payload,
        )
        self._sequence += 1
        return self.schedule(event)

    def cancel(self, handle: Event) -> None:
        handle.cancelled = True

    def record(self, time: SimTime, kind: str,
               vehicle_id: Optional[int] = None, channel: Optional[int] = None) -> None:
        """Append a trace row without scheduling (for in-window occurrences)."""
        if self.tracing:
            self.trace_rows.append((time, kind, vehicle_id, channel))

    def run_until(self, t_end: SimTime) -> int:
        """Process every event with time <= t_end; the clock lands on t_end."""
        if t_end < self.now:
            raise ValueError(f"t_end {t_end} is before current time {self.now}")
        count = 0
        while self._queue and self._queue[0].time <= t_end:
            event = heapq.heappop(self._queue)
            if event.cancelled:
                continue
            self.now = event.time
            self.record(event.time, event.kind, event.vehicle_id, event.channel)
            if event.callback is not None:
                event.callback(self, event)
            count += 1
        self.now = t_end
        self.processed += count
        return count

    def sorted_trace(self) -> list[tuple[int, str, Optional[int], Optional[int]]]:
        return sorted(self.trace_rows, key=lambda r: (r[0], r[1], r[2] if r[2] is not None else -1))
