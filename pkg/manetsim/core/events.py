"""Simulation clock, event queue and the NDJSON event trace"""

import heapq
import json
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, Iterator, List

from .models import EventKind


class SimClock:
    """Seconds since scenario start plus the event sequence number"""

    def __init__(self):
        self.now = 0.0
        self.tick = 0

    def advance(self, t: float) -> None:
        if t < self.now:
            raise ValueError(f"Clock cannot move backwards: {t} < {self.now}")
        self.now = t

    def next_tick(self) -> int:
        self.tick += 1
        return self.tick


@dataclass(order=True)
class ScheduledEvent:
    t: float
    priority: int
    seq: int
    action: Callable[[], None] = field(compare=False)
    name: str = field(compare=False, default="")


class EventQueue:
    """Min-heap ordered by (time, phase priority, insertion sequence)"""

    def __init__(self, clock: SimClock):
        self.clock = clock
        self._heap: List[ScheduledEvent] = []
        self._seq = 0

    def __len__(self) -> int:
        return len(self._heap)

    def schedule(self, t: float, priority: int, action: Callable[[], None], name: str = "") -> None:
        self._seq += 1
        heapq.heappush(self._heap, ScheduledEvent(t, priority, self._seq, action, name))

    def run_until(self, t_end: float) -> int:
        """Pop and run events with t <= t_end; returns the number executed"""
        executed = 0
        while self._heap and self._heap[0].t <= t_end:
            event = heapq.heappop(self._heap)
            self.clock.advance(event.t)
            event.action()
            executed += 1
        return executed


@dataclass(frozen=True)
class TraceEvent:
    t: float
    tick: int
    kind: EventKind
    payload: Dict[str, Any]

    def to_json(self) -> str:
        return json.dumps(
            {"t": self.t, "tick": self.tick, "kind": self.kind.value, "payload": self.payload},
            sort_keys=True,
            separators=(",", ":"),
        )


class EventLog:
    """Append-only event trace; ticks are strictly increasing"""

    def __init__(self, clock: SimClock):
        self.clock = clock
        self.events: List[TraceEvent] = []

    def __len__(self) -> int:
        return len(self.events)

    def __iter__(self) -> Iterator[TraceEvent]:
        return iter(self.events)

    def emit(self, kind: EventKind, /, **payload: Any) -> TraceEvent:
        event = TraceEvent(self.clock.now, self.clock.next_tick(), kind, payload)
        self.events.append(event)
        return event

    def of_kind(self, kind: EventKind) -> List[TraceEvent]:
        return [e for e in self.events if e.kind == kind]

    def to_ndjson(self) -> str:
        return "".join(e.to_json() + "\n" for e in self.events)
