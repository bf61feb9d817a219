"""Deterministic discrete-event kernel.

A binary-heap event queue ordered by ``(time, seq)``, a millisecond clock,
named seeded random streams and an in-memory trace of processed events.
Handlers are registered per :class:`EventKind`; an event with no handler is
still processed and traced. A handler may add result fields to its own
event's payload; the trace is serialized after the run, so those fields
become part of the replay artifact.
"""

from __future__ import annotations

import hashlib
import heapq
import json
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Callable, Iterable, Iterator

import numpy as np


class PastEventError(ValueError):
    """Raised when an event is scheduled before the current clock."""


class EventKind(str, Enum):
    ACCESS_REQUEST = "AccessRequest"
    AUTH_COMPLETE = "AuthComplete"
    PACKET_ARRIVAL = "PacketArrival"
    SIR_TICK = "SirTick"
    POLICY_DECISION = "PolicyDecision"
    POLICY_DISTRIBUTED = "PolicyDistributed"
    FEEDBACK_DELIVERED = "FeedbackDelivered"
    DOMAIN_SWITCH = "DomainSwitch"
    METRIC_SAMPLE = "MetricSample"
    FILTER_BATCH = "FilterBatch"
    NF_RELEASE = "NfRelease"


@dataclass(slots=True)
class SimEvent:
    time: float
    seq: int
    kind: EventKind
    payload: dict = field(default_factory=dict)
    cancelled: bool = False

    def to_json(self) -> str:
        return json.dumps(
            {"time": self.time, "seq": self.seq, "kind": self.kind.value, "payload": self.payload},
            sort_keys=True,
            separators=(",", ":"),
        )

    @classmethod
    def from_json(cls, line: str) -> "SimEvent":
        d = json.loads(line)
        return cls(float(d["time"]), int(d["seq"]), EventKind(d["kind"]), d["payload"])


EventTrace = list  # list[SimEvent], kept as a plain list for speed


def _seed_for(master_seed: int, name: str) -> int:
    digest = hashlib.sha256(f"{int(master_seed)}/{name}".encode()).digest()
    return int.from_bytes(digest[:8], "little")


class RngStream:
    """A named random stream seeded from ``(master_seed, name)``.

    Wraps a PCG64 :class:`numpy.random.Generator`. ``draws`` counts scalar
    and vector draws so consumption can be compared between runs.
    """

    __slots__ = ("name", "seed", "gen", "draws")

    def __init__(self, name: str, seed: int):
        self.name = name
        self.seed = seed
        self.gen = np.random.Generator(np.random.PCG64(seed))
        self.draws = 0

    def random(self) -> float:
        self.draws += 1
        return float(self.gen.random())

    def uniform(self, lo: float, hi: float) -> float:
        self.draws += 1
        return float(self.gen.uniform(lo, hi))

    def normal(self, mean: float = 0.0, sd: float = 1.0) -> float:
        self.draws += 1
        return float(self.gen.normal(mean, sd))

    def exponential(self, mean: float) -> float:
        self.draws += 1
        return float(self.gen.exponential(mean))

    def integers(self, n: int) -> int:
        self.draws += 1
        return int(self.gen.integers(n))

    def vector(self, n: int) -> np.ndarray:
        self.draws += n
        return self.gen.random(n)

    def truncated_normal(self, mean: float, sd: float, lo: float = 0.0, hi: float = np.inf) -> float:
        """Rejection sample from N(mean, sd) restricted to (lo, hi)."""
        if sd <= 0:
            return min(max(mean, lo), hi)
        while True:
            x = self.normal(mean, sd)
            if lo < x < hi:
                return x


def derive_stream(master_seed: int, name: str) -> RngStream:
    if not name:
        raise ValueError("stream name must be nonempty")
    return RngStream(name, _seed_for(master_seed, name))


class Simulator:
    """Single-threaded event loop.

    >>> sim = Simulator()
    >>> _ = sim.schedule(5.0, EventKind.METRIC_SAMPLE)
    >>> _ = sim.schedule(3.0, EventKind.METRIC_SAMPLE)
    >>> [e.time for e in sim.run_until(10.0)]
    [3.0, 5.0]
    """

    def __init__(self, master_seed: int = 0):
        self.master_seed = master_seed
        self.clock = 0.0
        self._queue: list[tuple[float, int, SimEvent]] = []
        self._seq = 0
        self._handlers: dict[EventKind, Callable[[SimEvent], None]] = {}
        self._streams: dict[str, RngStream] = {}
        self.trace: EventTrace = []
        self.scheduled = 0
        self.processed = 0
        self.discarded = 0  # cancelled events popped from the heap

    def stream(self, name: str) -> RngStream:
        s = self._streams.get(name)
        if s is None:
            s = self._streams[name] = derive_stream(self.master_seed, name)
        return s

    @property
    def streams(self) -> dict[str, RngStream]:
        return dict(self._streams)

    def on(self, kind: EventKind, handler: Callable[[SimEvent], None]) -> None:
        self._handlers[kind] = handler

    def schedule(self, time: float, kind: EventKind, payload: dict | None = None) -> SimEvent:
        if time < self.clock:
            raise PastEventError(f"event at t={time} scheduled before clock {self.clock}")
        ev = SimEvent(float(time), self._seq, kind, payload if payload is not None else {})
        self._seq += 1
        self.scheduled += 1
        heapq.heappush(self._queue, (ev.time, ev.seq, ev))
        return ev

    def cancel(self, event: SimEvent) -> None:
        event.cancelled = True

    @property
    def pending(self) -> int:
        return len(self._queue)

    def peek_time(self) -> float | None:
        return self._queue[0][0] if self._queue else None

    def run_until(self, t_end: float) -> EventTrace:
        if t_end < self.clock:
            raise PastEventError(f"run_until({t_end}) is before clock {self.clock}")
        out: EventTrace = []
        queue = self._queue
        handlers = self._handlers
        while queue and queue[0][0] <= t_end:
            _, _, ev = heapq.heappop(queue)
            if ev.cancelled:
                self.discarded += 1
                continue
            self.clock = ev.time
            self.processed += 1
            out.append(ev)
            h = handlers.get(ev.kind)
            if h is not None:
                h(ev)
        self.clock = float(t_end)
        self.trace.extend(out)
        return out


def write_trace(trace: Iterable[SimEvent], path: str | Path) -> str:
    """Write a JSON Lines trace and return its sha256 hex digest."""
    h = hashlib.sha256()
    with open(path, "w", encoding="utf-8") as fh:
        for ev in trace:
            line = ev.to_json() + "\n"
            fh.write(line)
            h.update(line.encode())
    return h.hexdigest()


def read_trace(path: str | Path) -> Iterator[SimEvent]:
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if line.strip():
                yield SimEvent.from_json(line)


def trace_digest(trace: Iterable[SimEvent]) -> str:
    h = hashlib.sha256()
    for ev in trace:
        h.update((ev.to_json() + "\n").encode())
    return h.hexdigest()
