"""Deterministic discrete-event engine and lossy network links.

A single binary-heap queue orders events by (fire_at, insertion sequence);
all randomness fans out from one master seed into independent per-entity
streams, so equal seed and config always reproduce a byte-identical trace.
"""

from __future__ import annotations

import hashlib
import heapq
import random
from dataclasses import dataclass, field
from typing import Any, Callable, Optional

from .errors import SchedulingInPast
from .exact import derive_seed
from .timebase import TrueTime


@dataclass(frozen=True)
class Jitter:
    """A one-sided or symmetric delay-noise distribution, in integer ns.

    kinds: "none"; "uniform" (symmetric, half-width a); "range" (uniform in
    [a, b]); "exponential" (mean a, rounded to ns).
    """

    kind: str = "none"
    a: int = 0
    b: int = 0

    def __post_init__(self):
        if self.kind not in ("none", "uniform", "range", "exponential"):
            raise ValueError(f"unknown jitter kind {self.kind!r}")
        if self.kind == "uniform" and self.a < 0:
            raise ValueError("uniform jitter half-width must be >= 0")
        if self.kind == "range" and self.a > self.b:
            raise ValueError("range jitter needs a <= b")
        if self.kind == "exponential" and self.a <= 0:
            raise ValueError("exponential jitter needs mean > 0")

    @classmethod
    def none(cls) -> "Jitter":
        return cls("none")

    @classmethod
    def uniform(cls, half_width_ns: int) -> "Jitter":
        return cls("uniform", half_width_ns)

    @classmethod
    def uniform_range(cls, low_ns: int, high_ns: int) -> "Jitter":
        return cls("range", low_ns, high_ns)

    @classmethod
    def exponential(cls, mean_ns: int) -> "Jitter":
        return cls("exponential", mean_ns)

    def sample(self, rng: random.Random) -> int:
        """Draw one value. A "none" jitter consumes no randomness."""
        if self.kind == "none" or (self.kind == "uniform" and self.a == 0):
            return 0
        if self.kind == "uniform":
            return rng.randint(-self.a, self.a)
        if self.kind == "range":
            return rng.randint(self.a, self.b)
        return round(rng.expovariate(1.0 / self.a))

    def to_config(self) -> dict:
        if self.kind == "none":
            return {"kind": "none"}
        if self.kind == "uniform":
            return {"kind": "uniform", "half_width_ns": self.a}
        if self.kind == "range":
            return {"kind": "range", "low_ns": self.a, "high_ns": self.b}
        return {"kind": "exponential", "mean_ns": self.a}


@dataclass(frozen=True)
class LinkModel:
    """One-way base delays (possibly asymmetric), additive jitter, drops."""

    delay_forward_ns: int = 100_000
    delay_reverse_ns: Optional[int] = None
    jitter: Jitter = Jitter.none()
    drop_probability: float = 0.0

    def __post_init__(self):
        if self.delay_reverse_ns is None:
            object.__setattr__(self, "delay_reverse_ns", self.delay_forward_ns)
        if self.delay_forward_ns < 0 or self.delay_reverse_ns < 0:
            raise ValueError("link base delays must be >= 0")
        if not 0.0 <= self.drop_probability <= 1.0:
            raise ValueError("drop_probability must be in [0, 1]")


@dataclass(frozen=True)
class Event:
    fire_at: TrueTime
    sequence: int
    label: str
    action: Optional[Callable[["Simulator", "Event"], None]] = None
    payload: Any = None


@dataclass
class SimulationTrace:
    """Ordered record of every processed event."""

    entries: list = field(default_factory=list)

    def add(self, fire_at: int, sequence: int, label: str) -> None:
        self.entries.append((fire_at, sequence, label))

    def lines(self) -> list:
        return [f"{t} {seq} {label}" for t, seq, label in self.entries]

    def sha256(self) -> str:
        h = hashlib.sha256()
        for line in self.lines():
            h.update(line.encode("utf-8"))
            h.update(b"\n")
        return h.hexdigest()

    def __len__(self) -> int:
        return len(self.entries)


class Simulator:
    """Single-threaded event loop over TrueTime."""

    def __init__(self, seed: int = 0, start: int = 0):
        self.seed = seed
        self.now: TrueTime = TrueTime(start)
        self.trace = SimulationTrace()
        self._heap: list = []
        self._next_seq = 0

    def stream(self, *labels) -> random.Random:
        """A dedicated RNG stream for one entity, derived from the master seed."""
        return random.Random(derive_seed(self.seed, *labels))

    def schedule(
        self,
        fire_at: int,
        label: str,
        action: Optional[Callable[["Simulator", Event], None]] = None,
        payload: Any = None,
    ) -> Event:
        if fire_at < self.now:
            raise SchedulingInPast(f"cannot schedule {label!r} at {fire_at} < now {self.now}")
        event = Event(TrueTime(fire_at), self._next_seq, label, action, payload)
        self._next_seq += 1
        heapq.heappush(self._heap, (event.fire_at, event.sequence, event))
        return event

    def note(self, label: str) -> None:
        """Record a trace-visible occurrence (e.g. a dropped message) at `now`."""
        self.trace.add(self.now, self._next_seq, label)
        self._next_seq += 1

    def peek_time(self) -> Optional[int]:
        return self._heap[0][0] if self._heap else None

    def run_until(self, t_end: int) -> SimulationTrace:
        """Process every event with fire_at <= t_end, in (fire_at, seq) order."""
        while self._heap and self._heap[0][0] <= t_end:
            _, _, event = heapq.heappop(self._heap)
            self.now = event.fire_at
            self.trace.add(event.fire_at, event.sequence, event.label)
            if event.action is not None:
                event.action(self, event)
        self.now = TrueTime(max(self.now, t_end))
        return self.trace


@dataclass(frozen=True)
class Dropped:
    """Modeled outcome of a send lost on the link."""

    label: str


class Link:
    """A bidirectional point-to-point link bound to a simulator.

    Jitter and drop decisions come from two per-link streams, so changing one
    knob never shifts the other's draws.
    """

    def __init__(self, sim: Simulator, name: str, a: str, b: str, model: LinkModel):
        self.sim = sim
        self.name = name
        self.a = a
        self.b = b
        self.model = model
        self._jitter_rng = sim.stream("link", name, "jitter")
        self._drop_rng = sim.stream("link", name, "drop")

    def _base_delay(self, src: str, dst: str) -> int:
        if (src, dst) == (self.a, self.b):
            return self.model.delay_forward_ns
        if (src, dst) == (self.b, self.a):
            return self.model.delay_reverse_ns
        raise ValueError(f"link {self.name} does not connect {src} -> {dst}")

    def send(
        self,
        src: str,
        dst: str,
        label: str,
        at: int,
        action: Optional[Callable[[Simulator, Event], None]] = None,
        payload: Any = None,
    ):
        """Schedule the arrival event, or return Dropped.

        Arrival is at + base delay + jitter, floored at the send time (total
        delay never goes negative).
        """
        if self.model.drop_probability > 0.0:
            if self._drop_rng.random() < self.model.drop_probability:
                self.sim.note(f"drop {label}")
                return Dropped(label)
        delay = self._base_delay(src, dst) + self.model.jitter.sample(self._jitter_rng)
        arrive = at + max(delay, 0)
        return self.sim.schedule(arrive, label, action, payload)
