"""Inter-machine synchronization: two-step PTP and NTP-style exchanges.

Both protocols reduce to the same four-timestamp estimator; the difference
that matters here is where the timestamps are taken. Hardware-assisted PTP
stamps near the wire, while an NTP-style software path adds millisecond-scale
latency noise to every stamp. A PI servo turns measured offsets into step or
slew corrections on the slave clock. gPTP (802.1AS) behaves identically to
PTP at this modeling level and is accepted as an alias.
"""

from __future__ import annotations

import random
import statistics
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Dict, List, Optional, Tuple

from .errors import ConfigError
from .exact import half_ns
from .simnet import Jitter, Link, LinkModel, Simulator
from .timebase import ClockModel, ClockState, CorrectionMode, LocalTime, TrueTime

PROTOCOLS = ("ptp", "gptp", "ntp")

DEFAULT_TURNAROUND_NS = 100_000


@dataclass(frozen=True)
class SyncExchange:
    """The four timestamps of one round: master send, slave receive, slave
    send, master receive. All are LocalTime on the stamping node's clock."""

    t1: LocalTime
    t2: LocalTime
    t3: LocalTime
    t4: LocalTime
    protocol: str = "ptp"


def offset_and_delay(x: SyncExchange) -> Tuple[int, int]:
    """Standard two-step estimator.

    offset = ((t2-t1) - (t4-t3)) / 2, mean path delay = ((t2-t1) + (t4-t3)) / 2,
    both halved with round-half-away-from-zero on integer nanoseconds.
    """
    forward = x.t2 - x.t1
    reverse = x.t4 - x.t3
    return half_ns(forward - reverse), half_ns(forward + reverse)


@dataclass(frozen=True)
class ServoConfig:
    kp: float = 0.7
    ki: float = 0.3
    step_threshold_ns: int = 1_000_000
    sync_interval_ns: int = 1_000_000_000

    def __post_init__(self):
        if self.kp < 0 or self.ki < 0:
            raise ValueError("servo gains must be >= 0")
        if self.sync_interval_ns <= 0:
            raise ValueError("sync_interval_ns must be > 0")


@dataclass(frozen=True)
class ServoState:
    integral_ns: float = 0.0


@dataclass(frozen=True)
class Correction:
    mode: CorrectionMode
    amount_ns: int
    slew_rate_ppm: Optional[Fraction] = None


def servo_update(
    cfg: ServoConfig, state: ServoState, measured_offset_ns: int
) -> Tuple[Optional[Correction], ServoState]:
    """One PI iteration for a measured offset.

    Offsets beyond the step threshold are removed in full by an immediate
    step (and the integrator resets); smaller ones get a proportional-plus-
    integral command slewed out over the next sync interval.
    """
    if abs(measured_offset_ns) > cfg.step_threshold_ns:
        return (
            Correction(CorrectionMode.STEP, measured_offset_ns),
            ServoState(integral_ns=0.0),
        )
    command = cfg.kp * measured_offset_ns + cfg.ki * state.integral_ns
    command_ns = int(command + 0.5) if command >= 0 else -int(-command + 0.5)
    new_state = ServoState(integral_ns=state.integral_ns + measured_offset_ns)
    if command_ns == 0:
        return None, new_state
    rate_ppm = Fraction(abs(command_ns) * 1_000_000, cfg.sync_interval_ns)
    return Correction(CorrectionMode.SLEW, command_ns, rate_ppm), new_state


@dataclass(frozen=True)
class GrandmasterSource:
    """The reference timescale: GPS-anchored on earth, SCLK-anchored in space.

    Its clock is ideal relative to the timescale; the timescale itself may sit
    at a constant offset from simulation TrueTime.
    """

    kind: str = "gps"
    epoch_offset_ns: int = 0

    def __post_init__(self):
        if self.kind not in ("gps", "sclk"):
            raise ValueError("grandmaster source kind must be 'gps' or 'sclk'")

    def local(self, t: TrueTime) -> LocalTime:
        return LocalTime(t + self.epoch_offset_ns)


@dataclass(frozen=True)
class StampNoiseModel:
    """Latency between an event and when its timestamp is actually taken."""

    base_latency_ns: int = 0
    jitter: Jitter = Jitter.none()

    def __post_init__(self):
        if self.base_latency_ns < 0:
            raise ValueError("base_latency_ns must be >= 0")

    def sample(self, rng: random.Random) -> int:
        return self.base_latency_ns + self.jitter.sample(rng)


# Software-stack stamping on an NTP-style path: up to ~20 ms of added latency.
NTP_SOFTWARE_NOISE = StampNoiseModel(0, Jitter.uniform_range(500_000, 20_000_000))


def default_stamp_noise(protocol: str) -> StampNoiseModel:
    if protocol == "ntp":
        return NTP_SOFTWARE_NOISE
    return StampNoiseModel()


@dataclass
class OffsetErrorSeries:
    """True offset error of one slave vs the grandmaster timescale, sampled
    at the completion of each exchange."""

    samples: List[Tuple[int, int]] = field(default_factory=list)

    def add(self, t: int, error_ns: int) -> None:
        self.samples.append((t, error_ns))

    def window(self, t_start: int = 0, t_end: Optional[int] = None) -> "OffsetErrorSeries":
        end = float("inf") if t_end is None else t_end
        return OffsetErrorSeries(
            [(t, e) for t, e in self.samples if t_start <= t <= end]
        )

    def errors(self) -> List[int]:
        return [e for _, e in self.samples]

    def abs_errors(self) -> List[int]:
        return [abs(e) for _, e in self.samples]

    def p95_abs(self) -> int:
        return percentile_nearest_rank(self.abs_errors(), 0.95)

    def median_abs(self) -> float:
        values = self.abs_errors()
        return float(statistics.median(values)) if values else 0.0

    def max_abs(self) -> int:
        values = self.abs_errors()
        return max(values) if values else 0

    def mean_abs(self) -> float:
        values = self.abs_errors()
        return float(statistics.fmean(values)) if values else 0.0

    def summary(self) -> dict:
        return {
            "count": len(self.samples),
            "mean_abs_ns": self.mean_abs(),
            "p50_abs_ns": self.median_abs(),
            "p95_abs_ns": self.p95_abs(),
            "max_abs_ns": self.max_abs(),
        }


def percentile_nearest_rank(values: List[int], q: float) -> int:
    """Nearest-rank percentile; deterministic and exact on integer data."""
    if not values:
        return 0
    ordered = sorted(values)
    rank = max(1, -(-len(ordered) * q // 1))  # ceil
    return ordered[min(int(rank), len(ordered)) - 1]


class ClockedNode:
    """A named participant owning a correctable local clock.

    The clock state is value-semantic; the node is the one mutable cell that
    swaps states as corrections arrive.
    """

    def __init__(self, name: str, clock: ClockState):
        self.name = name
        self.clock = clock

    def local(self, t: TrueTime, *, with_jitter: bool = True) -> LocalTime:
        return self.clock.local_from_true(t, with_jitter=with_jitter)

    def correct(self, correction: Correction, now: TrueTime) -> None:
        self.clock = self.clock.apply_correction(
            correction.amount_ns,
            correction.mode,
            now,
            slew_rate_ppm=correction.slew_rate_ppm,
        )


@dataclass(frozen=True)
class SyncTopology:
    """One grandmaster and a set of slaves, each behind exactly one link."""

    grandmaster: GrandmasterSource
    clocks: Dict[str, ClockModel]
    links: Dict[str, LinkModel]
    grandmaster_name: str = "grandmaster"

    def validate(self) -> None:
        if self.grandmaster_name in self.clocks:
            raise ConfigError(
                f"machines.{self.grandmaster_name}",
                "a slave may not reuse the grandmaster's name",
            )
        for name in self.clocks:
            if name not in self.links:
                raise ConfigError(f"links.{name}", f"slave {name!r} has no link to the grandmaster")
        for name in self.links:
            if name not in self.clocks:
                raise ConfigError(f"links.{name}", f"link references unknown slave {name!r}")


class SyncSession:
    """Periodic exchange/servo loop for every slave in a topology.

    Attaches to an existing Simulator so protocol rounds interleave with any
    other scheduled activity (sensor triggers, samples).
    """

    def __init__(
        self,
        sim: Simulator,
        topology: SyncTopology,
        *,
        protocol: str = "ptp",
        servo: ServoConfig = ServoConfig(),
        noise: Optional[StampNoiseModel] = None,
        turnaround_ns: int = DEFAULT_TURNAROUND_NS,
        on_exchange: Optional[Callable[[str, SyncExchange], None]] = None,
    ):
        if protocol not in PROTOCOLS:
            raise ConfigError("protocol", f"unknown protocol {protocol!r}")
        topology.validate()
        self.sim = sim
        self.topology = topology
        self.protocol = "ptp" if protocol == "gptp" else protocol
        self.servo = servo
        self.noise = default_stamp_noise(self.protocol) if noise is None else noise
        self.turnaround_ns = turnaround_ns
        self.on_exchange = on_exchange
        self.gm = topology.grandmaster
        self.gm_name = topology.grandmaster_name
        self.nodes: Dict[str, ClockedNode] = {}
        self.series: Dict[str, OffsetErrorSeries] = {}
        self._links: Dict[str, Link] = {}
        self._servo_state: Dict[str, ServoState] = {}
        self._stamp_rng: Dict[str, random.Random] = {}
        self._pending: Dict[str, dict] = {}
        for name, model in topology.clocks.items():
            state = ClockState(model=model, seed=sim.stream("clock", name).getrandbits(64))
            self.nodes[name] = ClockedNode(name, state)
            self.series[name] = OffsetErrorSeries()
            self._links[name] = Link(sim, f"{self.gm_name}<->{name}", self.gm_name, name, topology.links[name])
            self._servo_state[name] = ServoState()
            self._stamp_rng[name] = sim.stream("sync", name, "stamp")

    def start(self, at: int = 0, until: int = 0) -> None:
        """Schedule periodic rounds for every slave from ``at`` to ``until``."""
        interval = self.servo.sync_interval_ns
        for name in self.nodes:
            k = 0
            while at + k * interval <= until:
                self.sim.schedule(
                    at + k * interval,
                    f"{self.protocol}.round {name} {k}",
                    self._make_round(name, k),
                )
                k += 1

    # One exchange is a chain of events: sync goes master -> slave, a
    # follow-up carries the precise t1, then delay-req / delay-resp close the
    # round. Losing any message silently aborts the round.

    def _make_round(self, name: str, k: int):
        def fire(sim: Simulator, _event) -> None:
            self._pending[name] = {"k": k}
            t_send = sim.now
            t1 = self.gm.local(TrueTime(t_send + self.noise.sample(self._stamp_rng[name])))
            link = self._links[name]
            link.send(
                self.gm_name, name, f"{self.protocol}.sync.rx {name} {k}",
                at=t_send, action=self._make_sync_rx(name, k),
            )
            sim.schedule(
                t_send + self.turnaround_ns,
                f"{self.protocol}.followup.tx {name} {k}",
                self._make_followup_tx(name, k, t1),
            )

        return fire

    def _make_sync_rx(self, name: str, k: int):
        def fire(sim: Simulator, _event) -> None:
            pending = self._pending.get(name)
            if pending is None or pending.get("k") != k:
                return
            node = self.nodes[name]
            stamp_at = TrueTime(sim.now + self.noise.sample(self._stamp_rng[name]))
            pending["t2"] = node.local(stamp_at)
            self._maybe_send_delay_req(name, k)

        return fire

    def _make_followup_tx(self, name: str, k: int, t1: LocalTime):
        def fire(sim: Simulator, _event) -> None:
            self._links[name].send(
                self.gm_name, name, f"{self.protocol}.followup.rx {name} {k}",
                at=sim.now, action=self._make_followup_rx(name, k, t1),
            )

        return fire

    def _make_followup_rx(self, name: str, k: int, t1: LocalTime):
        def fire(sim: Simulator, _event) -> None:
            pending = self._pending.get(name)
            if pending is None or pending.get("k") != k:
                return
            pending["t1"] = t1
            self._maybe_send_delay_req(name, k)

        return fire

    def _maybe_send_delay_req(self, name: str, k: int) -> None:
        pending = self._pending.get(name)
        if pending is None or "t1" not in pending or "t2" not in pending:
            return
        sim = self.sim
        sim.schedule(
            sim.now + self.turnaround_ns,
            f"{self.protocol}.delayreq.tx {name} {k}",
            self._make_delay_req_tx(name, k),
        )

    def _make_delay_req_tx(self, name: str, k: int):
        def fire(sim: Simulator, _event) -> None:
            pending = self._pending.get(name)
            if pending is None or pending.get("k") != k:
                return
            node = self.nodes[name]
            stamp_at = TrueTime(sim.now + self.noise.sample(self._stamp_rng[name]))
            pending["t3"] = node.local(stamp_at)
            self._links[name].send(
                name, self.gm_name, f"{self.protocol}.delayreq.rx {name} {k}",
                at=sim.now, action=self._make_delay_req_rx(name, k),
            )

        return fire

    def _make_delay_req_rx(self, name: str, k: int):
        def fire(sim: Simulator, _event) -> None:
            t4 = self.gm.local(TrueTime(sim.now + self.noise.sample(self._stamp_rng[name])))
            sim.schedule(
                sim.now + self.turnaround_ns,
                f"{self.protocol}.delayresp.tx {name} {k}",
                self._make_delay_resp_tx(name, k, t4),
            )

        return fire

    def _make_delay_resp_tx(self, name: str, k: int, t4: LocalTime):
        def fire(sim: Simulator, _event) -> None:
            self._links[name].send(
                self.gm_name, name, f"{self.protocol}.delayresp.rx {name} {k}",
                at=sim.now, action=self._make_delay_resp_rx(name, k, t4),
            )

        return fire

    def _make_delay_resp_rx(self, name: str, k: int, t4: LocalTime):
        def fire(sim: Simulator, _event) -> None:
            pending = self._pending.get(name)
            if pending is None or pending.get("k") != k:
                return
            if not all(key in pending for key in ("t1", "t2", "t3")):
                return
            exchange = SyncExchange(
                pending["t1"], pending["t2"], pending["t3"], t4, self.protocol
            )
            del self._pending[name]
            offset_ns, _delay_ns = offset_and_delay(exchange)
            correction, self._servo_state[name] = servo_update(
                self.servo, self._servo_state[name], offset_ns
            )
            node = self.nodes[name]
            if correction is not None:
                node.correct(correction, sim.now)
            error = node.local(sim.now, with_jitter=False) - self.gm.local(sim.now)
            self.series[name].add(sim.now, error)
            if self.on_exchange is not None:
                self.on_exchange(name, exchange)

        return fire


def run_sync_session(
    topology: SyncTopology,
    duration_ns: int,
    *,
    protocol: str = "ptp",
    servo: ServoConfig = ServoConfig(),
    noise: Optional[StampNoiseModel] = None,
    seed: int = 0,
    turnaround_ns: int = DEFAULT_TURNAROUND_NS,
) -> Dict[str, OffsetErrorSeries]:
    """Run one synchronization session on a fresh simulator.

    Returns the per-slave true offset error series, one entry per completed
    exchange. Deterministic for equal (topology, seed).
    """
    sim = Simulator(seed)
    session = SyncSession(
        sim, topology, protocol=protocol, servo=servo, noise=noise,
        turnaround_ns=turnaround_ns,
    )
    session.start(at=0, until=duration_ns)
    sim.run_until(duration_ns)
    return session.series


def ntp_style_session(
    topology: SyncTopology,
    duration_ns: int,
    *,
    servo: ServoConfig = ServoConfig(),
    noise: Optional[StampNoiseModel] = None,
    seed: int = 0,
    turnaround_ns: int = DEFAULT_TURNAROUND_NS,
) -> Dict[str, OffsetErrorSeries]:
    """Same exchange math as PTP, but every stamp crosses the software path."""
    return run_sync_session(
        topology, duration_ns, protocol="ntp",
        servo=servo, noise=noise, seed=seed, turnaround_ns=turnaround_ns,
    )
