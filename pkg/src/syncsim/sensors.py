"""Sensor triggering and timestamping on a shared machine timer.

Externally-triggered sensors (cameras, IMUs) fire only on a pulse; the pulse
either comes from dedicated trigger hardware, which lands within a few timer
cycles of nominal, or from host software, which adds driver-stack latency
that differs per sensor. Internally-triggered sensors (LiDAR, Radar) free-run
at their own rate after a start pulse. Timestamps are taken either at the
sensor interface (small, mostly deterministic latency) or at the host
application (large, noisy latency); the deterministic part can be compensated
away afterwards.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field, replace
from fractions import Fraction
from typing import Dict, List, Optional

from .errors import CompensateTwice, RateError
from .exact import derive_seed, round_half_away
from .simnet import Jitter
from .syncproto import StampNoiseModel
from .timebase import ClockModel, ClockState, LocalTime, TrueTime

NS_PER_SEC = 1_000_000_000

DEFAULT_TIMER_RESOLUTION_NS = 10  # 100 MHz shared timer
DEFAULT_DELIVERY_LATENCY_CYCLES = 3

EXTERNAL = "external"
INTERNAL = "internal"

HARDWARE = "hardware"
HOST_SOFTWARE = "host"

AT_INTERFACE = "interface"
AT_HOST = "host"

INTERFACES = ("mipi", "serial", "ethernet", "can")

# Declared engineering defaults; the 20 ms upper bound mirrors the worst-case
# software-stack variation, the interface numbers are sub-microsecond-jitter
# hardware paths.
INTERFACE_LATENCY_DEFAULT = StampNoiseModel(2_000, Jitter.uniform(500))
HOST_LATENCY_DEFAULT = StampNoiseModel(5_000_000, Jitter.uniform_range(500_000, 20_000_000))
HOST_TRIGGER_NOISE_DEFAULT = StampNoiseModel(5_000_000, Jitter.uniform_range(500_000, 20_000_000))


@dataclass(frozen=True)
class SensorSpec:
    """One sensor's triggering, rate, interface, and latency characteristics.

    For internally-triggered sensors, ``internal_clock.drift_ppm`` expresses
    the sampling-period error in ppm: positive drift lengthens the true
    interval between samples (a slow sensor oscillator), so samples arrive
    late relative to nominal.
    """

    name: str
    kind: str = EXTERNAL
    rate_hz: int = 10
    interface: str = "mipi"
    trigger_path: str = HARDWARE
    trigger_path_noise: StampNoiseModel = HOST_TRIGGER_NOISE_DEFAULT
    stamping: str = AT_INTERFACE
    interface_latency: StampNoiseModel = INTERFACE_LATENCY_DEFAULT
    host_latency: StampNoiseModel = HOST_LATENCY_DEFAULT
    internal_clock: Optional[ClockModel] = None

    def __post_init__(self):
        if self.kind not in (EXTERNAL, INTERNAL):
            raise ValueError(f"sensor kind must be 'external' or 'internal', got {self.kind!r}")
        if self.rate_hz < 1:
            raise ValueError("rate_hz must be >= 1")
        if self.interface not in INTERFACES:
            raise ValueError(f"unknown interface {self.interface!r}")
        if self.trigger_path not in (HARDWARE, HOST_SOFTWARE):
            raise ValueError(f"unknown trigger path {self.trigger_path!r}")
        if self.stamping not in (AT_INTERFACE, AT_HOST):
            raise ValueError(f"unknown stamping location {self.stamping!r}")
        if self.kind == EXTERNAL and self.internal_clock is not None:
            raise ValueError("externally-triggered sensors have no internal clock")

    @property
    def effective_internal_clock(self) -> ClockModel:
        return self.internal_clock if self.internal_clock is not None else ClockModel()

    def stamp_latency(self, location: str) -> StampNoiseModel:
        return self.interface_latency if location == AT_INTERFACE else self.host_latency


def standard_sensor(role: str, name: Optional[str] = None, **overrides) -> SensorSpec:
    """Presets for the common sensor roles: camera, imu, lidar, radar.

    Cameras and IMUs are externally triggered and externally stamped (MIPI /
    serial); LiDAR free-runs and stamps internally on its Ethernet interface;
    Radar free-runs but is stamped externally at the CAN interface.
    """
    presets = {
        "camera": dict(kind=EXTERNAL, rate_hz=30, interface="mipi"),
        "imu": dict(kind=EXTERNAL, rate_hz=200, interface="serial"),
        "lidar": dict(kind=INTERNAL, rate_hz=10, interface="ethernet"),
        "radar": dict(kind=INTERNAL, rate_hz=20, interface="can"),
    }
    if role not in presets:
        raise ValueError(f"unknown sensor role {role!r}")
    kwargs = dict(presets[role])
    kwargs["stamping"] = AT_INTERFACE
    kwargs.update(overrides)
    return SensorSpec(name=name or role, **kwargs)


def validate_rates(specs: List[SensorSpec], *, strict: bool = False) -> None:
    """Check that every (internal, external) pair has divisible rates.

    ``strict`` extends the divisibility requirement to all sensor pairs.
    Raises RateError naming the first offending pair.
    """
    if strict:
        pairs = [(a, b) for i, a in enumerate(specs) for b in specs[i + 1:]]
    else:
        internal = [s for s in specs if s.kind == INTERNAL]
        external = [s for s in specs if s.kind == EXTERNAL]
        pairs = [(b, a) for a in internal for b in external]
    for a, b in pairs:
        hi, lo = max(a.rate_hz, b.rate_hz), min(a.rate_hz, b.rate_hz)
        if hi % lo != 0:
            raise RateError(a.name, b.name, a.rate_hz, b.rate_hz)


@dataclass(frozen=True)
class TriggerPulse:
    tick: int  # shared-timer ticks since schedule start
    nominal_ns: int  # TrueTime of the tick
    delivered_ns: int  # TrueTime the pulse actually reaches the sensor


@dataclass
class TriggerSchedule:
    """Per-sensor pulse lists on one shared timer grid.

    Externally-triggered sensors have one pulse per sample; internally-
    triggered sensors have exactly their start pulse.
    """

    timer_resolution_ns: int
    start_ns: int
    duration_ns: int
    pulses: Dict[str, List[TriggerPulse]] = field(default_factory=dict)


def _nominal_tick(index: int, rate_hz: int, resolution_ns: int) -> int:
    # exact rational tick, rounded half away from zero onto the grid
    return round_half_away(Fraction(index * NS_PER_SEC, rate_hz * resolution_ns))


def generate_trigger_events(
    specs: List[SensorSpec],
    start: TrueTime,
    duration_ns: int,
    *,
    timer_resolution_ns: int = DEFAULT_TIMER_RESOLUTION_NS,
    delivery_latency_cycles: int = DEFAULT_DELIVERY_LATENCY_CYCLES,
    seed: int = 0,
) -> TriggerSchedule:
    """Lay out trigger pulses for all sensors on the shared timer.

    All schedules are phase-aligned at tick 0, so sensors with coincident
    nominal instants share the identical tick. Hardware-path delivery adds a
    fixed few-cycle latency, identical for every sensor; host-software
    delivery adds a per-sensor draw from its trigger-path noise.
    """
    validate_rates(specs)
    hardware_latency = delivery_latency_cycles * timer_resolution_ns
    schedule = TriggerSchedule(timer_resolution_ns, start, duration_ns)
    for spec in specs:
        rng = random.Random(derive_seed(seed, "trigger", spec.name))
        pulses: List[TriggerPulse] = []
        if spec.kind == INTERNAL:
            pulses.append(TriggerPulse(0, start, start + hardware_latency))
        else:
            index = 0
            while True:
                tick = _nominal_tick(index, spec.rate_hz, timer_resolution_ns)
                nominal = start + tick * timer_resolution_ns
                if nominal >= start + duration_ns:
                    break
                if spec.trigger_path == HARDWARE:
                    delivered = nominal + hardware_latency
                else:
                    delivered = nominal + max(0, spec.trigger_path_noise.sample(rng))
                pulses.append(TriggerPulse(tick, nominal, delivered))
                index += 1
        schedule.pulses[spec.name] = pulses
    return schedule


@dataclass(frozen=True)
class SampleRecord:
    """One sensor sample: when it truly happened and how it got stamped."""

    sensor: str
    seq: int
    event_true_time: TrueTime
    stamped_time: Optional[LocalTime] = None
    stamping_location: Optional[str] = None
    compensated: bool = False


def internal_sample_times(
    spec: SensorSpec, start_pulse_ns: int, until_ns: int
) -> List[int]:
    """True sample instants of a free-running sensor from its start pulse.

    The j-th sample fires at start + j * period * (1 + drift_ppm * 1e-6),
    each instant rounded independently so error never accumulates.
    """
    clock = spec.effective_internal_clock
    period = Fraction(NS_PER_SEC, spec.rate_hz) * clock.rate
    times = []
    j = 0
    while True:
        t = start_pulse_ns + round_half_away(j * period)
        if t >= until_ns:
            break
        times.append(t)
        j += 1
    return times


def emit_samples(schedule: TriggerSchedule, specs: List[SensorSpec]) -> List[SampleRecord]:
    """Turn a trigger schedule into unstamped sample records.

    Externally-triggered sensors produce one sample per delivered pulse;
    internally-triggered sensors tick from their delivered start pulse at
    their own (possibly drifting) cadence until the schedule ends.
    """
    records: List[SampleRecord] = []
    until = schedule.start_ns + schedule.duration_ns
    for spec in specs:
        pulses = schedule.pulses.get(spec.name, [])
        if spec.kind == EXTERNAL:
            times = [p.delivered_ns for p in pulses]
        else:
            if not pulses:
                continue
            times = internal_sample_times(spec, pulses[0].delivered_ns, until)
        records.extend(
            SampleRecord(spec.name, seq, TrueTime(t)) for seq, t in enumerate(times)
        )
    records.sort(key=lambda r: (r.event_true_time, r.sensor, r.seq))
    return records


def stamp(
    record: SampleRecord,
    spec: SensorSpec,
    node_clock: ClockState,
    rng: Optional[random.Random] = None,
    *,
    location: Optional[str] = None,
    latency_ns: Optional[int] = None,
) -> SampleRecord:
    """Assign a timestamp to a sample through one stamping path.

    The stamp is the node clock's reading at event time plus the path's
    latency draw (floored at zero: a sample cannot be stamped before it
    exists). Pass ``latency_ns`` to reuse a draw made elsewhere.
    """
    if record.stamped_time is not None:
        raise ValueError(f"sample {record.sensor}#{record.seq} is already stamped")
    where = location or spec.stamping
    if latency_ns is None:
        if rng is None:
            raise ValueError("stamp() needs an rng when latency_ns is not given")
        latency_ns = spec.stamp_latency(where).sample(rng)
    latency_ns = max(0, latency_ns)
    stamped = node_clock.local_from_true(TrueTime(record.event_true_time + latency_ns))
    return replace(record, stamped_time=stamped, stamping_location=where)


def compensate(record: SampleRecord, known_base_latency_ns: int) -> SampleRecord:
    """Subtract the deterministic part of the stamping latency.

    What remains in the stamp is jitter plus the stamping clock's own error.
    """
    if record.stamped_time is None:
        raise ValueError(f"sample {record.sensor}#{record.seq} is not stamped yet")
    if record.compensated:
        raise CompensateTwice(f"sample {record.sensor}#{record.seq} already compensated")
    return replace(
        record,
        stamped_time=LocalTime(record.stamped_time - known_base_latency_ns),
        compensated=True,
    )


def trigger_skew_ns(
    schedule: TriggerSchedule, specs: List[SensorSpec], path: str
) -> List[int]:
    """Max-minus-min delivered time at each coincident nominal tick.

    Only externally-triggered sensors on the given trigger path participate;
    ticks hit by fewer than two such sensors are skipped.
    """
    by_tick: Dict[int, List[int]] = {}
    for spec in specs:
        if spec.kind != EXTERNAL or spec.trigger_path != path:
            continue
        for pulse in schedule.pulses.get(spec.name, []):
            by_tick.setdefault(pulse.tick, []).append(pulse.delivered_ns)
    return [
        max(group) - min(group)
        for _, group in sorted(by_tick.items())
        if len(group) >= 2
    ]


def stamp_residual_ns(record: SampleRecord, reference_offset_ns: int = 0) -> int:
    """Stamp error vs the reference timescale: stamped value minus the true
    event instant expressed on that timescale."""
    if record.stamped_time is None:
        raise ValueError("sample is not stamped")
    return record.stamped_time - (record.event_true_time + reference_offset_ns)
