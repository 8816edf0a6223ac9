"""Scenario documents: schema-1 JSON, validated and normalized.

Every duration in a document is a unit string ("10ns", "0.5ms", "1s"); bare
numbers are rejected so a missing unit can never silently change scale.
``parse_config`` fills every default and exposes the result both as typed
objects and as a normalized echo dict that reports embed verbatim.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field, replace
from decimal import Decimal, InvalidOperation
from fractions import Fraction
from pathlib import Path
from typing import Dict, List, Optional, Tuple

from ..errors import ConfigError, RateError
from ..impact import SpeedObservation, ToleranceQuery
from ..sensors import (
    DEFAULT_DELIVERY_LATENCY_CYCLES,
    DEFAULT_TIMER_RESOLUTION_NS,
    HOST_LATENCY_DEFAULT,
    HOST_TRIGGER_NOISE_DEFAULT,
    INTERFACE_LATENCY_DEFAULT,
    SensorSpec,
    validate_rates,
)
from ..simnet import Jitter, LinkModel
from ..syncproto import (
    GrandmasterSource,
    PROTOCOLS,
    ServoConfig,
    StampNoiseModel,
    default_stamp_noise,
)
from ..timebase import ClockModel

SCHEMA_VERSION = 1

_TIME_RE = re.compile(r"^([+-]?\d+(?:\.\d+)?)(ns|us|ms|s)$")
_TIME_SCALE = {"ns": 1, "us": 1_000, "ms": 1_000_000, "s": 1_000_000_000}


def parse_time_ns(value, path: str) -> int:
    """Parse a unit-suffixed time string to integer nanoseconds."""
    if isinstance(value, bool) or isinstance(value, (int, float)):
        raise ConfigError(path, f"times need an explicit unit, got bare number {value!r}; write e.g. \"{value}ms\"")
    if not isinstance(value, str):
        raise ConfigError(path, f"expected a time string like '100us', got {type(value).__name__}")
    m = _TIME_RE.match(value.strip())
    if not m:
        raise ConfigError(path, f"cannot parse time {value!r}; use <number><ns|us|ms|s>")
    try:
        quantity = Fraction(Decimal(m.group(1))) * _TIME_SCALE[m.group(2)]
    except InvalidOperation:
        raise ConfigError(path, f"cannot parse time {value!r}")
    if quantity.denominator != 1:
        raise ConfigError(path, f"{value!r} is not a whole number of nanoseconds")
    return int(quantity)


def _expect_dict(value, path: str) -> dict:
    if not isinstance(value, dict):
        raise ConfigError(path, f"expected an object, got {type(value).__name__}")
    return value


def _expect_list(value, path: str) -> list:
    if not isinstance(value, list):
        raise ConfigError(path, f"expected an array, got {type(value).__name__}")
    return value


def _reject_unknown(doc: dict, allowed, path: str) -> None:
    unknown = set(doc) - set(allowed)
    if unknown:
        name = sorted(unknown)[0]
        raise ConfigError(f"{path}.{name}" if path else name, "unknown field")


def _number(value, path: str, *, integer: bool = False):
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(path, f"expected a number, got {type(value).__name__}")
    if integer:
        if isinstance(value, float) and not value.is_integer():
            raise ConfigError(path, "expected an integer")
        return int(value)
    return value


@dataclass(frozen=True)
class MachineConfig:
    name: str
    role: str  # "grandmaster" | "machine"
    clock: ClockModel
    source: Optional[GrandmasterSource]
    timer_resolution_ns: int
    delivery_latency_cycles: int
    sensors: Tuple[SensorSpec, ...]


@dataclass(frozen=True)
class ScenarioConfig:
    seed: int
    duration_ns: int
    protocol: str
    servo: ServoConfig
    stamp_noise: StampNoiseModel
    machines: Tuple[MachineConfig, ...]
    links: Tuple[Tuple[str, str, LinkModel], ...]
    tolerance_queries: Tuple[ToleranceQuery, ...]
    speed_observations: Tuple[SpeedObservation, ...]
    steady_state_after_ns: int
    echo: dict = field(compare=False, default_factory=dict)

    @property
    def grandmaster(self) -> MachineConfig:
        return next(m for m in self.machines if m.role == "grandmaster")

    @property
    def slaves(self) -> List[MachineConfig]:
        return [m for m in self.machines if m.role != "grandmaster"]

    def with_seed(self, seed: int) -> "ScenarioConfig":
        echo = dict(self.echo)
        echo["seed"] = seed
        return replace(self, seed=seed, echo=echo)


def _parse_jitter(doc, path: str) -> Jitter:
    if doc is None:
        return Jitter.none()
    doc = _expect_dict(doc, path)
    kind = doc.get("kind", "none")
    if kind == "none":
        _reject_unknown(doc, {"kind"}, path)
        return Jitter.none()
    if kind == "uniform":
        _reject_unknown(doc, {"kind", "half_width"}, path)
        if "half_width" not in doc:
            raise ConfigError(f"{path}.half_width", "required for uniform jitter")
        return Jitter.uniform(parse_time_ns(doc["half_width"], f"{path}.half_width"))
    if kind == "range":
        _reject_unknown(doc, {"kind", "low", "high"}, path)
        for key in ("low", "high"):
            if key not in doc:
                raise ConfigError(f"{path}.{key}", "required for range jitter")
        low = parse_time_ns(doc["low"], f"{path}.low")
        high = parse_time_ns(doc["high"], f"{path}.high")
        if low > high:
            raise ConfigError(path, "range jitter needs low <= high")
        return Jitter.uniform_range(low, high)
    if kind == "exponential":
        _reject_unknown(doc, {"kind", "mean"}, path)
        if "mean" not in doc:
            raise ConfigError(f"{path}.mean", "required for exponential jitter")
        mean = parse_time_ns(doc["mean"], f"{path}.mean")
        if mean <= 0:
            raise ConfigError(f"{path}.mean", "must be > 0")
        return Jitter.exponential(mean)
    raise ConfigError(f"{path}.kind", f"unknown jitter kind {kind!r}")


def _parse_noise(doc, path: str, default: StampNoiseModel) -> StampNoiseModel:
    if doc is None:
        return default
    doc = _expect_dict(doc, path)
    _reject_unknown(doc, {"base", "jitter"}, path)
    base = parse_time_ns(doc["base"], f"{path}.base") if "base" in doc else 0
    if base < 0:
        raise ConfigError(f"{path}.base", "must be >= 0")
    return StampNoiseModel(base, _parse_jitter(doc.get("jitter"), f"{path}.jitter"))


def _parse_clock(doc, path: str) -> ClockModel:
    if doc is None:
        return ClockModel()
    doc = _expect_dict(doc, path)
    _reject_unknown(
        doc, {"initial_offset", "drift_ppm", "read_jitter", "slew_rate_limit_ppm"}, path
    )
    kwargs = {}
    if "initial_offset" in doc:
        kwargs["initial_offset_ns"] = parse_time_ns(doc["initial_offset"], f"{path}.initial_offset")
    if "drift_ppm" in doc:
        kwargs["drift_ppm"] = _number(doc["drift_ppm"], f"{path}.drift_ppm")
    if "read_jitter" in doc:
        kwargs["read_jitter_ns"] = parse_time_ns(doc["read_jitter"], f"{path}.read_jitter")
    if "slew_rate_limit_ppm" in doc:
        kwargs["slew_rate_limit_ppm"] = _number(doc["slew_rate_limit_ppm"], f"{path}.slew_rate_limit_ppm")
    try:
        return ClockModel(**kwargs)
    except ValueError as exc:
        raise ConfigError(path, str(exc))


def _parse_sensor(doc, path: str) -> SensorSpec:
    doc = _expect_dict(doc, path)
    allowed = {
        "name", "kind", "rate_hz", "interface", "trigger_path",
        "trigger_path_noise", "stamping", "interface_latency", "host_latency",
        "internal_clock",
    }
    _reject_unknown(doc, allowed, path)
    if "name" not in doc:
        raise ConfigError(f"{path}.name", "required")
    kwargs = {"name": doc["name"]}
    for key in ("kind", "interface", "trigger_path", "stamping"):
        if key in doc:
            kwargs[key] = doc[key]
    if "rate_hz" in doc:
        kwargs["rate_hz"] = _number(doc["rate_hz"], f"{path}.rate_hz", integer=True)
    if "trigger_path_noise" in doc:
        kwargs["trigger_path_noise"] = _parse_noise(
            doc["trigger_path_noise"], f"{path}.trigger_path_noise", HOST_TRIGGER_NOISE_DEFAULT
        )
    if "interface_latency" in doc:
        kwargs["interface_latency"] = _parse_noise(
            doc["interface_latency"], f"{path}.interface_latency", INTERFACE_LATENCY_DEFAULT
        )
    if "host_latency" in doc:
        kwargs["host_latency"] = _parse_noise(
            doc["host_latency"], f"{path}.host_latency", HOST_LATENCY_DEFAULT
        )
    if "internal_clock" in doc and doc["internal_clock"] is not None:
        kwargs["internal_clock"] = _parse_clock(doc["internal_clock"], f"{path}.internal_clock")
    try:
        return SensorSpec(**kwargs)
    except (ValueError, TypeError) as exc:
        raise ConfigError(path, str(exc))


def _parse_machine(doc, path: str) -> MachineConfig:
    doc = _expect_dict(doc, path)
    allowed = {"name", "role", "clock", "source", "timer", "sensors"}
    _reject_unknown(doc, allowed, path)
    if "name" not in doc or not isinstance(doc["name"], str) or not doc["name"]:
        raise ConfigError(f"{path}.name", "required non-empty string")
    role = doc.get("role", "machine")
    if role not in ("machine", "grandmaster"):
        raise ConfigError(f"{path}.role", f"must be 'machine' or 'grandmaster', got {role!r}")

    source = None
    if role == "grandmaster":
        if "clock" in doc:
            raise ConfigError(f"{path}.clock", "the grandmaster's clock is ideal by definition; remove it")
        src = _expect_dict(doc.get("source", {}), f"{path}.source")
        _reject_unknown(src, {"kind", "epoch_offset"}, f"{path}.source")
        kind = src.get("kind", "gps")
        epoch = parse_time_ns(src["epoch_offset"], f"{path}.source.epoch_offset") if "epoch_offset" in src else 0
        try:
            source = GrandmasterSource(kind, epoch)
        except ValueError as exc:
            raise ConfigError(f"{path}.source", str(exc))
        clock = ClockModel(initial_offset_ns=epoch)
    else:
        if "source" in doc:
            raise ConfigError(f"{path}.source", "only the grandmaster declares a time source")
        clock = _parse_clock(doc.get("clock"), f"{path}.clock")

    timer = _expect_dict(doc.get("timer", {}), f"{path}.timer")
    _reject_unknown(timer, {"resolution", "delivery_latency_cycles"}, f"{path}.timer")
    resolution = DEFAULT_TIMER_RESOLUTION_NS
    if "resolution" in timer:
        resolution = parse_time_ns(timer["resolution"], f"{path}.timer.resolution")
        if resolution <= 0:
            raise ConfigError(f"{path}.timer.resolution", "must be > 0")
    cycles = DEFAULT_DELIVERY_LATENCY_CYCLES
    if "delivery_latency_cycles" in timer:
        cycles = _number(timer["delivery_latency_cycles"], f"{path}.timer.delivery_latency_cycles", integer=True)
        if cycles < 0:
            raise ConfigError(f"{path}.timer.delivery_latency_cycles", "must be >= 0")

    sensors = []
    seen = set()
    for i, sensor_doc in enumerate(_expect_list(doc.get("sensors", []), f"{path}.sensors")):
        spec = _parse_sensor(sensor_doc, f"{path}.sensors[{i}]")
        if spec.name in seen:
            raise ConfigError(f"{path}.sensors[{i}].name", f"duplicate sensor name {spec.name!r}")
        seen.add(spec.name)
        sensors.append(spec)
    try:
        validate_rates(sensors)
    except RateError as exc:
        raise ConfigError(f"{path}.sensors", str(exc))

    return MachineConfig(
        name=doc["name"],
        role=role,
        clock=clock,
        source=source,
        timer_resolution_ns=resolution,
        delivery_latency_cycles=cycles,
        sensors=tuple(sensors),
    )


def _parse_link(doc, path: str, machine_names) -> Tuple[str, str, LinkModel]:
    doc = _expect_dict(doc, path)
    _reject_unknown(doc, {"a", "b", "delay", "reverse_delay", "jitter", "drop_probability"}, path)
    for key in ("a", "b"):
        if key not in doc:
            raise ConfigError(f"{path}.{key}", "required")
        if doc[key] not in machine_names:
            raise ConfigError(f"{path}.{key}", f"unknown machine {doc[key]!r}")
    if doc["a"] == doc["b"]:
        raise ConfigError(path, "a link must connect two different machines")
    delay = parse_time_ns(doc["delay"], f"{path}.delay") if "delay" in doc else 100_000
    reverse = parse_time_ns(doc["reverse_delay"], f"{path}.reverse_delay") if "reverse_delay" in doc else delay
    if delay < 0 or reverse < 0:
        raise ConfigError(f"{path}.delay", "link delays must be >= 0")
    drop = 0.0
    if "drop_probability" in doc:
        drop = _number(doc["drop_probability"], f"{path}.drop_probability")
        if not 0.0 <= drop <= 1.0:
            raise ConfigError(f"{path}.drop_probability", "must be in [0, 1]")
    jitter = _parse_jitter(doc.get("jitter"), f"{path}.jitter")
    return doc["a"], doc["b"], LinkModel(delay, reverse, jitter, drop)


def _parse_impact(doc, path: str):
    doc = _expect_dict(doc, path)
    _reject_unknown(doc, {"tolerance", "speed"}, path)
    tolerance = []
    for i, q in enumerate(_expect_list(doc.get("tolerance", []), f"{path}.tolerance")):
        q = _expect_dict(q, f"{path}.tolerance[{i}]")
        _reject_unknown(q, {"velocity_mps", "iou_threshold", "object_length_m"}, f"{path}.tolerance[{i}]")
        for key in ("velocity_mps", "iou_threshold"):
            if key not in q:
                raise ConfigError(f"{path}.tolerance[{i}].{key}", "required")
        try:
            tolerance.append(ToleranceQuery(
                _number(q["velocity_mps"], f"{path}.tolerance[{i}].velocity_mps"),
                _number(q["iou_threshold"], f"{path}.tolerance[{i}].iou_threshold"),
                _number(q.get("object_length_m", 4.09), f"{path}.tolerance[{i}].object_length_m"),
            ))
        except Exception as exc:
            raise ConfigError(f"{path}.tolerance[{i}]", str(exc))
    speed = []
    for i, s in enumerate(_expect_list(doc.get("speed", []), f"{path}.speed")):
        s = _expect_dict(s, f"{path}.speed[{i}]")
        _reject_unknown(s, {"p1", "p2", "t1", "t2", "sync_error"}, f"{path}.speed[{i}]")
        for key in ("p1", "p2", "t1", "t2", "sync_error"):
            if key not in s:
                raise ConfigError(f"{path}.speed[{i}].{key}", "required")
        for key in ("p1", "p2"):
            p = _expect_list(s[key], f"{path}.speed[{i}].{key}")
            if len(p) not in (2, 3) or not all(isinstance(x, (int, float)) and not isinstance(x, bool) for x in p):
                raise ConfigError(f"{path}.speed[{i}].{key}", "expected [x, y] or [x, y, z] numbers")
        t1 = parse_time_ns(s["t1"], f"{path}.speed[{i}].t1") / 1e6
        t2 = parse_time_ns(s["t2"], f"{path}.speed[{i}].t2") / 1e6
        dt = parse_time_ns(s["sync_error"], f"{path}.speed[{i}].sync_error") / 1e6
        try:
            speed.append(SpeedObservation(tuple(s["p1"]), tuple(s["p2"]), t1, t2, dt))
        except Exception as exc:
            raise ConfigError(f"{path}.speed[{i}]", str(exc))
    return tuple(tolerance), tuple(speed)


def parse_config(document: dict) -> ScenarioConfig:
    """Validate a scenario document and fill every default.

    Raises ConfigError with the path of the first offending field.
    """
    doc = _expect_dict(document, "")
    allowed = {
        "schema", "seed", "duration", "protocol", "servo", "stamp_noise",
        "machines", "links", "impact", "analysis",
    }
    _reject_unknown(doc, allowed, "")

    if doc.get("schema") != SCHEMA_VERSION:
        raise ConfigError("schema", f"expected schema {SCHEMA_VERSION}, got {doc.get('schema')!r}")
    seed = _number(doc.get("seed", 0), "seed", integer=True)
    if "duration" not in doc:
        raise ConfigError("duration", "required")
    duration = parse_time_ns(doc["duration"], "duration")
    if duration <= 0:
        raise ConfigError("duration", "must be > 0")

    protocol = doc.get("protocol", "ptp")
    if protocol not in PROTOCOLS:
        raise ConfigError("protocol", f"must be one of {', '.join(PROTOCOLS)}")

    servo_doc = _expect_dict(doc.get("servo", {}), "servo")
    _reject_unknown(servo_doc, {"kp", "ki", "step_threshold", "sync_interval"}, "servo")
    try:
        servo = ServoConfig(
            kp=_number(servo_doc.get("kp", 0.7), "servo.kp"),
            ki=_number(servo_doc.get("ki", 0.3), "servo.ki"),
            step_threshold_ns=(
                parse_time_ns(servo_doc["step_threshold"], "servo.step_threshold")
                if "step_threshold" in servo_doc else 1_000_000
            ),
            sync_interval_ns=(
                parse_time_ns(servo_doc["sync_interval"], "servo.sync_interval")
                if "sync_interval" in servo_doc else 1_000_000_000
            ),
        )
    except ValueError as exc:
        raise ConfigError("servo", str(exc))

    stamp_noise = _parse_noise(doc.get("stamp_noise"), "stamp_noise", default_stamp_noise(protocol))

    machines: List[MachineConfig] = []
    names = set()
    machine_docs = _expect_list(doc.get("machines", []), "machines")
    if not machine_docs:
        raise ConfigError("machines", "at least one machine (the grandmaster) is required")
    for i, machine_doc in enumerate(machine_docs):
        machine = _parse_machine(machine_doc, f"machines[{i}]")
        if machine.name in names:
            raise ConfigError(f"machines[{i}].name", f"duplicate machine name {machine.name!r}")
        names.add(machine.name)
        machines.append(machine)
    grandmasters = [m for m in machines if m.role == "grandmaster"]
    if len(grandmasters) != 1:
        raise ConfigError("machines", f"exactly one grandmaster required, found {len(grandmasters)}")
    gm_name = grandmasters[0].name

    links: List[Tuple[str, str, LinkModel]] = []
    linked = set()
    for i, link_doc in enumerate(_expect_list(doc.get("links", []), "links")):
        a, b, model = _parse_link(link_doc, f"links[{i}]", names)
        if gm_name not in (a, b):
            raise ConfigError(f"links[{i}]", "every link must connect a machine to the grandmaster")
        slave = b if a == gm_name else a
        if slave in linked:
            raise ConfigError(f"links[{i}]", f"machine {slave!r} already has a link")
        linked.add(slave)
        links.append((a, b, model))
    for m in machines:
        if m.role != "grandmaster" and m.name not in linked:
            raise ConfigError("links", f"machine {m.name!r} has no link to the grandmaster")

    tolerance, speed = _parse_impact(doc.get("impact", {}), "impact")

    analysis = _expect_dict(doc.get("analysis", {}), "analysis")
    _reject_unknown(analysis, {"steady_state_after"}, "analysis")
    if "steady_state_after" in analysis:
        steady_after = parse_time_ns(analysis["steady_state_after"], "analysis.steady_state_after")
        if not 0 <= steady_after < duration:
            raise ConfigError("analysis.steady_state_after", "must be in [0, duration)")
    else:
        steady_after = duration // 3

    config = ScenarioConfig(
        seed=seed,
        duration_ns=duration,
        protocol=protocol,
        servo=servo,
        stamp_noise=stamp_noise,
        machines=tuple(machines),
        links=tuple(links),
        tolerance_queries=tolerance,
        speed_observations=speed,
        steady_state_after_ns=steady_after,
        echo={},
    )
    return replace(config, echo=_echo(config))


def load_config(path) -> ScenarioConfig:
    """Read and parse a scenario document from a JSON file."""
    text = Path(path).read_text(encoding="utf-8")
    try:
        document = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(str(path), f"not valid JSON: {exc}")
    return parse_config(document)


def _num_echo(value):
    f = Fraction(value)
    return int(f) if f.denominator == 1 else float(f)


def _noise_echo(noise: StampNoiseModel) -> dict:
    return {"base_latency_ns": noise.base_latency_ns, "jitter": noise.jitter.to_config()}


def _clock_echo(clock: ClockModel) -> dict:
    return {
        "initial_offset_ns": clock.initial_offset_ns,
        "drift_ppm": _num_echo(clock.drift_ppm),
        "read_jitter_ns": clock.read_jitter_ns,
        "slew_rate_limit_ppm": _num_echo(clock.slew_rate_limit_ppm),
    }


def _sensor_echo(spec: SensorSpec) -> dict:
    out = {
        "name": spec.name,
        "kind": spec.kind,
        "rate_hz": spec.rate_hz,
        "interface": spec.interface,
        "stamping": spec.stamping,
        "interface_latency": _noise_echo(spec.interface_latency),
        "host_latency": _noise_echo(spec.host_latency),
    }
    if spec.kind == "external":
        out["trigger_path"] = spec.trigger_path
        out["trigger_path_noise"] = _noise_echo(spec.trigger_path_noise)
    else:
        out["internal_clock"] = _clock_echo(spec.effective_internal_clock)
    return out


def _echo(config: ScenarioConfig) -> dict:
    """The fully-defaulted document: every effective parameter, explicitly."""
    machines = []
    for m in config.machines:
        entry = {
            "name": m.name,
            "role": m.role,
            "timer": {
                "resolution_ns": m.timer_resolution_ns,
                "delivery_latency_cycles": m.delivery_latency_cycles,
            },
            "sensors": [_sensor_echo(s) for s in m.sensors],
        }
        if m.role == "grandmaster":
            entry["source"] = {"kind": m.source.kind, "epoch_offset_ns": m.source.epoch_offset_ns}
        else:
            entry["clock"] = _clock_echo(m.clock)
        machines.append(entry)
    return {
        "schema": SCHEMA_VERSION,
        "seed": config.seed,
        "duration_ns": config.duration_ns,
        "protocol": config.protocol,
        "servo": {
            "kp": config.servo.kp,
            "ki": config.servo.ki,
            "step_threshold_ns": config.servo.step_threshold_ns,
            "sync_interval_ns": config.servo.sync_interval_ns,
        },
        "stamp_noise": _noise_echo(config.stamp_noise),
        "machines": machines,
        "links": [
            {
                "a": a,
                "b": b,
                "delay_forward_ns": model.delay_forward_ns,
                "delay_reverse_ns": model.delay_reverse_ns,
                "jitter": model.jitter.to_config(),
                "drop_probability": model.drop_probability,
            }
            for a, b, model in config.links
        ],
        "impact": {
            "tolerance": [
                {
                    "velocity_mps": q.velocity_mps,
                    "iou_threshold": q.iou_threshold,
                    "object_length_m": q.object_length_m,
                }
                for q in config.tolerance_queries
            ],
            "speed": [
                {
                    "p1": list(obs.p1),
                    "p2": list(obs.p2),
                    "t1_ms": obs.t1_ms,
                    "t2_ms": obs.t2_ms,
                    "delta_t_ms": obs.delta_t_ms,
                }
                for obs in config.speed_observations
            ],
        },
        "analysis": {"steady_state_after_ns": config.steady_state_after_ns},
    }
