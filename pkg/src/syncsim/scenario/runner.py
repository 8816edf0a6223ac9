"""End-to-end scenario execution.

One simulator carries everything: protocol rounds discipline each machine's
clock while sensor triggers fire and samples get stamped through whatever
state that clock is in at the moment of stamping. The result is a
deterministic report: summary statistics, impact tables, a config echo, and
the trace hash.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field
from typing import Dict, List

from ..exact import derive_seed
from ..impact import (
    speed_estimate,
    tolerable_sync_error,
    tolerable_sync_error_exact,
    ToleranceQuery,
    SpeedObservation,
)
from ..sensors import (
    HARDWARE,
    HOST_SOFTWARE,
    SampleRecord,
    TriggerSchedule,
    compensate,
    emit_samples,
    generate_trigger_events,
    stamp,
    stamp_residual_ns,
    trigger_skew_ns,
)
from ..simnet import SimulationTrace, Simulator
from ..syncproto import (
    ClockedNode,
    OffsetErrorSeries,
    SyncSession,
    SyncTopology,
)
from ..timebase import ClockModel, ClockState, TrueTime
from .config import SCHEMA_VERSION, ScenarioConfig
from .report import summary_stats


@dataclass
class RunResult:
    """A finished run: the JSON report plus the raw series behind it."""

    report: dict
    offset_series: Dict[str, OffsetErrorSeries] = field(default_factory=dict)
    samples: Dict[str, List[SampleRecord]] = field(default_factory=dict)
    schedules: Dict[str, TriggerSchedule] = field(default_factory=dict)
    trace: SimulationTrace = field(default_factory=SimulationTrace)


def run_scenario(config: ScenarioConfig) -> RunResult:
    """Run one scenario to completion. Equal config and seed give reports
    that are byte-identical under canonical serialization."""
    sim = Simulator(config.seed)
    gm_machine = config.grandmaster
    gm_source = gm_machine.source

    topology = SyncTopology(
        grandmaster=gm_source,
        clocks={m.name: m.clock for m in config.slaves},
        links={(b if a == gm_machine.name else a): model for a, b, model in config.links},
        grandmaster_name=gm_machine.name,
    )
    session = SyncSession(
        sim,
        topology,
        protocol=config.protocol,
        servo=config.servo,
        noise=config.stamp_noise,
    )
    if config.slaves:
        session.start(at=0, until=config.duration_ns)

    nodes: Dict[str, ClockedNode] = dict(session.nodes)
    nodes[gm_machine.name] = ClockedNode(
        gm_machine.name, ClockState(ClockModel(initial_offset_ns=gm_source.epoch_offset_ns))
    )

    schedules: Dict[str, TriggerSchedule] = {}
    stamped: Dict[str, List[SampleRecord]] = {}
    for machine in config.machines:
        if not machine.sensors:
            continue
        schedule = generate_trigger_events(
            list(machine.sensors),
            TrueTime(0),
            config.duration_ns,
            timer_resolution_ns=machine.timer_resolution_ns,
            delivery_latency_cycles=machine.delivery_latency_cycles,
            seed=derive_seed(config.seed, "machine", machine.name, "trigger"),
        )
        schedules[machine.name] = schedule
        specs = {s.name: s for s in machine.sensors}
        rngs = {
            s.name: sim.stream("machine", machine.name, "stamp", s.name)
            for s in machine.sensors
        }
        node = nodes[machine.name]
        for record in emit_samples(schedule, list(machine.sensors)):
            _schedule_sample(sim, machine.name, node, record,
                             specs[record.sensor], rngs[record.sensor], stamped)

    sim.run_until(config.duration_ns)

    report = {
        "schema": SCHEMA_VERSION,
        "seed": config.seed,
        "config": config.echo,
        "sync": _sync_section(config, session),
        "sensors": _sensor_section(config, schedules, stamped, gm_source.epoch_offset_ns),
        "impact": _impact_section(config),
        "trace": {"events": len(sim.trace), "sha256": sim.trace.sha256()},
    }
    return RunResult(
        report=report,
        offset_series=dict(session.series),
        samples=stamped,
        schedules=schedules,
        trace=sim.trace,
    )


def _schedule_sample(sim, machine_name, node, record, spec, rng, stamped) -> None:
    key = f"{machine_name}/{spec.name}"
    stamped.setdefault(key, [])

    def on_sample(inner_sim: Simulator, _event) -> None:
        latency = max(0, spec.stamp_latency(spec.stamping).sample(rng))

        def on_stamp(stamp_sim: Simulator, _ev) -> None:
            # stamp through whatever state the machine clock is in right now
            done = stamp(record, spec, node.clock, latency_ns=latency)
            done = compensate(done, spec.stamp_latency(spec.stamping).base_latency_ns)
            stamped[key].append(done)

        inner_sim.schedule(
            record.event_true_time + latency,
            f"stamp {key} {record.seq}",
            on_stamp,
        )

    sim.schedule(
        record.event_true_time, f"sample {key} {record.seq}", on_sample
    )


def _sync_section(config: ScenarioConfig, session: SyncSession) -> dict:
    out = {}
    for name, series in session.series.items():
        steady = series.window(config.steady_state_after_ns)
        out[name] = {
            "protocol": session.protocol,
            "offset_error_ns": series.summary(),
            "steady_state": {
                "from_ns": config.steady_state_after_ns,
                **steady.summary(),
            },
        }
    return out


def _sensor_section(config, schedules, stamped, reference_offset_ns) -> dict:
    out = {}
    for machine in config.machines:
        if machine.name not in schedules:
            continue
        schedule = schedules[machine.name]
        specs = list(machine.sensors)
        skew = {}
        for path in (HARDWARE, HOST_SOFTWARE):
            values = trigger_skew_ns(schedule, specs, path)
            if values:
                skew[path] = summary_stats(values)
        sensors = {}
        for spec in specs:
            records = stamped.get(f"{machine.name}/{spec.name}", [])
            residuals = [stamp_residual_ns(r, reference_offset_ns) for r in records]
            sensors[spec.name] = {
                "samples": len(records),
                "stamping": spec.stamping,
                "stamp_residual_ns": summary_stats(residuals),
            }
        out[machine.name] = {"trigger_skew_ns": skew, "sensors": sensors}
    return out


def _impact_section(config: ScenarioConfig) -> dict:
    tolerance = []
    for q in config.tolerance_queries:
        tolerance.append({
            "velocity_mps": q.velocity_mps,
            "iou_threshold": q.iou_threshold,
            "object_length_m": q.object_length_m,
            "tolerable_sync_error_ms": tolerable_sync_error(q),
            "tolerable_sync_error_exact_ms": float(tolerable_sync_error_exact(q)),
        })
    speed = []
    for obs in config.speed_observations:
        est = speed_estimate(obs)
        speed.append({
            "p1": list(obs.p1),
            "p2": list(obs.p2),
            "t1_ms": obs.t1_ms,
            "t2_ms": obs.t2_ms,
            "delta_t_ms": obs.delta_t_ms,
            "true_mps": est.true_mps,
            "biased_mps": est.biased_mps,
            "error_mps": est.error_mps,
        })
    return {"tolerance": tolerance, "speed": speed}


def builtin_table1() -> dict:
    """Tolerable sync error (ms) for v in {5, 10, 20, 40} m/s at IoU
    thresholds 0.5 and 0.0, vehicle length 4.09 m."""
    velocities = [5, 10, 20, 40]
    rows = []
    for threshold in (0.5, 0.0):
        rows.append({
            "iou_threshold": threshold,
            "tolerance_ms": [
                tolerable_sync_error(ToleranceQuery(v, threshold)) for v in velocities
            ],
        })
    return {"object_length_m": 4.09, "velocities_mps": velocities, "rows": rows}


def builtin_speed_example() -> dict:
    """The reference roadside-unit speed-estimation case: a 849 ms sync error
    turns a 6.30 m/s track into 2.34 m/s."""
    obs = SpeedObservation(
        p1=(180.388, 463.93),
        p2=(177.235, 463.749),
        t1_ms=6317.0,
        t2_ms=6818.0,
        delta_t_ms=849.0,
    )
    est = speed_estimate(obs)
    return {
        "observation": {
            "p1": list(obs.p1),
            "p2": list(obs.p2),
            "t1_ms": obs.t1_ms,
            "t2_ms": obs.t2_ms,
            "delta_t_ms": obs.delta_t_ms,
        },
        "true_mps": est.true_mps,
        "biased_mps": est.biased_mps,
        "error_mps": est.error_mps,
    }
