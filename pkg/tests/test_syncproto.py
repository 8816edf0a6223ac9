"""Estimator, servo, and sync-session tests."""

import random

import pytest

from syncsim.errors import ConfigError
from syncsim.simnet import Jitter, LinkModel
from syncsim.syncproto import (
    GrandmasterSource,
    OffsetErrorSeries,
    ServoConfig,
    ServoState,
    StampNoiseModel,
    SyncExchange,
    SyncTopology,
    ntp_style_session,
    offset_and_delay,
    run_sync_session,
    servo_update,
)
from syncsim.timebase import ClockModel, CorrectionMode

US = 1_000
MS = 1_000_000
SEC = 1_000_000_000


def topo(clock=None, link=None, gm=None, name="m1"):
    return SyncTopology(
        grandmaster=gm or GrandmasterSource(),
        clocks={name: clock or ClockModel()},
        links={name: link or LinkModel(100 * US)},
    )


class TestOffsetAndDelay:
    def test_symmetric_zero_offset(self):
        x = SyncExchange(0, 10 * US, 20 * US, 30 * US)
        assert offset_and_delay(x) == (0, 10 * US)

    def test_slave_ahead_5us_symmetric(self):
        x = SyncExchange(0, 15 * US, 20 * US, 25 * US)
        assert offset_and_delay(x) == (5 * US, 10 * US)

    def test_asymmetric_bias(self):
        # forward 10 us, reverse 20 us, true offset 0
        x = SyncExchange(0, 10 * US, 30 * US, 50 * US)
        assert offset_and_delay(x) == (-5 * US, 15 * US)

    def test_symmetric_recovery_exact_10k_cases(self):
        rng = random.Random(2024)
        for _ in range(10_000):
            offset = rng.randint(-10**9, 10**9)
            delay = rng.randint(0, 10**7)
            gap = rng.randint(0, 10**6)
            t1 = rng.randint(0, 10**12)
            t2 = t1 + delay + offset
            t3 = t2 + gap
            t4 = t3 - offset + delay
            got_offset, got_delay = offset_and_delay(SyncExchange(t1, t2, t3, t4))
            assert got_offset == offset
            assert got_delay == delay

    def test_asymmetry_bias_equals_half_delay_difference(self):
        rng = random.Random(77)
        for _ in range(10_000):
            offset = rng.randint(-10**6, 10**6)
            forward = rng.randint(0, 10**7)
            reverse = rng.randint(0, 10**7)
            t1 = rng.randint(0, 10**12)
            t2 = t1 + forward + offset
            t3 = t2 + rng.randint(0, 10**6)
            t4 = t3 - offset + reverse
            est, _ = offset_and_delay(SyncExchange(t1, t2, t3, t4))
            bias_twice = 2 * (offset - est)  # exact: (reverse - forward)
            if (reverse - forward) % 2 == 0:
                assert bias_twice == reverse - forward
            else:
                assert abs(bias_twice - (reverse - forward)) <= 1

    def test_halving_rounds_half_away_from_zero(self):
        assert offset_and_delay(SyncExchange(0, 3, 0, 0))[0] == 2  # 1.5 -> 2
        assert offset_and_delay(SyncExchange(0, 0, 0, 3))[0] == -2  # -1.5 -> -2


class TestServo:
    def test_zero_offset_no_correction(self):
        correction, state = servo_update(ServoConfig(), ServoState(), 0)
        assert correction is None
        assert state.integral_ns == 0

    def test_pi_law_small_offset_slews(self):
        correction, state = servo_update(ServoConfig(kp=0.7, ki=0.3), ServoState(), 100 * US)
        assert correction.mode is CorrectionMode.SLEW
        assert correction.amount_ns == 70 * US
        assert state.integral_ns == 100 * US

    def test_integral_term_feeds_in(self):
        cfg = ServoConfig(kp=0.7, ki=0.3)
        correction, _ = servo_update(cfg, ServoState(integral_ns=100 * US), 10 * US)
        assert correction.amount_ns == int(0.7 * 10 * US + 0.3 * 100 * US)

    def test_offset_beyond_threshold_steps_in_full(self):
        cfg = ServoConfig(step_threshold_ns=MS)
        correction, state = servo_update(cfg, ServoState(integral_ns=123.0), 2 * MS)
        assert correction.mode is CorrectionMode.STEP
        assert correction.amount_ns == 2 * MS
        assert state.integral_ns == 0  # integrator resets on step

    def test_slew_rate_spreads_over_interval(self):
        correction, _ = servo_update(ServoConfig(), ServoState(), 100 * US)
        # 70 us over 1 s = 70 ppm
        assert correction.slew_rate_ppm == 70


class TestRunSyncSession:
    def test_ideal_conditions_error_zero_from_first_exchange(self):
        # initial offset above the step threshold: first exchange steps it out
        series = run_sync_session(
            topo(clock=ClockModel(initial_offset_ns=5 * MS)), 20 * SEC, seed=3
        )["m1"]
        assert len(series.samples) == 20
        assert series.errors() == [0] * 20

    def test_constant_asymmetry_converges_to_minus_a(self):
        # forward - reverse = 2a with a = -5 us; steady error -> -a = +5 us
        link = LinkModel(delay_forward_ns=10 * US, delay_reverse_ns=20 * US)
        series = run_sync_session(topo(link=link), 120 * SEC, seed=3)["m1"]
        tail = series.errors()[-10:]
        assert all(abs(e - 5 * US) <= 2 for e in tail)

    def test_servo_tracks_drift_within_interval_budget(self):
        series = run_sync_session(
            topo(clock=ClockModel(drift_ppm=100)), 120 * SEC, seed=5
        )["m1"]
        budget = 100 * US + 2  # drift * sync interval + 2 quantization units
        assert all(abs(e) <= budget for e in series.errors()[-60:])

    def test_slave_converges_to_grandmaster_timescale(self):
        gm = GrandmasterSource(kind="sclk", epoch_offset_ns=3 * MS)
        series = run_sync_session(
            topo(clock=ClockModel(initial_offset_ns=-2 * MS), gm=gm), 30 * SEC, seed=9
        )["m1"]
        assert all(e == 0 for e in series.errors()[-10:])

    def test_accuracy_under_drift_and_stamp_jitter(self):
        # 50 ppm drift, 100 us symmetric delay, +/-50 us stamp jitter:
        # steady state lands in the 100 us range
        noise = StampNoiseModel(0, Jitter.uniform(50 * US))
        for seed in range(3):
            series = run_sync_session(
                topo(clock=ClockModel(initial_offset_ns=5 * MS, drift_ppm=50)),
                300 * SEC, noise=noise, seed=seed,
            )["m1"]
            assert series.window(100 * SEC).p95_abs() < 100 * US

    def test_dropped_messages_skip_rounds(self):
        link = LinkModel(100 * US, drop_probability=0.5)
        series = run_sync_session(topo(link=link), 60 * SEC, seed=8)["m1"]
        assert 0 < len(series.samples) < 60

    def test_unreachable_slave_rejected(self):
        broken = SyncTopology(
            grandmaster=GrandmasterSource(),
            clocks={"m1": ClockModel(), "m2": ClockModel()},
            links={"m1": LinkModel(100 * US)},
        )
        with pytest.raises(ConfigError):
            run_sync_session(broken, SEC)

    def test_unknown_protocol_rejected(self):
        with pytest.raises(ConfigError):
            run_sync_session(topo(), SEC, protocol="smtp")

    def test_two_slaves_independent_streams(self):
        two = SyncTopology(
            grandmaster=GrandmasterSource(),
            clocks={"m1": ClockModel(drift_ppm=50), "m2": ClockModel(drift_ppm=-30)},
            links={"m1": LinkModel(100 * US), "m2": LinkModel(200 * US)},
        )
        series = run_sync_session(two, 30 * SEC, seed=4)
        assert set(series) == {"m1", "m2"}
        assert len(series["m1"].samples) == len(series["m2"].samples) == 30


class TestNtpStyleSession:
    def test_zero_noise_degenerates_to_ptp(self):
        t = topo(clock=ClockModel(initial_offset_ns=5 * MS, drift_ppm=50))
        ptp = run_sync_session(t, 30 * SEC, seed=7, noise=StampNoiseModel())["m1"]
        ntp = ntp_style_session(t, 30 * SEC, seed=7, noise=StampNoiseModel())["m1"]
        assert ptp.samples == ntp.samples

    def test_default_noise_lands_in_millisecond_range(self):
        series = ntp_style_session(topo(), 300 * SEC, seed=1)["m1"]
        steady = series.window(100 * SEC)
        assert MS < steady.p95_abs() < 40 * MS

    def test_ptp_median_at_least_10x_better(self):
        for seed in range(3):
            t = topo(clock=ClockModel(initial_offset_ns=5 * MS, drift_ppm=50))
            ptp = run_sync_session(
                t, 300 * SEC, seed=seed, noise=StampNoiseModel(0, Jitter.uniform(50 * US))
            )["m1"].window(100 * SEC)
            ntp = ntp_style_session(t, 300 * SEC, seed=seed)["m1"].window(100 * SEC)
            assert ptp.median_abs() < ntp.median_abs() / 10


class TestOffsetErrorSeries:
    def test_window_and_stats(self):
        series = OffsetErrorSeries([(0, 10), (SEC, -20), (2 * SEC, 30)])
        assert series.window(SEC).errors() == [-20, 30]
        assert series.max_abs() == 30
        assert series.median_abs() == 20
        assert OffsetErrorSeries([]).p95_abs() == 0

    def test_p95_nearest_rank(self):
        series = OffsetErrorSeries([(i, i) for i in range(1, 101)])
        assert series.p95_abs() == 95
