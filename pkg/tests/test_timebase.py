"""Clock mapping, correction, and inversion tests."""

import random

import pytest
from hypothesis import given, settings, strategies as st

from syncsim.errors import NonInvertibleClock
from syncsim.timebase import ClockModel, ClockState, CorrectionMode, TrueTime

SEC = 1_000_000_000


def state(**kwargs) -> ClockState:
    return ClockState(model=ClockModel(**kwargs))


class TestLocalFromTrue:
    def test_identity_clock(self):
        assert state().local_from_true(TrueTime(SEC)) == SEC

    def test_pure_offset(self):
        s = state(initial_offset_ns=5_000)
        assert s.local_from_true(TrueTime(SEC)) == SEC + 5_000

    def test_drift_100ppm_over_10s(self):
        # 10 s * 100e-6 = 1 ms ahead
        s = state(drift_ppm=100)
        assert s.local_from_true(TrueTime(10 * SEC)) == 10 * SEC + 1_000_000

    def test_fractional_drift_rounds_half_away(self):
        s = state(drift_ppm=0.5)
        # 1 ns * 0.5e-6 rounds to 0; 1 s * 0.5e-6 = 500 ns exactly
        assert s.local_from_true(TrueTime(1)) == 1
        assert s.local_from_true(TrueTime(SEC)) == SEC + 500


class TestTrueFromLocal:
    def test_inverts_examples(self):
        assert state().true_from_local(SEC) == SEC
        assert state(initial_offset_ns=5_000).true_from_local(SEC + 5_000) == SEC
        got = state(drift_ppm=100).true_from_local(10 * SEC + 1_000_000)
        assert abs(got - 10 * SEC) <= 1

    def test_roundtrip_10k_random_models(self):
        rng = random.Random(1234)
        for _ in range(10_000):
            s = state(
                initial_offset_ns=rng.randint(-10**9, 10**9),
                drift_ppm=rng.randint(-9999, 9999) + rng.random(),
            )
            t = TrueTime(rng.randint(0, 10**15))
            back = s.true_from_local(s.local_from_true(t))
            assert abs(back - t) <= 1

    def test_roundtrip_through_slew_regime(self):
        s = state(drift_ppm=250).apply_correction(
            123_456, CorrectionMode.SLEW, TrueTime(10 * SEC)
        )
        for t in (0, 10 * SEC, 10 * SEC + 1, 11 * SEC, 300 * SEC):
            local = s.local_from_true(TrueTime(t))
            assert abs(s.true_from_local(local) - t) <= 1

    def test_non_invertible_when_slew_overwhelms_rate(self):
        model = ClockModel(slew_rate_limit_ppm=2_000_000)
        s = ClockState(model=model).apply_correction(
            1_000_000, CorrectionMode.SLEW, TrueTime(0)
        )
        with pytest.raises(NonInvertibleClock):
            s.true_from_local(-100)


class TestApplyCorrection:
    def test_step_zero_is_noop(self):
        s = state()
        assert s.apply_correction(0, CorrectionMode.STEP, TrueTime(SEC)) is s

    def test_step_shifts_reads(self):
        s = state().apply_correction(1_000_000, CorrectionMode.STEP, TrueTime(0))
        assert s.local_from_true(TrueTime(SEC)) == SEC - 1_000_000

    def test_slew_100us_at_500ppm_absorbed_in_200ms(self):
        s = state().apply_correction(100_000, CorrectionMode.SLEW, TrueTime(0))
        assert s.local_from_true(TrueTime(100_000_000)) == 100_000_000 - 50_000
        assert s.local_from_true(TrueTime(200_000_000)) == 200_000_000 - 100_000
        # fully absorbed: later reads keep the full correction
        assert s.local_from_true(TrueTime(SEC)) == SEC - 100_000

    def test_slew_preserves_monotonicity_step_may_not(self):
        slewed = state().apply_correction(10_000, CorrectionMode.SLEW, TrueTime(0))
        reads = [slewed.local_from_true(TrueTime(t)) for t in range(0, 10**8, 10**6)]
        assert all(b > a for a, b in zip(reads, reads[1:]))

        before = state().local_from_true(TrueTime(SEC - 1))
        stepped = state().apply_correction(10_000, CorrectionMode.STEP, TrueTime(SEC))
        assert stepped.local_from_true(TrueTime(SEC)) < before

    def test_new_correction_folds_absorbed_part(self):
        s = state().apply_correction(100_000, CorrectionMode.SLEW, TrueTime(0))
        # half absorbed at 100 ms; re-correct there
        s2 = s.apply_correction(0, CorrectionMode.SLEW, TrueTime(100_000_000))
        assert s2.accumulated_correction_ns == -50_000
        assert s2.pending_slew is None


class TestInvariants:
    def test_monotonic_with_slew_only_corrections(self):
        rng = random.Random(7)
        s = state(drift_ppm=80)
        t = 0
        reads = []
        for _ in range(200):
            t += rng.randint(10, 10**7)
            reads.append(s.local_from_true(TrueTime(t)))
            if rng.random() < 0.1:
                s = s.apply_correction(rng.randint(0, 5_000), CorrectionMode.SLEW, TrueTime(t))
        assert all(b > a for a, b in zip(reads, reads[1:]))

    def test_drift_linearity(self):
        rng = random.Random(99)
        for _ in range(500):
            drift = rng.randint(-5000, 5000)
            s = state(drift_ppm=drift, initial_offset_ns=rng.randint(-10**6, 10**6))
            t1 = rng.randint(0, 10**12)
            t2 = t1 + rng.randint(1, 10**12)
            got = s.local_from_true(TrueTime(t2)) - s.local_from_true(TrueTime(t1))
            want = (t2 - t1) + (t2 - t1) * drift // 1_000_000
            assert abs(got - want) <= 1

    @given(
        offset=st.integers(-10**12, 10**12),
        drift=st.fractions(-9999, 9999),
        t=st.integers(0, 10**15),
    )
    @settings(max_examples=200, deadline=None)
    def test_roundtrip_property(self, offset, drift, t):
        s = state(initial_offset_ns=offset, drift_ppm=drift)
        assert abs(s.true_from_local(s.local_from_true(TrueTime(t))) - t) <= 1


class TestReadJitter:
    def test_draw_is_bounded_and_reproducible(self):
        s = ClockState(model=ClockModel(read_jitter_ns=100), seed=5)
        ideal = ClockState(model=ClockModel())
        draws = []
        for t in range(0, 10_000, 7):
            value = s.local_from_true(TrueTime(t))
            assert value == s.local_from_true(TrueTime(t))  # same instant, same draw
            draws.append(value - ideal.local_from_true(TrueTime(t)))
        assert all(-100 <= d <= 100 for d in draws)
        assert len(set(draws)) > 50  # actually noisy

    def test_jitter_excluded_from_inverse_path(self):
        s = ClockState(model=ClockModel(read_jitter_ns=1_000), seed=9)
        clean = s.local_from_true(TrueTime(123_456_789), with_jitter=False)
        assert s.true_from_local(clean) == 123_456_789


class TestModelValidation:
    def test_drift_bound(self):
        with pytest.raises(ValueError):
            ClockModel(drift_ppm=10_000)

    def test_negative_jitter_rejected(self):
        with pytest.raises(ValueError):
            ClockModel(read_jitter_ns=-1)
