"""True simulation time and per-node local clocks.

Time is signed 64-bit-range integer nanoseconds. ``TrueTime`` is the
simulation's ground-truth axis; ``LocalTime`` is what one node's clock reads.
They are distinct static types so cross-assignment is flagged by a type
checker. A clock maps one to the other through a constant offset, a constant
drift in ppm, optional per-read uniform jitter, and servo corrections applied
either as an immediate step or as a rate-limited slew.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, replace
from fractions import Fraction
from typing import NewType, Optional

from .errors import NonInvertibleClock
from .exact import as_fraction, round_half_away, uniform_int_at

TrueTime = NewType("TrueTime", int)
LocalTime = NewType("LocalTime", int)

NS_PER_US = 1_000
NS_PER_MS = 1_000_000
NS_PER_SEC = 1_000_000_000

_PPM = Fraction(1, 1_000_000)
_MAX_ABS_DRIFT_PPM = 10_000


class CorrectionMode(enum.Enum):
    STEP = "step"
    SLEW = "slew"


@dataclass(frozen=True)
class ClockModel:
    """Static parameters of one local clock.

    ``drift_ppm`` is the clock's fractional frequency error: local time
    advances by (1 + drift_ppm * 1e-6) per true second. ``read_jitter_ns`` is
    the half-width of uniform noise added to each read (default 0).
    """

    initial_offset_ns: int = 0
    drift_ppm: Fraction = Fraction(0)
    read_jitter_ns: int = 0
    slew_rate_limit_ppm: Fraction = Fraction(500)

    def __post_init__(self):
        object.__setattr__(self, "drift_ppm", as_fraction(self.drift_ppm))
        object.__setattr__(
            self, "slew_rate_limit_ppm", as_fraction(self.slew_rate_limit_ppm)
        )
        if abs(self.drift_ppm) >= _MAX_ABS_DRIFT_PPM:
            raise ValueError(f"|drift_ppm| must be < {_MAX_ABS_DRIFT_PPM}")
        if self.read_jitter_ns < 0:
            raise ValueError("read_jitter_ns must be >= 0")
        if self.slew_rate_limit_ppm <= 0:
            raise ValueError("slew_rate_limit_ppm must be > 0")

    @property
    def rate(self) -> Fraction:
        return 1 + self.drift_ppm * _PPM


@dataclass(frozen=True)
class PendingSlew:
    """A correction still being absorbed: signed amount left, absolute rate."""

    amount_ns: int
    rate_ppm: Fraction

    def duration(self) -> Fraction:
        """True-time nanoseconds needed to absorb the remaining amount."""
        return Fraction(abs(self.amount_ns)) / (self.rate_ppm * _PPM)


@dataclass(frozen=True)
class ClockState:
    """A clock model plus its correction history. Value-semantic: methods
    that change it return a new state."""

    model: ClockModel
    epoch: TrueTime = TrueTime(0)
    accumulated_correction_ns: int = 0
    pending_slew: Optional[PendingSlew] = None
    last_sync_epoch: TrueTime = TrueTime(0)
    seed: int = 0

    def _slew_progress(self, t: int) -> Fraction:
        slew = self.pending_slew
        if slew is None or slew.amount_ns == 0:
            return Fraction(0)
        dt = t - self.last_sync_epoch
        if dt <= 0:
            return Fraction(0)
        step = slew.rate_ppm * _PPM * dt
        if step >= abs(slew.amount_ns):
            return Fraction(slew.amount_ns)
        return step if slew.amount_ns > 0 else -step

    def correction_at(self, t: int) -> Fraction:
        return self.accumulated_correction_ns + self._slew_progress(t)

    def local_from_true(self, t: TrueTime, *, with_jitter: bool = True) -> LocalTime:
        """Read the local clock at true time ``t``.

        Per-read jitter is a pure function of (clock seed, t), so repeated
        reads at the same instant agree and streams never interleave.
        """
        m = self.model
        delta = t - self.epoch
        value = m.initial_offset_ns + delta + delta * m.drift_ppm * _PPM
        value += self.correction_at(t)
        out = round_half_away(value)
        if with_jitter and m.read_jitter_ns > 0:
            out += uniform_int_at(self.seed, t, m.read_jitter_ns)
        return LocalTime(out)

    def true_from_local(self, l: LocalTime) -> TrueTime:
        """Invert the noiseless clock mapping (round-trip error <= 1 ns).

        The inversion runs over the clock's current regime: the mapping is
        piecewise linear in true time when a slew is pending.
        """
        m = self.model
        rate = m.rate
        if rate <= 0:
            raise NonInvertibleClock("clock rate is non-positive")
        base = m.initial_offset_ns + self.accumulated_correction_ns
        slew = self.pending_slew
        if slew is None or slew.amount_ns == 0:
            t = self.epoch + Fraction(l - base) / rate
            return TrueTime(round_half_away(t))

        anchor = self.last_sync_epoch
        sign = 1 if slew.amount_ns > 0 else -1
        combined = rate + sign * slew.rate_ppm * _PPM
        if combined <= 0:
            raise NonInvertibleClock("slew drives the clock rate non-positive")
        local_at_anchor = base + (anchor - self.epoch) * rate
        end = anchor + slew.duration()
        local_at_end = base + (end - self.epoch) * rate + slew.amount_ns

        if l <= local_at_anchor:
            t = self.epoch + Fraction(l - base) / rate
        elif l < local_at_end:
            t = anchor + Fraction(l - local_at_anchor) / combined
        else:
            t = self.epoch + Fraction(l - base - slew.amount_ns) / rate
        return TrueTime(round_half_away(t))

    def apply_correction(
        self,
        offset_estimate_ns: int,
        mode: CorrectionMode,
        now: TrueTime,
        slew_rate_ppm: Fraction | float | int | None = None,
    ) -> "ClockState":
        """Return a new state with ``offset_estimate_ns`` scheduled for removal.

        STEP subtracts the estimate immediately (local time may jump
        backwards). SLEW ramps it out at ``slew_rate_ppm``, capped by the
        model's limit, preserving monotonicity. Any prior slew's absorbed
        part is folded into the accumulated correction; its unabsorbed
        remainder is discarded, since a fresh estimate re-measures it.
        """
        if offset_estimate_ns == 0 and self.pending_slew is None:
            return self
        acc = self.accumulated_correction_ns + round_half_away(self._slew_progress(now))
        if mode is CorrectionMode.STEP:
            return replace(
                self,
                accumulated_correction_ns=acc - offset_estimate_ns,
                pending_slew=None,
                last_sync_epoch=now,
            )
        limit = self.model.slew_rate_limit_ppm
        rate = limit if slew_rate_ppm is None else min(as_fraction(slew_rate_ppm), limit)
        if rate <= 0:
            rate = limit
        slew = None
        if offset_estimate_ns != 0:
            slew = PendingSlew(amount_ns=-offset_estimate_ns, rate_ppm=rate)
        return replace(
            self,
            accumulated_correction_ns=acc,
            pending_slew=slew,
            last_sync_epoch=now,
        )
