"""Downstream impact of synchronization error on perception and tracking.

Two closed-form models. For camera/LiDAR fusion, a detection box of length L
displaced by d = v * dt along the travel direction overlaps its true position
with IoU (L - d) / (L + d); inverting at an IoU requirement gives the largest
tolerable sync error. For roadside-unit speed estimation, a sync error dt on
the second observation biases |p2 - p1| / (t2 - t1) into
|p2 - p1| / (t2 + dt - t1).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import NamedTuple, Optional, Sequence

from .errors import DomainError
from .exact import as_fraction, round_half_away

DEFAULT_VEHICLE_LENGTH_M = 4.09


@dataclass(frozen=True)
class ToleranceQuery:
    """How much sync error keeps detection overlap above an IoU threshold."""

    velocity_mps: float
    iou_threshold: float
    object_length_m: float = DEFAULT_VEHICLE_LENGTH_M

    def __post_init__(self):
        if self.velocity_mps <= 0:
            raise DomainError("velocity_mps must be > 0")
        if not 0.0 <= self.iou_threshold < 1.0:
            raise DomainError("iou_threshold must be in [0, 1)")
        if self.object_length_m <= 0:
            raise DomainError("object_length_m must be > 0")


@dataclass(frozen=True)
class SpeedObservation:
    """Two position fixes of one object, reported by different machines.

    Times are in milliseconds; ``delta_t_ms`` is the second reporter's sync
    error relative to the first.
    """

    p1: Sequence[float]
    p2: Sequence[float]
    t1_ms: float
    t2_ms: float
    delta_t_ms: float

    def __post_init__(self):
        if len(self.p1) != len(self.p2) or len(self.p1) not in (2, 3):
            raise DomainError("positions must both be 2-D or both be 3-D")
        if self.t2_ms <= self.t1_ms:
            raise DomainError("t2 must be after t1")
        if self.t2_ms + self.delta_t_ms <= self.t1_ms:
            raise DomainError("t2 + delta_t must stay after t1")


class SpeedEstimate(NamedTuple):
    true_mps: float
    biased_mps: float
    error_mps: float


@dataclass(frozen=True)
class Misalignment:
    displacement_m: float
    iou: float
    case: Optional[int]  # 0 = aligned, 1 = usable overlap, 2 = below threshold


def iou_1d(length_m: float, displacement_m: float) -> float:
    """IoU of two equal boxes of length L displaced by d: max(0, (L-d)/(L+d))."""
    if length_m <= 0:
        raise DomainError("length must be > 0")
    if displacement_m < 0:
        raise DomainError("displacement must be >= 0")
    if displacement_m >= length_m:
        return 0.0
    return (length_m - displacement_m) / (length_m + displacement_m)


def tolerable_sync_error_exact(query: ToleranceQuery) -> Fraction:
    """Unrounded tolerable sync error in milliseconds, as an exact rational."""
    length = as_fraction(query.object_length_m)
    theta = as_fraction(query.iou_threshold)
    velocity = as_fraction(query.velocity_mps)
    # d_max solves (L - d) / (L + d) = theta; time to travel it is d_max / v.
    d_max = length * (1 - theta) / (1 + theta)
    return 1000 * d_max / velocity


def tolerable_sync_error(query: ToleranceQuery) -> int:
    """Largest tolerable sync error in whole milliseconds.

    Rounded half away from zero; inputs are treated as exact decimals so
    boundary cases like 204.5 ms land deterministically.
    """
    return round_half_away(tolerable_sync_error_exact(query))


def speed_estimate(obs: SpeedObservation) -> SpeedEstimate:
    """True and sync-error-biased speed, plus the absolute error, in m/s."""
    distance_m = math.dist(obs.p1, obs.p2)
    dt_s = (obs.t2_ms - obs.t1_ms) / 1000.0
    dt_biased_s = (obs.t2_ms + obs.delta_t_ms - obs.t1_ms) / 1000.0
    if dt_s <= 0 or dt_biased_s <= 0:
        raise DomainError("observation intervals must be positive")
    true_mps = distance_m / dt_s
    biased_mps = distance_m / dt_biased_s
    return SpeedEstimate(true_mps, biased_mps, abs(true_mps - biased_mps))


def misalignment_from_sync_error(
    velocity_mps: float,
    sync_error_ms: float,
    object_length_m: float = DEFAULT_VEHICLE_LENGTH_M,
    iou_threshold: Optional[float] = None,
) -> Misalignment:
    """Displacement and overlap produced by a given sync error.

    With a threshold, classifies the outcome: case 0 is perfect alignment,
    case 1 still overlaps at or above the threshold, case 2 falls below it.
    """
    if velocity_mps <= 0:
        raise DomainError("velocity_mps must be > 0")
    if sync_error_ms < 0:
        raise DomainError("sync_error_ms must be >= 0")
    if iou_threshold is not None and not 0.0 <= iou_threshold < 1.0:
        raise DomainError("iou_threshold must be in [0, 1)")
    displacement = velocity_mps * sync_error_ms / 1000.0
    iou = iou_1d(object_length_m, displacement)
    if displacement == 0:
        case: Optional[int] = 0
    elif iou_threshold is None:
        case = None
    else:
        case = 1 if iou >= iou_threshold else 2
    return Misalignment(displacement, iou, case)
