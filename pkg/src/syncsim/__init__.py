"""syncsim: deterministic sensor time-synchronization simulator and analysis.

Models drifting clocks, PTP/NTP-style synchronization over lossy links,
hardware vs host sensor triggering and timestamping, and the downstream
impact of sync error on perception and speed estimation.
"""

from .errors import (
    CompensateTwice,
    ConfigError,
    DomainError,
    NonInvertibleClock,
    RateError,
    SchedulingInPast,
    SyncSimError,
)
from .timebase import ClockModel, ClockState, CorrectionMode, LocalTime, TrueTime

__version__ = "0.1.0"

__all__ = [
    "ClockModel",
    "ClockState",
    "CompensateTwice",
    "ConfigError",
    "CorrectionMode",
    "DomainError",
    "LocalTime",
    "NonInvertibleClock",
    "RateError",
    "SchedulingInPast",
    "SyncSimError",
    "TrueTime",
    "__version__",
]
