"""Exception types shared across the simulator."""


class SyncSimError(Exception):
    """Base class for all syncsim errors."""


class NonInvertibleClock(SyncSimError):
    """The clock's effective rate is non-positive, so local time cannot be inverted."""


class SchedulingInPast(SyncSimError):
    """An event was scheduled before the simulator's current time."""


class ConfigError(SyncSimError):
    """A scenario document failed validation.

    ``path`` points at the offending field, e.g. ``machines[1].sensors[0].rate_hz``.
    """

    def __init__(self, path: str, message: str):
        self.path = path
        self.message = message
        super().__init__(f"{path}: {message}")


class RateError(SyncSimError):
    """An internally/externally-triggered sensor pair has non-divisible rates."""

    def __init__(self, sensor_a: str, sensor_b: str, rate_a: int, rate_b: int):
        self.sensor_a = sensor_a
        self.sensor_b = sensor_b
        self.rate_a = rate_a
        self.rate_b = rate_b
        super().__init__(
            f"rates of {sensor_a} ({rate_a} Hz) and {sensor_b} ({rate_b} Hz) "
            "do not divide one another"
        )


class CompensateTwice(SyncSimError):
    """Latency compensation was applied to a sample record twice."""


class DomainError(SyncSimError):
    """An impact-model argument is outside its mathematical domain."""
