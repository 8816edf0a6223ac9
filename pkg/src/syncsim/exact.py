"""Exact rational arithmetic and deterministic seed/jitter derivation helpers.

All timeline math in the simulator runs over integers and ``Fraction``s so
that results are bit-identical across runs and platforms.
"""

from __future__ import annotations

import hashlib
from decimal import Decimal
from fractions import Fraction

_M64 = (1 << 64) - 1


def as_fraction(x) -> Fraction:
    """Convert a numeric input to an exact Fraction.

    Floats are interpreted by their decimal repr, so ``4.09`` means exactly
    409/100 rather than the nearest binary double. This keeps user-supplied
    decimal parameters exact through the rational pipeline.
    """
    if isinstance(x, Fraction):
        return x
    if isinstance(x, int):
        return Fraction(x)
    if isinstance(x, float):
        return Fraction(Decimal(repr(x)))
    if isinstance(x, str):
        return Fraction(Decimal(x))
    raise TypeError(f"cannot interpret {x!r} as a rational number")


def round_half_away(x: Fraction | int) -> int:
    """Round to the nearest integer, ties away from zero."""
    if isinstance(x, int):
        return x
    n, d = x.numerator, x.denominator
    if n >= 0:
        return (2 * n + d) // (2 * d)
    return -((-2 * n + d) // (2 * d))


def half_ns(n: int) -> int:
    """n/2 in integer nanoseconds, rounding half away from zero."""
    if n >= 0:
        return (n + 1) // 2
    return -((-n + 1) // 2)


def derive_seed(master_seed: int, *labels) -> int:
    """Derive an independent 64-bit stream seed from a master seed and labels.

    Each simulation entity gets its own stream keyed by a stable label path,
    so adding an entity never perturbs the draws of another.
    """
    h = hashlib.blake2s(digest_size=8)
    h.update((master_seed & _M64).to_bytes(8, "little"))
    for label in labels:
        h.update(str(label).encode("utf-8"))
        h.update(b"\x1f")
    return int.from_bytes(h.digest(), "little")


def _mix64(x: int) -> int:
    # splitmix64 finalizer
    x = (x + 0x9E3779B97F4A7C15) & _M64
    x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & _M64
    x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & _M64
    return x ^ (x >> 31)


def uniform_int_at(seed: int, index: int, half_width: int) -> int:
    """Deterministic uniform draw in [-half_width, +half_width] for (seed, index).

    Pure function: the same (seed, index) always yields the same value, which
    makes per-read clock jitter reproducible without threading RNG state.
    """
    if half_width <= 0:
        return 0
    r = _mix64((seed & _M64) ^ _mix64(index & _M64))
    return r % (2 * half_width + 1) - half_width
