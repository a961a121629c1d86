"""Exact reference arithmetic for binary64 sums and dot products.

Every finite double is an integer multiple of a power of two: x = M * 2**E
with |M| < 2**53 and E >= -1126 (subnormals included). Sums and products of
such values are therefore exact integer arithmetic at a common scale, and
rounding the exact result to nearest-even is a pure integer operation too.
This module implements that arithmetic with Python's arbitrary-precision
integers. It shares no code with the accumulation pipeline; it exists so
tests can check the fast path against an independently derived answer.

Results that are exactly zero are returned as +0.0. Values that exceed the
binary64 range round to a signed infinity, consistent with IEEE 754
round-to-nearest-even (the overflow threshold is 2**1024 - 2**970).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

__all__ = ["ExactValue", "oracle_sum", "oracle_dot"]

_TWO53 = 9007199254740992  # 2**53


def _decompose(x: float) -> tuple[int, int]:
    """Return (M, E) with x == M * 2**E exactly and |M| < 2**53."""
    if x == 0.0:
        return 0, 0
    m, e = math.frexp(x)
    # m in [0.5, 1); scaling by 2**53 is exact for a 53-bit significand
    return int(m * _TWO53), e - 53


@dataclass(frozen=True)
class ExactValue:
    """An exact dyadic rational mant * 2**exp.

    No canonical form is enforced; equality and ordering align scales
    first. Construction from floats and float products is exact.
    """

    mant: int
    exp: int

    @classmethod
    def from_float(cls, x: float) -> "ExactValue":
        x = float(x)
        if not math.isfinite(x):
            raise ValueError(f"non-finite value has no exact form: {x!r}")
        m, e = _decompose(x)
        return cls(m, e)

    @classmethod
    def from_product(cls, x: float, y: float) -> "ExactValue":
        """Exact product of two finite doubles."""
        x = float(x)
        y = float(y)
        if not (math.isfinite(x) and math.isfinite(y)):
            raise ValueError("non-finite factor in exact product")
        mx, ex = _decompose(x)
        my, ey = _decompose(y)
        return cls(mx * my, ex + ey)

    @classmethod
    def zero(cls) -> "ExactValue":
        return cls(0, 0)

    def __add__(self, other: "ExactValue") -> "ExactValue":
        if not isinstance(other, ExactValue):
            return NotImplemented
        if self.mant == 0:
            return other
        if other.mant == 0:
            return self
        e = min(self.exp, other.exp)
        return ExactValue(
            (self.mant << (self.exp - e)) + (other.mant << (other.exp - e)), e
        )

    def __sub__(self, other: "ExactValue") -> "ExactValue":
        if not isinstance(other, ExactValue):
            return NotImplemented
        return self + ExactValue(-other.mant, other.exp)

    def __neg__(self) -> "ExactValue":
        return ExactValue(-self.mant, self.exp)

    def __eq__(self, other: object) -> bool:
        if isinstance(other, (int, float)):
            other = ExactValue.from_float(float(other))
        if not isinstance(other, ExactValue):
            return NotImplemented
        if self.mant == 0 or other.mant == 0:
            return self.mant == other.mant
        e = min(self.exp, other.exp)
        return (self.mant << (self.exp - e)) == (other.mant << (other.exp - e))

    def __hash__(self) -> int:
        if self.mant == 0:
            return hash(0)
        m, e = self.mant, self.exp
        while m % 2 == 0:
            m //= 2
            e += 1
        return hash((m, e))

    def sign(self) -> int:
        return (self.mant > 0) - (self.mant < 0)

    def is_zero(self) -> bool:
        return self.mant == 0

    def to_float(self) -> float:
        """Round to nearest binary64, ties to even.

        Subnormal results are handled by widening the quantum floor to
        2**-1074; overflow returns a signed infinity at the IEEE
        threshold (values >= 2**1024 - 2**970 in magnitude).
        """
        if self.mant == 0:
            return 0.0
        neg = self.mant < 0
        a = -self.mant if neg else self.mant
        msb = self.exp + a.bit_length() - 1
        q = max(-1074, msb - 52)  # exponent of the result's quantum
        shift = self.exp - q
        if shift >= 0:
            n = a << shift
        else:
            k = -shift
            n = a >> k
            rem = a & ((1 << k) - 1)
            half = 1 << (k - 1)
            if rem > half or (rem == half and (n & 1)):
                n += 1
        try:
            r = math.ldexp(float(n), q)  # n <= 2**53 so float(n) is exact
        except OverflowError:
            r = math.inf
        if math.isinf(r):
            return -math.inf if neg else math.inf
        return -r if neg else r

    def __float__(self) -> float:
        return self.to_float()


def _check_finite_seq(xs: Sequence[float], name: str) -> None:
    for v in xs:
        if not math.isfinite(v):
            raise ValueError(f"non-finite element in {name}: {v!r}")


def oracle_sum(xs: Iterable[float]) -> float:
    """Correctly rounded sum of a sequence of finite doubles.

    Accumulates the exact integer sum at the minimum scale of the inputs,
    then rounds once. Independent of summation order by construction.
    """
    total = 0
    scale = 0
    started = False
    for v in xs:
        v = float(v)
        if not math.isfinite(v):
            raise ValueError(f"non-finite element in sum: {v!r}")
        m, e = _decompose(v)
        if m == 0:
            continue
        if not started:
            total, scale, started = m, e, True
            continue
        if e >= scale:
            total += m << (e - scale)
        else:
            total = (total << (scale - e)) + m
            scale = e
    if not started:
        return 0.0
    return ExactValue(total, scale).to_float()


def oracle_dot(xs: Sequence[float], ys: Sequence[float]) -> float:
    """Correctly rounded dot product of two equal-length vectors.

    Every elementwise product is formed exactly (106-bit integers) and
    summed exactly before the single final rounding.
    """
    if len(xs) != len(ys):
        raise ValueError(f"length mismatch: {len(xs)} vs {len(ys)}")
    total = 0
    scale = 0
    started = False
    for x, y in zip(xs, ys):
        x = float(x)
        y = float(y)
        if not (math.isfinite(x) and math.isfinite(y)):
            raise ValueError("non-finite element in dot product")
        mx, ex = _decompose(x)
        my, ey = _decompose(y)
        m = mx * my
        if m == 0:
            continue
        e = ex + ey
        if not started:
            total, scale, started = m, e, True
            continue
        if e >= scale:
            total += m << (e - scale)
        else:
            total = (total << (scale - e)) + m
            scale = e
    if not started:
        return 0.0
    return ExactValue(total, scale).to_float()
