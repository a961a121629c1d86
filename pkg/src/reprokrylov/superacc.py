"""Long fixed-point accumulator covering the full binary64 range.

The accumulator is 42 signed int64 digits of 52 value bits each, a
2184-bit window whose least significant bit has weight 2**-1074. Every
finite double is an integer at that scale and lands in at most two
adjacent digits, so accumulation is exact integer addition: the order
of operations cannot matter.

The 12 spare bits per digit absorb carries between normalizations.
Starting from canonical digits (each in [0, 2**52)), one accumulate
adds strictly less than 2**52 to at most two digits, so after c
pending operations a digit is below (c + 1) * (2**52 - 1); with
c <= 2047 the normalization pass, including its running carry of up to
2**11, stays inside int64 exactly. Accumulate therefore renormalizes
itself automatically on the 2047th pending operation.

Negative values are added digitwise as negative int64s; canonical form
after normalize keeps the lower 41 digits in [0, 2**52) with the sign
carried by the top digit. Rounding resolves the sign first (exact
borrow propagation), then reads the top 53 bits plus a sticky bit.

merge is digitwise integer addition of canonical forms followed by a
normalize, which makes it exactly associative and commutative.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
import struct

import numpy as np
from numba import njit

__all__ = ["LongAccumulator", "superacc_merge", "DIGITS", "DIGIT_BITS", "CARRY_BITS"]

DIGITS = 42
DIGIT_BITS = 52
CARRY_BITS = 12
LSB_WEIGHT_EXP = -1074
_OPS_LIMIT = 2047  # 2**(CARRY_BITS - 1) - 1 pending ops keep int64 exact
_TWO53F = 9007199254740992.0


@njit(cache=True, inline="always")
def _acc_add_raw(digits, x):
    """Add one finite double into the digit array (no carry handling)."""
    m, e = math.frexp(x)
    M = np.int64(m * _TWO53F)
    bitpos = (e - 53) + 1074
    if bitpos < 0:
        # subnormal input: the significand has at least -bitpos
        # trailing zeros, so this shift is exact
        M >>= np.int64(-bitpos)
        bitpos = 0
    q = bitpos // 52
    r = bitpos - q * 52
    if M >= 0:
        lo = (M & ((np.int64(1) << (52 - r)) - np.int64(1))) << r
        hi = M >> (52 - r)
    else:
        A = -M
        lo = -((A & ((np.int64(1) << (52 - r)) - np.int64(1))) << r)
        hi = -(A >> (52 - r))
    digits[q] += lo
    digits[q + 1] += hi


@njit(cache=True)
def _acc_normalize(digits):
    """Propagate carries to canonical form; 1 if the span overflowed."""
    carry = np.int64(0)
    for i in range(DIGITS - 1):
        v = digits[i] + carry
        carry = v >> 52  # arithmetic shift: floor division by 2**52
        digits[i] = v - (carry << 52)
    digits[DIGITS - 1] += carry
    t = digits[DIGITS - 1]
    if t >= (np.int64(1) << 52) or t <= -(np.int64(1) << 52):
        return 1
    return 0


@njit(cache=True)
def _acc_merge_into(a, b):
    """Digitwise a += b for canonical inputs, then normalize."""
    for i in range(DIGITS):
        a[i] += b[i]
    return _acc_normalize(a)


@njit(cache=True)
def _acc_round(digits):
    """Round a canonical digit array to nearest-even binary64."""
    t = -1
    for i in range(DIGITS - 1, -1, -1):
        if digits[i] != 0:
            t = i
            break
    if t < 0:
        return 0.0
    neg = digits[t] < 0
    work = np.empty(DIGITS, np.int64)
    if neg:
        carry = np.int64(0)
        for i in range(DIGITS - 1):
            v = carry - digits[i]
            carry = v >> 52
            work[i] = v - (carry << 52)
        work[DIGITS - 1] = carry - digits[DIGITS - 1]
    else:
        for i in range(DIGITS):
            work[i] = digits[i]
    t = -1
    for i in range(DIGITS - 1, -1, -1):
        if work[i] != 0:
            t = i
            break
    d = work[t]
    b = 0
    while d > 1:
        d >>= 1
        b += 1
    h = 52 * t + b  # bit position of the most significant set bit
    if h <= 52:
        # the whole value fits in 53 bits above the floor: exact
        m = work[0]
        if t >= 1:
            m += work[1] << 52
        val = math.ldexp(float(m), LSB_WEIGHT_EXP)
        return -val if neg else val
    lo_pos = h - 52
    q0 = lo_pos // 52
    r0 = lo_pos - q0 * 52
    m = work[q0] >> r0
    m += (work[q0 + 1] & ((np.int64(1) << (r0 + 1)) - np.int64(1))) << (52 - r0)
    rb_pos = h - 53
    qb = rb_pos // 52
    rb = rb_pos - qb * 52
    round_bit = (work[qb] >> rb) & np.int64(1)
    sticky = (work[qb] & ((np.int64(1) << rb) - np.int64(1))) != 0
    if not sticky:
        for j in range(qb):
            if work[j] != 0:
                sticky = True
                break
    if round_bit == np.int64(1) and (sticky or (m & np.int64(1)) == np.int64(1)):
        m += 1
        if m == (np.int64(1) << 53):
            m = np.int64(1) << 52
            h += 1
    e = (h - 52) + LSB_WEIGHT_EXP
    if e > 971:
        return -math.inf if neg else math.inf
    val = math.ldexp(float(m), e)
    return -val if neg else val


_MAGIC = b"RKACC\x01"


@dataclass
class LongAccumulator:
    """Exact accumulator for binary64 values; see module docstring."""

    digits: np.ndarray = field(
        default_factory=lambda: np.zeros(DIGITS, dtype=np.int64)
    )
    ops_since_normalize: int = 0
    overflowed: bool = False

    @classmethod
    def new(cls) -> "LongAccumulator":
        return cls()

    def accumulate(self, x: float) -> None:
        """Add one finite double exactly."""
        x = float(x)
        if not math.isfinite(x):
            raise ValueError(f"cannot accumulate non-finite value {x!r}")
        if self.overflowed:
            raise OverflowError("accumulator span already exceeded")
        if self.ops_since_normalize >= _OPS_LIMIT:
            self.normalize()
        if x != 0.0:
            _acc_add_raw(self.digits, x)
            self.ops_since_normalize += 1

    def normalize(self) -> None:
        """Propagate carries; digits return to canonical form."""
        if _acc_normalize(self.digits):
            self.overflowed = True
        self.ops_since_normalize = 0

    def merge(self, other: "LongAccumulator") -> None:
        """Fold another accumulator into this one, exactly.

        Both sides are normalized first (the other via a scratch copy;
        the argument is not modified), so the digitwise sum cannot
        overflow and the merged digits are canonical afterwards.
        """
        if not isinstance(other, LongAccumulator):
            raise TypeError("can only merge another LongAccumulator")
        if self.overflowed or other.overflowed:
            raise OverflowError("accumulator span already exceeded")
        self.normalize()
        ob = other.digits
        if other.ops_since_normalize > 0:
            ob = other.digits.copy()
            _acc_normalize(ob)
        if _acc_merge_into(self.digits, ob):
            self.overflowed = True
        self.ops_since_normalize = 0

    def round_nearest(self) -> float:
        """Correctly rounded double of the held value.

        Values beyond the binary64 range round to a signed infinity. An
        accumulator whose span overflowed has lost exactness; rounding
        it raises instead of guessing.
        """
        if self.overflowed:
            raise OverflowError("accumulator span exceeded; value lost")
        self.normalize()
        return float(_acc_round(self.digits))

    def is_zero(self) -> bool:
        self.normalize()
        return bool(np.all(self.digits == 0))

    def copy(self) -> "LongAccumulator":
        return LongAccumulator(
            self.digits.copy(), self.ops_since_normalize, self.overflowed
        )

    # serialization layout (little-endian, 348 bytes):
    #   offset 0:  6-byte magic "RKACC\x01" (version tagged)
    #   offset 6:  uint8 status (0 ok, 1 overflowed)
    #   offset 7:  1 pad byte
    #   offset 8:  uint32 ops_since_normalize
    #   offset 12: 42 little-endian int64 digits
    _HEADER = struct.Struct("<6sBxI")

    def to_bytes(self) -> bytes:
        head = self._HEADER.pack(_MAGIC, 1 if self.overflowed else 0,
                                 self.ops_since_normalize)
        return head + self.digits.astype("<i8").tobytes()

    @classmethod
    def from_bytes(cls, blob: bytes) -> "LongAccumulator":
        need = cls._HEADER.size + DIGITS * 8
        if len(blob) != need:
            raise ValueError(f"serialized accumulator must be {need} bytes")
        magic, status, ops = cls._HEADER.unpack_from(blob, 0)
        if magic != _MAGIC:
            raise ValueError("bad magic; not a serialized accumulator")
        if status not in (0, 1):
            raise ValueError(f"bad status byte {status}")
        if ops > _OPS_LIMIT:
            raise ValueError(f"ops counter {ops} out of range")
        digits = np.frombuffer(blob, dtype="<i8", offset=cls._HEADER.size).astype(
            np.int64
        )
        # digits must respect the carry budget the ops counter implies,
        # otherwise later accumulates could wrap int64
        bound = (int(ops) + 1) * (1 << 52)
        if ops == 0:
            if np.any(digits[:-1] < 0) or np.any(digits[:-1] >= (1 << 52)):
                raise ValueError("digits not canonical for ops == 0")
            if abs(int(digits[-1])) >= (1 << 52) and status == 0:
                raise ValueError("top digit out of range for ok status")
        elif np.any(np.abs(digits) > bound):
            raise ValueError("digit magnitude exceeds the pending-ops bound")
        return cls(digits.copy(), int(ops), bool(status))


def superacc_merge(a: LongAccumulator, b: LongAccumulator) -> LongAccumulator:
    """Non-mutating merge: a new accumulator holding a + b."""
    out = a.copy()
    out.merge(b)
    return out
