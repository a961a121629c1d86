"""Floating-point expansions: unevaluated sums of p doubles.

An expansion holds a value as components c0..c(p-1) whose exact sum is
the value. Accumulation cascades two_sum through the components and
exits early once the carry is zero, which changes no component values
(two_sum(c, 0) is (c, 0)) but skips the dead tail of the cascade. A
carry that survives the last component is a dropped carry: standalone
expansions count it in a residue counter instead of failing, and
callers that need exactness check that counter.

renormalize compresses an expansion to its canonical form: components
ordered by decreasing magnitude, each at most half an ulp of its
predecessor, zeros only as a suffix. round_near_sum produces the
correctly rounded (nearest, ties to even) double of the exact value,
not just the leading component.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable

import numpy as np
from numba import njit

from .eft import _two_sum

__all__ = ["Fpe", "fpe_sum", "is_renormalized", "DEFAULT_SIZE", "MAX_SIZE"]

DEFAULT_SIZE = 8
MAX_SIZE = 64


@njit(cache=True, inline="always")
def _fpe_accumulate_k(comp, x):
    """Cascade x through comp; return the carry left over (0.0 if absorbed)."""
    for k in range(comp.shape[0]):
        r, x = _two_sum(comp[k], x)
        comp[k] = r
        if x == 0.0:
            break
    return x


@njit(cache=True)
def _fpe_sum_into_k(a, b):
    """Accumulate every component of b into a; return dropped-carry count."""
    dropped = 0
    for i in range(b.shape[0]):
        v = b[i]
        if v != 0.0:
            c = _fpe_accumulate_k(a, v)
            if c != 0.0:
                dropped += 1
    return dropped


@njit(cache=True)
def _fpe_renorm_k(comp):
    """Distill comp in place to canonical form; 0 on success, 1 if stuck.

    Value-preserving throughout: compaction moves components, the sweeps
    are chains of two_sum, and both leave the exact sum unchanged.
    """
    p = comp.shape[0]
    w = 0
    for i in range(p):
        v = comp[i]
        if v != 0.0:
            comp[w] = v
            w += 1
    for i in range(w, p):
        comp[i] = 0.0
    if w <= 1:
        return 0
    # magnitude sort speeds up distillation; correctness never depends on it
    for i in range(1, w):
        v = comp[i]
        av = abs(v)
        j = i - 1
        while j >= 0 and abs(comp[j]) < av:
            comp[j + 1] = comp[j]
            j -= 1
        comp[j + 1] = v
    for _ in range(4 * p + 4):
        for i in range(w - 1):
            r, s = _two_sum(comp[i], comp[i + 1])
            comp[i] = r
            comp[i + 1] = s
        k = 0
        for i in range(w):
            v = comp[i]
            if v != 0.0:
                comp[k] = v
                k += 1
        for i in range(k, w):
            comp[i] = 0.0
        w = k
        if w <= 1:
            return 0
        done = True
        for i in range(w - 1):
            if comp[i] + comp[i + 1] != comp[i]:
                done = False
                break
        if done:
            return 0
    return 1


@njit(cache=True, inline="always")
def _mant_lsb(x):
    a = np.empty(1, np.float64)
    a[0] = x
    return a.view(np.int64)[0] & np.int64(1)


@njit(cache=True)
def _fpe_round_near_k(comp, scratch):
    """Correctly rounded value of a renormalized expansion.

    Returns (value, fault). fault is nonzero only if the internal tail
    comparison overflowed its scratch space, which cannot happen for a
    renormalized input of size <= scratch.size - 2.
    """
    c0 = comp[0]
    if c0 == 0.0:
        return 0.0, 0
    p = comp.shape[0]
    c1 = comp[1] if p > 1 else 0.0
    if c1 == 0.0:
        return c0, 0
    # candidates are c0 and its neighbor in the direction of the tail;
    # decide by the exact sign of T = 2*R - step where R = sum(comp[1:])
    # and step = neighbor - c0 (comparing 2R against step avoids the
    # unrepresentable half-quantum at the subnormal floor)
    direction = math.inf if c1 > 0.0 else -math.inf
    nxt = math.nextafter(c0, direction)
    if math.isinf(nxt):
        step = math.ldexp(1.0, 971)  # the ulp step at the top of the range
        if c1 < 0.0:
            step = -step
    else:
        step = nxt - c0  # adjacent values: exact
    for i in range(scratch.shape[0]):
        scratch[i] = 0.0
    fault = 0
    for i in range(1, p):
        v = comp[i]
        if v != 0.0:
            if _fpe_accumulate_k(scratch, 2.0 * v) != 0.0:
                fault = 1
    if _fpe_accumulate_k(scratch, -step) != 0.0:
        fault = 1
    _fpe_renorm_k(scratch)
    t = scratch[0]
    if t == 0.0:
        # exact midpoint: pick the candidate with even significand
        if _mant_lsb(c0) == 0:
            return c0, fault
        return nxt, fault  # +-inf when beyond the largest finite value
    if (t > 0.0) == (c1 > 0.0):
        return nxt, fault
    return c0, fault


@njit(cache=True)
def _fpe_round_full_k(comp, scratch):
    """Renormalize then round; for reduction pipelines."""
    bad = _fpe_renorm_k(comp)
    v, fault = _fpe_round_near_k(comp, scratch)
    return v, fault | (bad << 1)


@dataclass
class Fpe:
    """A size-p expansion plus its dropped-carry residue counter."""

    components: np.ndarray
    residue: int = 0

    @classmethod
    def new(cls, size: int = DEFAULT_SIZE) -> "Fpe":
        if not (2 <= size <= MAX_SIZE):
            raise ValueError(f"expansion size must be in [2, {MAX_SIZE}], got {size}")
        return cls(np.zeros(size, dtype=np.float64))

    @classmethod
    def from_components(cls, values: Iterable[float]) -> "Fpe":
        """Build directly from raw components (no accumulation)."""
        arr = np.asarray(list(values), dtype=np.float64)
        if arr.ndim != 1 or arr.size < 2:
            raise ValueError("need at least 2 components")
        if arr.size > MAX_SIZE:
            raise ValueError(f"expansion size must be <= {MAX_SIZE}")
        if not np.all(np.isfinite(arr)):
            raise ValueError("components must be finite")
        return cls(arr.copy())

    @property
    def size(self) -> int:
        return int(self.components.shape[0])

    def accumulate(self, x: float) -> None:
        """Add one double; a carry past the last component bumps residue."""
        x = float(x)
        if not math.isfinite(x):
            raise ValueError(f"cannot accumulate non-finite value {x!r}")
        carry = _fpe_accumulate_k(self.components, x)
        if not np.all(np.isfinite(self.components)):
            raise OverflowError("expansion component overflowed")
        if carry != 0.0:
            self.residue += 1

    def add(self, other: "Fpe") -> None:
        """Merge another expansion into this one (component sizes must match)."""
        if not isinstance(other, Fpe):
            raise TypeError("can only add another Fpe")
        if other.size != self.size:
            raise ValueError(f"size mismatch: {self.size} vs {other.size}")
        self.residue += other.residue
        self.residue += int(_fpe_sum_into_k(self.components, other.components))
        if not np.all(np.isfinite(self.components)):
            raise OverflowError("expansion overflowed during merge")

    def renormalize(self) -> None:
        """Compress to canonical form (value-preserving, idempotent)."""
        if not np.all(np.isfinite(self.components)):
            raise OverflowError("cannot renormalize a non-finite expansion")
        if _fpe_renorm_k(self.components):
            raise ArithmeticError("renormalization did not converge")

    def round_near_sum(self) -> float:
        """Correctly rounded double of the exact component sum.

        Works on a copy; the expansion itself is not modified. The
        result reflects the full tail, so it can differ from the
        leading component by one ulp. A nonzero residue means carries
        were dropped earlier and the held value may already be inexact;
        the rounding of what is held is still exact.
        """
        if not np.all(np.isfinite(self.components)):
            raise OverflowError("cannot round a non-finite expansion")
        comp = self.components.copy()
        scratch = np.zeros(self.size + 2, dtype=np.float64)
        v, fault = _fpe_round_full_k(comp, scratch)
        if fault:
            raise ArithmeticError("internal rounding fault")
        return float(v)

    def copy(self) -> "Fpe":
        return Fpe(self.components.copy(), self.residue)


def fpe_sum(a: Fpe, b: Fpe) -> Fpe:
    """Non-mutating merge: a new expansion holding a + b."""
    out = a.copy()
    out.add(b)
    return out


def is_renormalized(e: Fpe) -> bool:
    """Check the canonical-form predicate without modifying e."""
    comp = e.components
    seen_zero = False
    for i in range(e.size):
        if comp[i] == 0.0:
            seen_zero = True
        elif seen_zero:
            return False
    for i in range(e.size - 1):
        if comp[i + 1] == 0.0:
            break
        if comp[i] + comp[i + 1] != comp[i]:
            return False
        if abs(comp[i + 1]) > abs(comp[i]):
            return False
    return True
