"""Seeded vector corpora for benchmarks and cross-validation.

Everything here is driven by a caller-provided numpy Generator, so a
fixed seed gives a fixed corpus. The generators respect one hard
constraint of the exact dot pipeline: every elementwise product must
have a representable error term (lowest set bit at or above 2^-1074),
which in practice means keeping products comfortably clear of
2^-968. Wide dynamic range lives in the factors, not the products:
`dot_wide` anticorrelates the exponents of x and y so each vector can
span 10^300 while x_i * y_i stays near 1.
"""

from __future__ import annotations

import math

import numpy as np

from .oracle import ExactValue, oracle_dot

__all__ = [
    "random_vector",
    "random_dot_pair",
    "dot_wide",
    "dot_condition",
    "dot_exact_zero",
    "sum_exact_zero",
]

# products of two values below 2^-484 can have error terms under the
# subnormal floor; generators stay inside this budget
_MAX_WIDE_BITS = 1000.0


def _signed_mantissas(n: int, rng: np.random.Generator) -> np.ndarray:
    """Dense-mantissa magnitudes in [1, 2) with random signs."""
    m = 1.0 + rng.random(n)
    return np.where(rng.random(n) < 0.5, -m, m)


def random_vector(
    n: int,
    rng: np.random.Generator,
    exp_low: float = -10.0,
    exp_high: float = 10.0,
) -> np.ndarray:
    """Signed values with log-uniform magnitudes in [2^exp_low, 2^exp_high+1)."""
    if n < 1:
        raise ValueError("n must be >= 1")
    if not exp_low <= exp_high:
        raise ValueError("exp_low must not exceed exp_high")
    e = rng.uniform(exp_low, exp_high, size=n)
    return _signed_mantissas(n, rng) * np.exp2(e)


def random_dot_pair(
    n: int,
    rng: np.random.Generator,
    exp_span: float = 20.0,
) -> tuple[np.ndarray, np.ndarray]:
    """Two independent moderate-range vectors for bulk cross-checks."""
    h = exp_span / 2.0
    return (
        random_vector(n, rng, -h, h),
        random_vector(n, rng, -h, h),
    )


def dot_wide(
    n: int,
    rng: np.random.Generator,
    decades: float = 300.0,
) -> tuple[np.ndarray, np.ndarray]:
    """A dot pair where each vector spans ~10^decades in magnitude.

    Exponents are anticorrelated between x and y (plus a small jitter)
    so every product lands within a few tens of binary orders of 1 and
    the pipeline's exactness precondition holds by a wide margin.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    bits = decades * math.log2(10.0)
    if not 0.0 <= bits <= _MAX_WIDE_BITS:
        raise ValueError(f"decades must lie in [0, {_MAX_WIDE_BITS / math.log2(10.0):.0f}]")
    e = rng.uniform(-bits / 2.0, bits / 2.0, size=n)
    jitter = rng.uniform(-20.0, 20.0, size=n)
    x = _signed_mantissas(n, rng) * np.exp2(e)
    y = _signed_mantissas(n, rng) * np.exp2(jitter - e)
    if n >= 2 and bits > 0.0:
        # pin the extremes so the requested range is actually attained
        top = 1.75 * 2.0 ** (bits / 2.0)
        bot = 2.0 ** (-bits / 2.0)
        x[0] = math.copysign(top, x[0])
        y[0] = math.copysign(bot, y[0])
        x[1] = math.copysign(bot, x[1])
        y[1] = math.copysign(top, y[1])
    return x, y


def dot_condition(
    n: int,
    rng: np.random.Generator,
    target_cond: float = 1e30,
) -> tuple[np.ndarray, np.ndarray, float]:
    """Cancellation-heavy dot pair with condition near target_cond.

    First half: random entries with exponents filling [0, log2(cond)/2].
    Second half: y_i chosen so the running dot collapses toward zero,
    tracked exactly so the construction cannot drift. Returns
    (x, y, achieved) with achieved = 2 |x|.|y| / |x.y| (inf if the dot
    is exactly zero).
    """
    if n < 6:
        raise ValueError("n must be >= 6")
    if not (target_cond >= 1.0 and math.isfinite(target_cond)):
        raise ValueError("target_cond must be finite and >= 1")
    b = 0.5 * math.log2(target_cond)
    n2 = n // 2
    e = rng.uniform(0.0, b, size=n2)
    e[0] = b
    e[-1] = 0.0
    x = np.zeros(n, dtype=np.float64)
    y = np.zeros(n, dtype=np.float64)
    x[:n2] = _signed_mantissas(n2, rng) * np.exp2(e)
    y[:n2] = _signed_mantissas(n2, rng) * np.exp2(e)

    exact = ExactValue.zero()
    for i in range(n2):
        exact = exact + ExactValue.from_product(x[i], y[i])
    e2 = np.linspace(b, 0.0, n - n2)
    mx = _signed_mantissas(n - n2, rng)
    my = _signed_mantissas(n - n2, rng)
    for i in range(n2, n):
        scale = 2.0 ** float(e2[i - n2])
        x[i] = mx[i - n2] * scale
        y[i] = (my[i - n2] * scale - float(exact)) / x[i]
        exact = exact + ExactValue.from_product(x[i], y[i])

    num = oracle_dot(np.abs(x), np.abs(y))
    den = abs(float(exact))
    achieved = math.inf if den == 0.0 else 2.0 * num / den
    return x, y, achieved


def dot_exact_zero(
    n: int,
    rng: np.random.Generator,
    exp_span: float = 30.0,
) -> tuple[np.ndarray, np.ndarray]:
    """A dot pair whose exact product-sum is exactly zero.

    Every product appears alongside its negation, shuffled apart, so
    the exact value is 0 for any association while naive partial sums
    generally miss it.
    """
    if n < 2 or n % 2:
        raise ValueError("n must be even and >= 2")
    h = n // 2
    x1, y1 = random_dot_pair(h, rng, exp_span)
    x = np.concatenate([x1, x1])
    y = np.concatenate([y1, -y1])
    perm = rng.permutation(n)
    return x[perm], y[perm]


def sum_exact_zero(
    n: int,
    rng: np.random.Generator,
    exp_span: float = 30.0,
) -> np.ndarray:
    """A vector whose exact sum is exactly zero (paired negations)."""
    if n < 2 or n % 2:
        raise ValueError("n must be even and >= 2")
    h = exp_span / 2.0
    v = random_vector(n // 2, rng, -h, h)
    out = np.concatenate([v, -v])
    return out[rng.permutation(n)]
