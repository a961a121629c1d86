"""Error-free transformations for binary64 addition and multiplication.

two_sum and two_prod rewrite a rounded operation as an exact pair
(result, error) with result + error == the exact mathematical value.
two_sum is the branch-free 6-flop form (no magnitude test, safe to
vectorize); two_prod needs a fused multiply-add for the error term.

The fma used here is the llvm.fma.f64 intrinsic emitted through numba.
Its correct rounding is verified at import time on a witness whose fma
result differs from mul-then-add; platforms without a usable fma fail
fast with RuntimeError instead of silently degrading.

All kernels are compiled without fastmath: reassociation or fma
contraction would destroy the error terms these identities rely on.
"""

from __future__ import annotations

import math
from typing import NamedTuple

import numpy as np
from llvmlite import ir
from numba import njit, types
from numba.extending import intrinsic

__all__ = ["ResultError", "FpRangeError", "two_sum", "two_prod", "fma"]


class FpRangeError(ArithmeticError):
    """The error term of a transformation left the representable range.

    Raised when an exact result would need bits below 2**-1074 (the
    binary64 quantum floor), so no (result, error) pair can carry it.
    """


class ResultError(NamedTuple):
    """Exact pair: result is the rounded operation, error the remainder."""

    result: float
    error: float


@intrinsic
def _fma_intrinsic(typingctx, a, b, c):
    if not all(t == types.float64 for t in (a, b, c)):
        return None
    sig = types.float64(types.float64, types.float64, types.float64)

    def codegen(context, builder, signature, args):
        fnty = ir.FunctionType(ir.DoubleType(), [ir.DoubleType()] * 3)
        fn = builder.module.declare_intrinsic("llvm.fma", [ir.DoubleType()], fnty=fnty)
        return builder.call(fn, args)

    return sig, codegen


@njit(cache=True, inline="always")
def fma(a, b, c):
    """Correctly rounded a * b + c with a single rounding."""
    return _fma_intrinsic(a, b, c)


@njit(cache=True, inline="always")
def _two_sum(a, b):
    r = a + b
    z = r - a
    s = (a - (r - z)) + (b - z)
    return r, s


@njit(cache=True, inline="always")
def _two_prod(a, b):
    r = a * b
    s = _fma_intrinsic(a, b, -r)
    return r, s


@intrinsic
def _cttz(typingctx, v):
    if v != types.int64:
        return None
    sig = types.int64(types.int64)

    def codegen(context, builder, signature, args):
        i64 = ir.IntType(64)
        fnty = ir.FunctionType(i64, [i64, ir.IntType(1)])
        fn = builder.module.declare_intrinsic("llvm.cttz", [i64], fnty=fnty)
        return builder.call(fn, [args[0], ir.Constant(ir.IntType(1), 0)])

    return sig, codegen


@njit(cache=True, inline="always")
def _prod_error_exact(a, b):
    """True iff the two_prod error term of a * b is exactly representable.

    The product's lowest set bit sits at la + lb where la, lb are the
    operands' lowest-set-bit exponents (2-adic valuations multiply
    through). The error term needs at most 53 bits ending at that
    position, so it is representable exactly when la + lb >= -1074.
    Trailing zeros of a two's-complement negative match its magnitude,
    so no sign handling is needed.
    """
    ma, ea = math.frexp(a)
    mb, eb = math.frexp(b)
    la = (ea - 53) + _cttz(np.int64(ma * 9007199254740992.0))
    lb = (eb - 53) + _cttz(np.int64(mb * 9007199254740992.0))
    return la + lb >= -1074


def _verify_fma() -> None:
    a = 1.0 + 2.0**-52
    r = a * a
    s = fma(a, a, -r)
    # a*a = 1 + 2^-51 + 2^-104; the rounded square drops exactly 2^-104,
    # which only a real fused multiply-add can recover
    if r != 1.0 + 2.0**-51 or s != 2.0**-104 or fma(2.0, 3.0, 4.0) != 10.0:
        raise RuntimeError(
            "platform fused multiply-add is missing or not correctly "
            "rounded; this library cannot produce exact error terms here"
        )


_verify_fma()

_TWO53 = 9007199254740992  # 2**53


def _decompose(x: float) -> tuple[int, int]:
    """(M, E) with x == M * 2**E, |M| in [2**52, 2**53) for nonzero x."""
    if x == 0.0:
        return 0, 0
    m, e = math.frexp(x)
    return int(m * _TWO53), e - 53


def two_sum(a: float, b: float) -> ResultError:
    """Exact transformation of addition: result + error == a + b.

    result is fl(a + b); error is the exact rounding remainder, which is
    always representable when result is finite. Non-finite inputs raise
    ValueError; an overflowing sum raises OverflowError.
    """
    a = float(a)
    b = float(b)
    if not (math.isfinite(a) and math.isfinite(b)):
        raise ValueError(f"two_sum requires finite inputs, got ({a!r}, {b!r})")
    r, s = _two_sum(a, b)
    if math.isinf(r):
        raise OverflowError(f"two_sum overflow: {a!r} + {b!r}")
    return ResultError(r, s)


def two_prod(a: float, b: float) -> ResultError:
    """Exact transformation of multiplication: result + error == a * b.

    result is fl(a * b); error comes from fma(a, b, -result). When the
    exact product has bits below 2**-1074 the error term cannot hold
    them; that case raises FpRangeError rather than returning a pair
    that quietly fails the identity. Overflow raises OverflowError.
    """
    a = float(a)
    b = float(b)
    if not (math.isfinite(a) and math.isfinite(b)):
        raise ValueError(f"two_prod requires finite inputs, got ({a!r}, {b!r})")
    r, s = _two_prod(a, b)
    if math.isinf(r):
        raise OverflowError(f"two_prod overflow: {a!r} * {b!r}")
    # exact check that error == a*b - r, in integer arithmetic
    ma, ea = _decompose(a)
    mb, eb = _decompose(b)
    mr, er = _decompose(r)
    ms, es = _decompose(s)
    e0 = min(ea + eb, er, es)
    exact_err = (ma * mb << (ea + eb - e0)) - (mr << (er - e0))
    if (ms << (es - e0)) != exact_err:
        raise FpRangeError(
            f"two_prod error term underflowed for {a!r} * {b!r}: the exact "
            "product has bits below the binary64 quantum floor"
        )
    return ResultError(r, s)
