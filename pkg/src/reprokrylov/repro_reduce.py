"""Reproducible reductions over a simulated two-level topology.

A reduction runs as if on P processes, each owning a contiguous slice
of the input, with T workers per process pulling fixed-size chunks.
Chunk j of a process always belongs to worker j mod T; the order in
which chunks execute is irrelevant because each worker's partial is
exact, and exact objects merge associatively. Tests drive the
chunk-order hook with random schedules to demonstrate exactly that.

Two exact carriers are available:

* exblas: every worker runs a pair of expansions (one for the rounded
  products, one for the fma error terms); carries that fall off an
  expansion flush into a per-process long accumulator, the expansions
  themselves flush after the pass, process accumulators merge digitwise
  at the root, and the root rounds once. No precision escape hatch:
  the result is the correctly rounded exact value, always.
* opt: expansions only. Dropped carries are counted and surface as
  residue_warning on the result; with no warning the result equals the
  exblas value bit for bit. Cheaper, but its validity window is the
  dynamic range an expansion of size p can span (about 40 * p decimal
  digits; p = 8 covers beyond 1e50 comfortably).

The baseline functions are the non-reproducible reference: ordinary
floating-point partial sums whose association order follows the
(optionally shuffled) schedule, exactly like a naive parallel dot.

Products whose magnitude falls below 2**-968 may carry error bits
below the binary64 quantum floor where two_prod cannot represent them;
such elements raise FpRangeError rather than degrade silently.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from numba import njit

from .eft import FpRangeError, _fma_intrinsic, _prod_error_exact
from .fpe import (
    DEFAULT_SIZE,
    Fpe,
    MAX_SIZE,
    _fpe_accumulate_k,
    _fpe_renorm_k,
    _fpe_round_full_k,
    _fpe_sum_into_k,
)
from .superacc import DIGITS, LongAccumulator, _acc_add_raw, _acc_normalize, _acc_round

__all__ = [
    "Topology",
    "ReduceResult",
    "exdot_exblas",
    "exdot_opt",
    "exsum_exblas",
    "exsum_opt",
    "exdot_pair_exblas",
    "exdot_pair_opt",
    "dot_baseline",
    "sum_baseline",
    "reduce_then_broadcast",
]

_OPS_LIMIT = 2047
_PROD_FLOOR = 2.0**-968  # below this, fma error terms may be inexact


@dataclass(frozen=True)
class Topology:
    """Simulated decomposition: P processes, T workers each, chunk size."""

    processes: int = 1
    workers: int = 1
    chunk: int = 256

    def __post_init__(self) -> None:
        if self.processes < 1:
            raise ValueError(f"processes must be >= 1, got {self.processes}")
        if self.workers < 1:
            raise ValueError(f"workers must be >= 1, got {self.workers}")
        if self.chunk < 1:
            raise ValueError(f"chunk must be >= 1, got {self.chunk}")

    def slices(self, n: int) -> list[tuple[int, int]]:
        """Contiguous per-process [lo, hi) bounds covering range(n)."""
        base, rem = divmod(n, self.processes)
        out = []
        lo = 0
        for i in range(self.processes):
            hi = lo + base + (1 if i < rem else 0)
            out.append((lo, hi))
            lo = hi
        return out

    def chunk_count(self, lo: int, hi: int) -> int:
        return -((hi - lo) // -self.chunk) if hi > lo else 0


@dataclass(frozen=True)
class ReduceResult:
    """Rounded reduction value plus the exactness flag of the opt path."""

    value: float
    residue_warning: bool = False


# ---------------------------------------------------------------------------
# kernels


@njit(cache=True)
def _dot_chunks_exblas(x, y, lo, hi, bm, T, p, order, digits):
    res = np.zeros((T, p), np.float64)
    err = np.zeros((T, p), np.float64)
    ops = 0
    overflow = 0
    rflags = 0
    for oi in range(order.shape[0]):
        ci = order[oi]
        w = ci % T
        s = lo + ci * bm
        e = s + bm
        if e > hi:
            e = hi
        rrow = res[w]
        erow = err[w]
        for j in range(s, e):
            a = x[j]
            b = y[j]
            r = a * b
            d = _fma_intrinsic(a, b, -r)
            if (r != 0.0 and abs(r) < _PROD_FLOOR) or (
                r == 0.0 and a != 0.0 and b != 0.0
            ):
                if not _prod_error_exact(a, b):
                    rflags += 1
            c = _fpe_accumulate_k(rrow, r)
            if c != 0.0:
                if ops >= _OPS_LIMIT:
                    overflow |= _acc_normalize(digits)
                    ops = 0
                _acc_add_raw(digits, c)
                ops += 1
            c = _fpe_accumulate_k(erow, d)
            if c != 0.0:
                if ops >= _OPS_LIMIT:
                    overflow |= _acc_normalize(digits)
                    ops = 0
                _acc_add_raw(digits, c)
                ops += 1
    for w in range(T):
        for k in range(p):
            for v in (res[w, k], err[w, k]):
                if not math.isfinite(v):
                    # a product or running head left the double range;
                    # the digits are no longer trustworthy
                    overflow |= 2
                elif v != 0.0:
                    if ops >= _OPS_LIMIT:
                        overflow |= _acc_normalize(digits)
                        ops = 0
                    _acc_add_raw(digits, v)
                    ops += 1
    overflow |= _acc_normalize(digits)
    return overflow, rflags


@njit(cache=True)
def _sum_chunks_exblas(x, lo, hi, bm, T, p, order, digits):
    res = np.zeros((T, p), np.float64)
    ops = 0
    overflow = 0
    for oi in range(order.shape[0]):
        ci = order[oi]
        w = ci % T
        s = lo + ci * bm
        e = s + bm
        if e > hi:
            e = hi
        rrow = res[w]
        for j in range(s, e):
            c = _fpe_accumulate_k(rrow, x[j])
            if c != 0.0:
                if ops >= _OPS_LIMIT:
                    overflow |= _acc_normalize(digits)
                    ops = 0
                _acc_add_raw(digits, c)
                ops += 1
    for w in range(T):
        for k in range(p):
            v = res[w, k]
            if not math.isfinite(v):
                overflow |= 2
            elif v != 0.0:
                if ops >= _OPS_LIMIT:
                    overflow |= _acc_normalize(digits)
                    ops = 0
                _acc_add_raw(digits, v)
                ops += 1
    overflow |= _acc_normalize(digits)
    return overflow, 0


@njit(cache=True)
def _dot_chunks_opt(x, y, lo, hi, bm, T, p, order, out):
    res = np.zeros((T, p), np.float64)
    err = np.zeros((T, p), np.float64)
    dropped = 0
    rflags = 0
    for oi in range(order.shape[0]):
        ci = order[oi]
        w = ci % T
        s = lo + ci * bm
        e = s + bm
        if e > hi:
            e = hi
        rrow = res[w]
        erow = err[w]
        for j in range(s, e):
            a = x[j]
            b = y[j]
            r = a * b
            d = _fma_intrinsic(a, b, -r)
            if (r != 0.0 and abs(r) < _PROD_FLOOR) or (
                r == 0.0 and a != 0.0 and b != 0.0
            ):
                if not _prod_error_exact(a, b):
                    rflags += 1
            if _fpe_accumulate_k(rrow, r) != 0.0:
                dropped += 1
            if _fpe_accumulate_k(erow, d) != 0.0:
                dropped += 1
    for w in range(T):
        dropped += _fpe_sum_into_k(res[w], err[w])
    for w in range(1, T):
        dropped += _fpe_sum_into_k(res[0], res[w])
    _fpe_renorm_k(res[0])
    for k in range(p):
        out[k] = res[0, k]
    return dropped, rflags


@njit(cache=True)
def _sum_chunks_opt(x, lo, hi, bm, T, p, order, out):
    res = np.zeros((T, p), np.float64)
    dropped = 0
    for oi in range(order.shape[0]):
        ci = order[oi]
        w = ci % T
        s = lo + ci * bm
        e = s + bm
        if e > hi:
            e = hi
        rrow = res[w]
        for j in range(s, e):
            if _fpe_accumulate_k(rrow, x[j]) != 0.0:
                dropped += 1
    for w in range(1, T):
        dropped += _fpe_sum_into_k(res[0], res[w])
    _fpe_renorm_k(res[0])
    for k in range(p):
        out[k] = res[0, k]
    return dropped, 0


@njit(cache=True)
def _dot_pair_chunks_exblas(x1, y1, x2, y2, lo, hi, bm, T, p, order, dig1, dig2):
    res1 = np.zeros((T, p), np.float64)
    err1 = np.zeros((T, p), np.float64)
    res2 = np.zeros((T, p), np.float64)
    err2 = np.zeros((T, p), np.float64)
    ops1 = 0
    ops2 = 0
    overflow = 0
    rflags = 0
    for oi in range(order.shape[0]):
        ci = order[oi]
        w = ci % T
        s = lo + ci * bm
        e = s + bm
        if e > hi:
            e = hi
        r1 = res1[w]
        e1 = err1[w]
        r2 = res2[w]
        e2 = err2[w]
        for j in range(s, e):
            a = x1[j]
            b = y1[j]
            r = a * b
            d = _fma_intrinsic(a, b, -r)
            if (r != 0.0 and abs(r) < _PROD_FLOOR) or (
                r == 0.0 and a != 0.0 and b != 0.0
            ):
                if not _prod_error_exact(a, b):
                    rflags += 1
            c = _fpe_accumulate_k(r1, r)
            if c != 0.0:
                if ops1 >= _OPS_LIMIT:
                    overflow |= _acc_normalize(dig1)
                    ops1 = 0
                _acc_add_raw(dig1, c)
                ops1 += 1
            c = _fpe_accumulate_k(e1, d)
            if c != 0.0:
                if ops1 >= _OPS_LIMIT:
                    overflow |= _acc_normalize(dig1)
                    ops1 = 0
                _acc_add_raw(dig1, c)
                ops1 += 1
            a = x2[j]
            b = y2[j]
            r = a * b
            d = _fma_intrinsic(a, b, -r)
            if (r != 0.0 and abs(r) < _PROD_FLOOR) or (
                r == 0.0 and a != 0.0 and b != 0.0
            ):
                if not _prod_error_exact(a, b):
                    rflags += 1
            c = _fpe_accumulate_k(r2, r)
            if c != 0.0:
                if ops2 >= _OPS_LIMIT:
                    overflow |= _acc_normalize(dig2)
                    ops2 = 0
                _acc_add_raw(dig2, c)
                ops2 += 1
            c = _fpe_accumulate_k(e2, d)
            if c != 0.0:
                if ops2 >= _OPS_LIMIT:
                    overflow |= _acc_normalize(dig2)
                    ops2 = 0
                _acc_add_raw(dig2, c)
                ops2 += 1
    for w in range(T):
        for k in range(p):
            for v in (res1[w, k], err1[w, k]):
                if not math.isfinite(v):
                    overflow |= 2
                elif v != 0.0:
                    if ops1 >= _OPS_LIMIT:
                        overflow |= _acc_normalize(dig1)
                        ops1 = 0
                    _acc_add_raw(dig1, v)
                    ops1 += 1
            for v in (res2[w, k], err2[w, k]):
                if not math.isfinite(v):
                    overflow |= 2
                elif v != 0.0:
                    if ops2 >= _OPS_LIMIT:
                        overflow |= _acc_normalize(dig2)
                        ops2 = 0
                    _acc_add_raw(dig2, v)
                    ops2 += 1
    overflow |= _acc_normalize(dig1)
    overflow |= _acc_normalize(dig2)
    return overflow, rflags


@njit(cache=True)
def _dot_pair_chunks_opt(x1, y1, x2, y2, lo, hi, bm, T, p, order, out1, out2):
    res1 = np.zeros((T, p), np.float64)
    err1 = np.zeros((T, p), np.float64)
    res2 = np.zeros((T, p), np.float64)
    err2 = np.zeros((T, p), np.float64)
    dropped = 0
    rflags = 0
    for oi in range(order.shape[0]):
        ci = order[oi]
        w = ci % T
        s = lo + ci * bm
        e = s + bm
        if e > hi:
            e = hi
        r1 = res1[w]
        e1 = err1[w]
        r2 = res2[w]
        e2 = err2[w]
        for j in range(s, e):
            a = x1[j]
            b = y1[j]
            r = a * b
            d = _fma_intrinsic(a, b, -r)
            if (r != 0.0 and abs(r) < _PROD_FLOOR) or (
                r == 0.0 and a != 0.0 and b != 0.0
            ):
                if not _prod_error_exact(a, b):
                    rflags += 1
            if _fpe_accumulate_k(r1, r) != 0.0:
                dropped += 1
            if _fpe_accumulate_k(e1, d) != 0.0:
                dropped += 1
            a = x2[j]
            b = y2[j]
            r = a * b
            d = _fma_intrinsic(a, b, -r)
            if (r != 0.0 and abs(r) < _PROD_FLOOR) or (
                r == 0.0 and a != 0.0 and b != 0.0
            ):
                if not _prod_error_exact(a, b):
                    rflags += 1
            if _fpe_accumulate_k(r2, r) != 0.0:
                dropped += 1
            if _fpe_accumulate_k(e2, d) != 0.0:
                dropped += 1
    for w in range(T):
        dropped += _fpe_sum_into_k(res1[w], err1[w])
        dropped += _fpe_sum_into_k(res2[w], err2[w])
    for w in range(1, T):
        dropped += _fpe_sum_into_k(res1[0], res1[w])
        dropped += _fpe_sum_into_k(res2[0], res2[w])
    _fpe_renorm_k(res1[0])
    _fpe_renorm_k(res2[0])
    for k in range(p):
        out1[k] = res1[0, k]
        out2[k] = res2[0, k]
    return dropped, rflags


@njit(cache=True)
def _dot_chunks_naive(x, y, lo, hi, bm, T, order):
    part = np.zeros(T, np.float64)
    for oi in range(order.shape[0]):
        ci = order[oi]
        w = ci % T
        s = lo + ci * bm
        e = s + bm
        if e > hi:
            e = hi
        acc = 0.0
        for j in range(s, e):
            acc += x[j] * y[j]
        part[w] += acc
    return part


@njit(cache=True)
def _sum_chunks_naive(x, lo, hi, bm, T, order):
    part = np.zeros(T, np.float64)
    for oi in range(order.shape[0]):
        ci = order[oi]
        w = ci % T
        s = lo + ci * bm
        e = s + bm
        if e > hi:
            e = hi
        acc = 0.0
        for j in range(s, e):
            acc += x[j]
        part[w] += acc
    return part


# ---------------------------------------------------------------------------
# orchestration


def _prepare(v, name: str) -> np.ndarray:
    arr = np.ascontiguousarray(v, dtype=np.float64)
    if arr.ndim != 1:
        raise ValueError(f"{name} must be one-dimensional")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"non-finite element in {name}")
    return arr


def _orders(topo: Topology, n: int, chunk_orders) -> list[np.ndarray]:
    out = []
    for pi, (lo, hi) in enumerate(topo.slices(n)):
        nch = topo.chunk_count(lo, hi)
        if chunk_orders is None:
            out.append(np.arange(nch, dtype=np.int64))
            continue
        order = np.asarray(chunk_orders[pi], dtype=np.int64)
        if order.shape != (nch,) or not np.array_equal(
            np.sort(order), np.arange(nch, dtype=np.int64)
        ):
            raise ValueError(
                f"chunk_orders[{pi}] must be a permutation of range({nch})"
            )
        out.append(order)
    return out


def _raise_overflow(of: int) -> None:
    if of & 2:
        raise OverflowError("dot/sum exceeded the representable range")
    if of:
        raise OverflowError("long accumulator span exceeded")


def _check_fpe_size(p: int) -> int:
    p = int(p)
    if not (2 <= p <= MAX_SIZE):
        raise ValueError(f"fpe size must be in [2, {MAX_SIZE}], got {p}")
    return p


def _raise_range(rflags: int) -> None:
    if rflags:
        raise FpRangeError(
            f"{rflags} product(s) below 2**-968: error terms would need "
            "bits under the binary64 quantum floor"
        )


def exdot_exblas(
    x,
    y,
    topo: Topology = Topology(),
    fpe_size: int = DEFAULT_SIZE,
    chunk_orders: Sequence[Sequence[int]] | None = None,
) -> ReduceResult:
    """Correctly rounded dot product via expansions + long accumulator.

    The result is the round-to-nearest-even double of the exact
    mathematical dot product, independent of topology and schedule.
    """
    x = _prepare(x, "x")
    y = _prepare(y, "y")
    if x.shape[0] != y.shape[0]:
        raise ValueError(f"length mismatch: {x.shape[0]} vs {y.shape[0]}")
    p = _check_fpe_size(fpe_size)
    n = x.shape[0]
    orders = _orders(topo, n, chunk_orders)
    root = np.zeros(DIGITS, np.int64)
    rflags = 0
    for pi, (lo, hi) in enumerate(topo.slices(n)):
        digits = np.zeros(DIGITS, np.int64)
        of, rf = _dot_chunks_exblas(
            x, y, lo, hi, topo.chunk, topo.workers, p, orders[pi], digits
        )
        rflags += rf
        _raise_overflow(of)
        if _acc_merge_into_py(root, digits):
            raise OverflowError("long accumulator span exceeded")
    _raise_range(rflags)
    return ReduceResult(float(_acc_round(root)), False)


def _acc_merge_into_py(a: np.ndarray, b: np.ndarray) -> int:
    a += b
    return _acc_normalize(a)


def exsum_exblas(
    x,
    topo: Topology = Topology(),
    fpe_size: int = DEFAULT_SIZE,
    chunk_orders: Sequence[Sequence[int]] | None = None,
) -> ReduceResult:
    """Correctly rounded sum; same pipeline as exdot_exblas, no products."""
    x = _prepare(x, "x")
    p = _check_fpe_size(fpe_size)
    n = x.shape[0]
    orders = _orders(topo, n, chunk_orders)
    root = np.zeros(DIGITS, np.int64)
    for pi, (lo, hi) in enumerate(topo.slices(n)):
        digits = np.zeros(DIGITS, np.int64)
        of, _ = _sum_chunks_exblas(
            x, lo, hi, topo.chunk, topo.workers, p, orders[pi], digits
        )
        _raise_overflow(of)
        if _acc_merge_into_py(root, digits):
            raise OverflowError("long accumulator span exceeded")
    return ReduceResult(float(_acc_round(root)), False)


def _finish_opt_raw(proc_parts: list[np.ndarray], p: int) -> tuple[float, int]:
    """Merge per-process expansions at the root and round once.

    Returns (value, carries dropped during the merge/round)."""
    rootf = proc_parts[0]
    dropped = 0
    for part in proc_parts[1:]:
        dropped += int(_fpe_sum_into_k(rootf, part))
    scratch = np.zeros(p + 2, np.float64)
    val, fault = _fpe_round_full_k(rootf, scratch)
    if not math.isfinite(val):
        raise OverflowError("dot/sum exceeded the representable range")
    if fault and dropped == 0:
        raise ArithmeticError("internal rounding fault")
    return float(val), dropped


def _finish_opt(proc_parts: list[np.ndarray], dropped: int, p: int) -> ReduceResult:
    val, more = _finish_opt_raw(proc_parts, p)
    return ReduceResult(val, (dropped + more) > 0)


def exdot_opt(
    x,
    y,
    topo: Topology = Topology(),
    fpe_size: int = DEFAULT_SIZE,
    chunk_orders: Sequence[Sequence[int]] | None = None,
) -> ReduceResult:
    """Expansion-only dot product.

    Bit-identical to exdot_exblas whenever residue_warning is False;
    dropped carries (inputs spanning more than the expansion window)
    set the warning instead of failing.
    """
    x = _prepare(x, "x")
    y = _prepare(y, "y")
    if x.shape[0] != y.shape[0]:
        raise ValueError(f"length mismatch: {x.shape[0]} vs {y.shape[0]}")
    p = _check_fpe_size(fpe_size)
    n = x.shape[0]
    orders = _orders(topo, n, chunk_orders)
    parts = []
    dropped = 0
    rflags = 0
    for pi, (lo, hi) in enumerate(topo.slices(n)):
        out = np.zeros(p, np.float64)
        dr, rf = _dot_chunks_opt(
            x, y, lo, hi, topo.chunk, topo.workers, p, orders[pi], out
        )
        dropped += int(dr)
        rflags += rf
        parts.append(out)
    _raise_range(rflags)
    return _finish_opt(parts, dropped, p)


def exsum_opt(
    x,
    topo: Topology = Topology(),
    fpe_size: int = DEFAULT_SIZE,
    chunk_orders: Sequence[Sequence[int]] | None = None,
) -> ReduceResult:
    """Expansion-only sum; see exdot_opt."""
    x = _prepare(x, "x")
    p = _check_fpe_size(fpe_size)
    n = x.shape[0]
    orders = _orders(topo, n, chunk_orders)
    parts = []
    dropped = 0
    for pi, (lo, hi) in enumerate(topo.slices(n)):
        out = np.zeros(p, np.float64)
        dr, _ = _sum_chunks_opt(
            x, lo, hi, topo.chunk, topo.workers, p, orders[pi], out
        )
        dropped += int(dr)
        parts.append(out)
    return _finish_opt(parts, dropped, p)


def _prepare_pair(x1, y1, x2, y2):
    x1 = _prepare(x1, "x1")
    y1 = _prepare(y1, "y1")
    x2 = _prepare(x2, "x2")
    y2 = _prepare(y2, "y2")
    n = x1.shape[0]
    if y1.shape[0] != n or x2.shape[0] != n or y2.shape[0] != n:
        raise ValueError("all four vectors must share one length")
    return x1, y1, x2, y2, n


def exdot_pair_exblas(
    x1,
    y1,
    x2,
    y2,
    topo: Topology = Topology(),
    fpe_size: int = DEFAULT_SIZE,
    chunk_orders: Sequence[Sequence[int]] | None = None,
) -> tuple[ReduceResult, ReduceResult]:
    """Two dot products in one pass and one reduction phase.

    Each process computes both partials over its slice in a single
    sweep and contributes one combined message; the root merges and
    rounds both scalars. The values are identical to two separate
    exdot_exblas calls (each carrier is exact); fusing them halves the
    passes and the messages, which is what an iterative solver wants.
    """
    x1, y1, x2, y2, n = _prepare_pair(x1, y1, x2, y2)
    p = _check_fpe_size(fpe_size)
    orders = _orders(topo, n, chunk_orders)
    root1 = np.zeros(DIGITS, np.int64)
    root2 = np.zeros(DIGITS, np.int64)
    rflags = 0
    for pi, (lo, hi) in enumerate(topo.slices(n)):
        dig1 = np.zeros(DIGITS, np.int64)
        dig2 = np.zeros(DIGITS, np.int64)
        of, rf = _dot_pair_chunks_exblas(
            x1, y1, x2, y2, lo, hi, topo.chunk, topo.workers, p, orders[pi],
            dig1, dig2,
        )
        rflags += rf
        _raise_overflow(of)
        if _acc_merge_into_py(root1, dig1) or _acc_merge_into_py(root2, dig2):
            raise OverflowError("long accumulator span exceeded")
    _raise_range(rflags)
    return (
        ReduceResult(float(_acc_round(root1)), False),
        ReduceResult(float(_acc_round(root2)), False),
    )


def exdot_pair_opt(
    x1,
    y1,
    x2,
    y2,
    topo: Topology = Topology(),
    fpe_size: int = DEFAULT_SIZE,
    chunk_orders: Sequence[Sequence[int]] | None = None,
) -> tuple[ReduceResult, ReduceResult]:
    """Expansion-only variant of exdot_pair_exblas."""
    x1, y1, x2, y2, n = _prepare_pair(x1, y1, x2, y2)
    p = _check_fpe_size(fpe_size)
    orders = _orders(topo, n, chunk_orders)
    parts1 = []
    parts2 = []
    dropped = 0
    rflags = 0
    for pi, (lo, hi) in enumerate(topo.slices(n)):
        out1 = np.zeros(p, np.float64)
        out2 = np.zeros(p, np.float64)
        dr, rf = _dot_pair_chunks_opt(
            x1, y1, x2, y2, lo, hi, topo.chunk, topo.workers, p, orders[pi],
            out1, out2,
        )
        dropped += int(dr)
        rflags += rf
        parts1.append(out1)
        parts2.append(out2)
    _raise_range(rflags)
    # a dropped carry anywhere in the fused phase flags both scalars:
    # the kernel counter cannot attribute drops to one stream
    v1, d1 = _finish_opt_raw(parts1, p)
    v2, d2 = _finish_opt_raw(parts2, p)
    warn = (dropped + d1 + d2) > 0
    return ReduceResult(v1, warn), ReduceResult(v2, warn)


def dot_baseline(
    x,
    y,
    topo: Topology = Topology(),
    rng: np.random.Generator | None = None,
) -> float:
    """Naive parallel dot: plain partial sums, association follows the
    schedule. With an rng, chunk execution and merge orders are shuffled
    the way a real nondeterministic scheduler would; without one the
    fixed ascending order makes it deterministic (single address space).
    """
    x = _prepare(x, "x")
    y = _prepare(y, "y")
    if x.shape[0] != y.shape[0]:
        raise ValueError(f"length mismatch: {x.shape[0]} vs {y.shape[0]}")
    return _baseline(topo, x.shape[0], rng,
                     lambda lo, hi, order: _dot_chunks_naive(
                         x, y, lo, hi, topo.chunk, topo.workers, order))


def sum_baseline(
    x,
    topo: Topology = Topology(),
    rng: np.random.Generator | None = None,
) -> float:
    """Naive parallel sum; see dot_baseline."""
    x = _prepare(x, "x")
    return _baseline(topo, x.shape[0], rng,
                     lambda lo, hi, order: _sum_chunks_naive(
                         x, lo, hi, topo.chunk, topo.workers, order))


def _baseline(topo: Topology, n: int, rng, chunk_fn) -> float:
    proc_vals = np.zeros(topo.processes, np.float64)
    for pi, (lo, hi) in enumerate(topo.slices(n)):
        nch = topo.chunk_count(lo, hi)
        order = np.arange(nch, dtype=np.int64)
        if rng is not None:
            rng.shuffle(order)
        part = chunk_fn(lo, hi, order)
        worker_order = np.arange(topo.workers)
        if rng is not None:
            rng.shuffle(worker_order)
        acc = 0.0
        for w in worker_order:
            acc += part[w]
        proc_vals[pi] = acc
    proc_order = np.arange(topo.processes)
    if rng is not None:
        rng.shuffle(proc_order)
    total = 0.0
    for pi in proc_order:
        total += proc_vals[pi]
    return float(total)


def reduce_then_broadcast(partials: Sequence) -> float:
    """Merge per-process partials in ascending rank order at the root,
    round once there, and hand every rank the same rounded double.

    Accepts a list of LongAccumulator or a list of Fpe (all the same
    type). The merge is exact, so any merge order a test chooses to
    apply externally gives the same value; this function fixes ascending
    order, which is what the reductions above use.
    """
    if len(partials) == 0:
        raise ValueError("need at least one partial")
    first = partials[0]
    if isinstance(first, LongAccumulator):
        if not all(isinstance(q, LongAccumulator) for q in partials):
            raise TypeError("mixed partial types")
        root = first.copy()
        for q in partials[1:]:
            root.merge(q)
        return root.round_nearest()
    if isinstance(first, Fpe):
        if not all(isinstance(q, Fpe) for q in partials):
            raise TypeError("mixed partial types")
        root = first.copy()
        for q in partials[1:]:
            root.add(q)
        return root.round_near_sum()
    raise TypeError("partials must be LongAccumulator or Fpe instances")
