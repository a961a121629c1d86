"""Symmetric positive definite sparse matrices in CSR form.

Construction always validates: square shape, sorted structure, exact
numeric symmetry, and a positive diagonal present in every row. The
Matrix Market reader accepts the strict subset these checks imply
(coordinate real, symmetric or general, 1-based indices, lower triangle
stored for symmetric files) and rejects everything else loudly.

spmv computes each row as a single fused-multiply-add chain seeded from
+0.0 in column order. Rows are independent, so any row ordering or
partitioning of the matrix produces bitwise identical output; the
row_order hook exists so tests can prove that.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from numba import njit

from .eft import _fma_intrinsic
from .repro_reduce import exdot_exblas

__all__ = [
    "CsrMatrix",
    "load_matrix_market",
    "save_matrix_market",
    "gen_poisson27",
    "gen_band",
    "gen_illcond",
    "condition_estimate",
    "spmv",
]


@njit(cache=True)
def _spmv_k(row_ptr, col_idx, values, x, y, order):
    for oi in range(order.shape[0]):
        i = order[oi]
        acc = 0.0
        for k in range(row_ptr[i], row_ptr[i + 1]):
            acc = _fma_intrinsic(values[k], x[col_idx[k]], acc)
        y[i] = acc


@dataclass
class CsrMatrix:
    """Validated CSR storage of a symmetric positive-definite pattern."""

    n: int
    row_ptr: np.ndarray
    col_idx: np.ndarray
    values: np.ndarray

    def __post_init__(self) -> None:
        self.n = int(self.n)
        if self.n < 1:
            raise ValueError("matrix dimension must be >= 1")
        self.row_ptr = np.ascontiguousarray(self.row_ptr, dtype=np.int64)
        self.col_idx = np.ascontiguousarray(self.col_idx, dtype=np.int64)
        self.values = np.ascontiguousarray(self.values, dtype=np.float64)
        n, rp, ci, v = self.n, self.row_ptr, self.col_idx, self.values
        if rp.shape != (n + 1,):
            raise ValueError("row_ptr must have length n + 1")
        if rp[0] != 0 or rp[-1] != ci.shape[0] or np.any(np.diff(rp) < 0):
            raise ValueError("row_ptr must be monotone from 0 to nnz")
        if v.shape != ci.shape:
            raise ValueError("values and col_idx lengths differ")
        if ci.shape[0] > 0 and (ci.min() < 0 or ci.max() >= n):
            raise ValueError("column index out of range")
        if not np.all(np.isfinite(v)):
            raise ValueError("matrix values must be finite")
        rows = np.repeat(np.arange(n, dtype=np.int64), np.diff(rp))
        same_row = rows[1:] == rows[:-1]
        if np.any(np.diff(ci)[same_row] <= 0):
            raise ValueError("column indices must be strictly increasing per row")
        dmask = ci == rows
        if np.count_nonzero(dmask) != n:
            raise ValueError("every row needs its diagonal entry")
        if np.any(v[dmask] <= 0.0):
            raise ValueError("diagonal entries must be positive")
        # exact symmetry: the transpose listing must match entry for entry
        t = np.lexsort((rows, ci))
        if not (
            np.array_equal(ci[t], rows)
            and np.array_equal(rows[t], ci)
            and np.array_equal(v[t], v)
        ):
            raise ValueError("matrix must be exactly symmetric")

    @property
    def nnz(self) -> int:
        return int(self.col_idx.shape[0])

    def rows_expanded(self) -> np.ndarray:
        return np.repeat(np.arange(self.n, dtype=np.int64), np.diff(self.row_ptr))

    def diagonal(self) -> np.ndarray:
        mask = self.col_idx == self.rows_expanded()
        return self.values[mask].copy()

    def copy(self) -> "CsrMatrix":
        return CsrMatrix(
            self.n, self.row_ptr.copy(), self.col_idx.copy(), self.values.copy()
        )

    @classmethod
    def from_coo(cls, n: int, rows, cols, values) -> "CsrMatrix":
        """Build from coordinate triplets.

        Entries are sorted by (row, col); duplicates are summed
        sequentially in input order (the sort is stable), one rounding
        per addition, which keeps construction deterministic.
        """
        rows = np.ascontiguousarray(rows, dtype=np.int64)
        cols = np.ascontiguousarray(cols, dtype=np.int64)
        vals = np.ascontiguousarray(values, dtype=np.float64)
        if not (rows.shape == cols.shape == vals.shape) or rows.ndim != 1:
            raise ValueError("rows, cols, values must be equal-length 1-d arrays")
        if rows.shape[0] == 0:
            raise ValueError("matrix needs at least the diagonal entries")
        if rows.min() < 0 or rows.max() >= n or cols.min() < 0 or cols.max() >= n:
            raise ValueError("coordinate out of range")
        order = np.lexsort((cols, rows))
        r = rows[order]
        c = cols[order]
        v = vals[order]
        change = np.empty(r.shape[0], dtype=bool)
        change[0] = True
        change[1:] = (r[1:] != r[:-1]) | (c[1:] != c[:-1])
        starts = np.flatnonzero(change)
        if starts.shape[0] != r.shape[0]:
            ends = np.append(starts[1:], r.shape[0])
            vv = v[starts].copy()
            for gi in np.flatnonzero(ends - starts > 1):
                acc = 0.0
                for j in range(starts[gi], ends[gi]):
                    acc += v[j]
                vv[gi] = acc
            r, c, v = r[starts], c[starts], vv
        row_ptr = np.zeros(n + 1, dtype=np.int64)
        row_ptr[1:] = np.cumsum(np.bincount(r, minlength=n))
        return cls(n, row_ptr, c, v)


def spmv(a: CsrMatrix, x, row_order: Sequence[int] | None = None) -> np.ndarray:
    """y = A x, one fma chain per row seeded from +0.0.

    row_order only changes the order rows are computed in, never the
    values; it exists to demonstrate partition invariance.
    """
    x = np.ascontiguousarray(x, dtype=np.float64)
    if x.shape != (a.n,):
        raise ValueError(f"vector length {x.shape} does not match n={a.n}")
    if row_order is None:
        order = np.arange(a.n, dtype=np.int64)
    else:
        order = np.asarray(row_order, dtype=np.int64)
        if not np.array_equal(np.sort(order), np.arange(a.n, dtype=np.int64)):
            raise ValueError("row_order must be a permutation of range(n)")
    y = np.empty(a.n, dtype=np.float64)
    _spmv_k(a.row_ptr, a.col_idx, a.values, x, y, order)
    return y


# ---------------------------------------------------------------------------
# Matrix Market I/O (coordinate real symmetric/general, strict subset)

_HEADER_RE = re.compile(
    r"^%%MatrixMarket\s+matrix\s+coordinate\s+real\s+(symmetric|general)\s*$",
    re.IGNORECASE,
)


def load_matrix_market(path) -> CsrMatrix:
    """Read a coordinate real symmetric/general file into a CsrMatrix.

    Symmetric files must store only the lower triangle (i >= j,
    1-based); off-diagonal entries are mirrored. General files must
    already contain both triangles and be exactly symmetric. Anything
    outside that dialect (array format, pattern, complex, integer,
    non-square shape) is rejected.
    """
    with open(path, "r", encoding="ascii") as fh:
        header = fh.readline()
        m = _HEADER_RE.match(header.strip())
        if not m:
            raise ValueError(
                "unsupported Matrix Market header (need matrix coordinate "
                f"real symmetric|general): {header.strip()!r}"
            )
        symmetric = m.group(1).lower() == "symmetric"
        size_line = None
        for line in fh:
            s = line.strip()
            if not s or s.startswith("%"):
                continue
            size_line = s
            break
        if size_line is None:
            raise ValueError("missing size line")
        parts = size_line.split()
        if len(parts) != 3:
            raise ValueError(f"malformed size line: {size_line!r}")
        try:
            nrows, ncols, nnz = (int(p) for p in parts)
        except ValueError as exc:
            raise ValueError(f"malformed size line: {size_line!r}") from exc
        if nrows != ncols:
            raise ValueError(f"matrix must be square, got {nrows}x{ncols}")
        if nrows < 1 or nnz < 1:
            raise ValueError("empty matrix")
        ri = np.empty(nnz, dtype=np.int64)
        ci = np.empty(nnz, dtype=np.int64)
        vv = np.empty(nnz, dtype=np.float64)
        k = 0
        for lineno, line in enumerate(fh, start=1):
            s = line.strip()
            if not s or s.startswith("%"):
                continue
            if k >= nnz:
                raise ValueError(f"more than {nnz} entries in file")
            parts = s.split()
            if len(parts) != 3:
                raise ValueError(f"malformed entry line: {s!r}")
            try:
                i = int(parts[0])
                j = int(parts[1])
                v = float(parts[2])
            except ValueError as exc:
                raise ValueError(f"malformed entry line: {s!r}") from exc
            if not (1 <= i <= nrows and 1 <= j <= ncols):
                raise ValueError(f"entry index out of range: {s!r}")
            if not math.isfinite(v):
                raise ValueError(f"non-finite entry: {s!r}")
            if symmetric and i < j:
                raise ValueError(
                    f"symmetric file must store the lower triangle only: {s!r}"
                )
            ri[k] = i - 1
            ci[k] = j - 1
            vv[k] = v
            k += 1
        if k != nnz:
            raise ValueError(f"expected {nnz} entries, found {k}")
    if symmetric:
        off = ri != ci
        mirrored_r = np.concatenate([ri, ci[off]])
        mirrored_c = np.concatenate([ci, ri[off]])
        mirrored_v = np.concatenate([vv, vv[off]])
        return CsrMatrix.from_coo(nrows, mirrored_r, mirrored_c, mirrored_v)
    return CsrMatrix.from_coo(nrows, ri, ci, vv)


def save_matrix_market(a: CsrMatrix, path, comment: str = "") -> None:
    """Write the lower triangle as coordinate real symmetric.

    Values are emitted with repr (shortest round-tripping decimal), so
    load(save(A)) reproduces A bitwise.
    """
    rows = a.rows_expanded()
    keep = a.col_idx <= rows
    r = rows[keep]
    c = a.col_idx[keep]
    v = a.values[keep]
    with open(path, "w", encoding="ascii") as fh:
        fh.write("%%MatrixMarket matrix coordinate real symmetric\n")
        for line in comment.splitlines():
            fh.write(f"% {line}\n")
        fh.write(f"{a.n} {a.n} {r.shape[0]}\n")
        for i in range(r.shape[0]):
            fh.write(f"{r[i] + 1} {c[i] + 1} {float(v[i])!r}\n")


# ---------------------------------------------------------------------------
# generators


def gen_poisson27(nx: int, ny: int, nz: int) -> CsrMatrix:
    """27-point Poisson stencil on an nx x ny x nz grid.

    Diagonal 26.0, every in-bounds neighbor (including diagonals of the
    3x3x3 cube) gets -1.0. Dirichlet truncation at the boundary keeps
    the matrix positive definite.
    """
    if nx < 1 or ny < 1 or nz < 1:
        raise ValueError("grid dimensions must be >= 1")
    ix, iy, iz = np.indices((nx, ny, nz))
    ix = ix.ravel()
    iy = iy.ravel()
    iz = iz.ravel()
    lin = (ix * ny + iy) * nz + iz
    rows_l = []
    cols_l = []
    vals_l = []
    for dx in (-1, 0, 1):
        for dy in (-1, 0, 1):
            for dz in (-1, 0, 1):
                jx = ix + dx
                jy = iy + dy
                jz = iz + dz
                ok = (
                    (jx >= 0) & (jx < nx)
                    & (jy >= 0) & (jy < ny)
                    & (jz >= 0) & (jz < nz)
                )
                rows_l.append(lin[ok])
                cols_l.append(((jx * ny + jy) * nz + jz)[ok])
                val = 26.0 if (dx == 0 and dy == 0 and dz == 0) else -1.0
                vals_l.append(np.full(int(ok.sum()), val))
    return CsrMatrix.from_coo(
        nx * ny * nz,
        np.concatenate(rows_l),
        np.concatenate(cols_l),
        np.concatenate(vals_l),
    )


def gen_band(n: int, band: int) -> CsrMatrix:
    """Banded SPD matrix: diagonal 2*band + 1, off-diagonals -1.

    Strict diagonal dominance (every row sum is at least 1) makes it
    positive definite at any size.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    if band < 1 or band >= n:
        raise ValueError("band must satisfy 1 <= band < n")
    rows_l = []
    cols_l = []
    vals_l = []
    for off in range(-band, band + 1):
        m = n - abs(off)
        r = np.arange(m, dtype=np.int64) + max(0, -off)
        c = r + off
        rows_l.append(r)
        cols_l.append(c)
        vals_l.append(np.full(m, float(2 * band + 1) if off == 0 else -1.0))
    return CsrMatrix.from_coo(
        n, np.concatenate(rows_l), np.concatenate(cols_l), np.concatenate(vals_l)
    )


def _scale_first(a: CsrMatrix, s: float) -> CsrMatrix:
    """Congruence scaling D A D with D = diag(s, 1, ..., 1)."""
    rows = a.rows_expanded()
    in_row0 = rows == 0
    in_col0 = a.col_idx == 0
    v = a.values.copy()
    v[in_row0 ^ in_col0] *= s
    v[in_row0 & in_col0] *= s * s
    if not np.all(np.isfinite(v)):
        raise OverflowError("scaling overflowed matrix entries")
    return CsrMatrix(a.n, a.row_ptr.copy(), a.col_idx.copy(), v)


def condition_estimate(a: CsrMatrix, max_steps: int = 100) -> float:
    """Spectral condition estimate via Lanczos with full reorthogonalization.

    Deterministic: fixed start vector (normalized ones), reproducible
    dot products, fixed step cap. For n <= max_steps the Krylov space
    is complete and the estimate is the dense answer up to roundoff.
    """
    n = a.n
    if n == 1:
        return 1.0
    k = min(n, int(max_steps))
    v = np.full(n, 1.0 / math.sqrt(n))
    basis = np.zeros((k, n))
    alphas = []
    betas = []
    vprev = np.zeros(n)
    beta_prev = 0.0
    for step in range(k):
        basis[step] = v
        w = spmv(a, v)
        alpha = exdot_exblas(w, v).value
        alphas.append(alpha)
        w = w - alpha * v - beta_prev * vprev
        for j in range(step + 1):
            w = w - exdot_exblas(w, basis[j]).value * basis[j]
        beta = math.sqrt(exdot_exblas(w, w).value)
        if beta < 1e-150 or step == k - 1:
            break
        betas.append(beta)
        vprev = v
        v = w / beta
        beta_prev = beta
    m = len(alphas)
    t = np.zeros((m, m))
    for i in range(m):
        t[i, i] = alphas[i]
        if i + 1 < m:
            t[i, i + 1] = t[i + 1, i] = betas[i]
    eig = np.linalg.eigvalsh(t)
    lam_min = float(eig[0])
    lam_max = float(eig[-1])
    if lam_min <= 0.0 or not math.isfinite(lam_max):
        raise ArithmeticError(
            "condition estimator produced a nonpositive or non-finite "
            "Ritz value; matrix is not usefully positive definite"
        )
    return lam_max / lam_min


def gen_illcond(
    base: CsrMatrix, target_cond: float, rel_tol: float = 0.1,
    max_steps: int = 100,
) -> tuple[CsrMatrix, float]:
    """Scale the first row/column of base until the estimated condition
    number is within rel_tol of target_cond.

    Returns (matrix, estimate). The scaling is the congruence
    D A D with D = diag(s, 1, ..., 1): the (0,0) entry picks up s**2,
    the rest of row and column 0 pick up s, SPD is preserved. s is
    found by bisection on its logarithm.
    """
    if not (math.isfinite(target_cond) and target_cond >= 1.0):
        raise ValueError("target condition must be finite and >= 1")
    if target_cond > 1e14:
        raise ValueError(
            "targets beyond 1e14 cannot be certified to 10% by a "
            "double-precision estimator"
        )
    est0 = condition_estimate(base, max_steps)
    if abs(est0 - target_cond) <= rel_tol * target_cond:
        return base.copy(), est0

    def estimate(log_s: float) -> float:
        # past the estimator's resolution (or a value overflow) the
        # condition is certainly beyond any accepted target
        try:
            m = _scale_first(base, 10.0**log_s)
            return condition_estimate(m, max_steps)
        except (OverflowError, ArithmeticError):
            return math.inf

    if est0 > target_cond * (1.0 + rel_tol):
        raise ValueError(
            f"base condition {est0:.3g} already above target {target_cond:.3g}; "
            "this generator only worsens conditioning"
        )
    lo, hi = 0.0, 1.0
    for _ in range(64):
        if estimate(hi) >= target_cond:
            break
        lo, hi = hi, hi * 2.0
    else:
        raise RuntimeError("could not bracket the target condition number")
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        est = estimate(mid)
        if abs(est - target_cond) <= rel_tol * target_cond:
            return _scale_first(base, 10.0**mid), est
        if est < target_cond:
            lo = mid
        else:
            hi = mid
    raise RuntimeError(
        f"bisection did not reach target condition {target_cond:.3g} "
        f"within tolerance {rel_tol:.0%}"
    )
