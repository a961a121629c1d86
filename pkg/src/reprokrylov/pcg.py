"""Jacobi-preconditioned conjugate gradients with reproducible reductions.

Every operation in the iteration is either elementwise with one
rounding per element (axpy via fma, preconditioner application,
residual update) or a reduction through the exact pipeline. With the
exblas or opt variant the whole trajectory (iteration count, every
recorded residual, the solution vector) is a pure function of the
matrix, the right-hand side, and the configuration; the simulated
topology cannot touch it.

Convergence is tested on tau = <r, r>, the squared residual norm,
against config.tolerance (default 1e-8). Set
sqrt_residual_convergence to test sqrt(tau) <= tolerance instead.

The two scalars each iteration needs (<z, r> and <r, r>) come from one
fused reduction phase: one pass over the vectors, one simulated
message, with beta carried over from the previous iteration for the
direction update.

The baseline variant exists to show the problem: ordinary partial
sums whose association follows the schedule. Give it a shuffle rng
(or seed the CLI) and the residual trajectories scatter run to run;
the exact variants cannot.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from numba import njit

from .eft import _fma_intrinsic
from .repro_reduce import (
    Topology,
    dot_baseline,
    exdot_exblas,
    exdot_opt,
    exdot_pair_exblas,
    exdot_pair_opt,
)
from .sparse import CsrMatrix, spmv

__all__ = [
    "SolverConfig",
    "SolverResult",
    "BreakdownError",
    "DivergenceError",
    "pcg_solve",
    "jacobi_build",
    "jacobi_apply",
    "axpy_fma",
    "direct_error",
    "VARIANTS",
]

VARIANTS = ("exblas", "opt", "baseline")


class BreakdownError(ArithmeticError):
    """<d, A d> was not positive: the matrix is not SPD for this solve."""

    def __init__(self, iteration: int, value: float):
        super().__init__(
            f"curvature <d, A d> = {value!r} at iteration {iteration}; "
            "conjugate gradients requires a positive definite operator"
        )
        self.iteration = iteration
        self.value = value


class DivergenceError(ArithmeticError):
    """The residual left the representable range (overflow or NaN)."""


@dataclass(frozen=True)
class SolverConfig:
    variant: str = "exblas"
    tolerance: float = 1e-8
    max_iterations: int = 10000
    topology: Topology = field(default_factory=Topology)
    fpe_size: int = 8
    sqrt_residual_convergence: bool = False
    baseline_shuffle_seed: int | None = None

    def __post_init__(self) -> None:
        if self.variant not in VARIANTS:
            raise ValueError(f"variant must be one of {VARIANTS}")
        if not (self.tolerance > 0.0 and math.isfinite(self.tolerance)):
            raise ValueError("tolerance must be positive and finite")
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be >= 1")


@dataclass
class SolverResult:
    x: np.ndarray
    iterations: int
    converged: bool
    residual_history: list[float]
    residue_warning: bool
    direct_error: float | None = None


@njit(cache=True)
def _axpy_fma_k(alpha, x, y, out):
    for i in range(x.shape[0]):
        out[i] = _fma_intrinsic(alpha, x[i], y[i])


def axpy_fma(alpha: float, x: np.ndarray, y: np.ndarray) -> np.ndarray:
    """alpha * x + y with a single fma rounding per element."""
    x = np.ascontiguousarray(x, dtype=np.float64)
    y = np.ascontiguousarray(y, dtype=np.float64)
    if x.shape != y.shape or x.ndim != 1:
        raise ValueError("axpy needs two equal-length vectors")
    out = np.empty_like(x)
    _axpy_fma_k(float(alpha), x, y, out)
    return out


def jacobi_build(a: CsrMatrix) -> np.ndarray:
    """Inverse diagonal, one rounding per entry."""
    with np.errstate(over="ignore"):
        m = 1.0 / a.diagonal()
    if not np.all(np.isfinite(m)):
        raise OverflowError("inverse diagonal left the double range")
    return m


def jacobi_apply(m: np.ndarray, v: np.ndarray) -> np.ndarray:
    """Elementwise preconditioner application, one rounding per entry."""
    with np.errstate(over="ignore"):
        return m * v


def direct_error(x: np.ndarray, x_true: np.ndarray) -> float:
    """Relative max-norm error against a known solution."""
    x = np.asarray(x, dtype=np.float64)
    x_true = np.asarray(x_true, dtype=np.float64)
    if x.shape != x_true.shape:
        raise ValueError("shape mismatch")
    denom = float(np.max(np.abs(x_true)))
    if denom == 0.0:
        raise ValueError("reference solution is identically zero")
    return float(np.max(np.abs(x - x_true))) / denom


class _Dots:
    """Variant dispatch for the solver's reductions."""

    def __init__(self, config: SolverConfig):
        self.config = config
        self.residue_warning = False
        self.rng = None
        if config.variant == "baseline":
            seed = config.baseline_shuffle_seed
            self.rng = None if seed is None else np.random.default_rng(seed)

    def single(self, x, y) -> float:
        c = self.config
        if c.variant == "exblas":
            r = exdot_exblas(x, y, c.topology, c.fpe_size)
        elif c.variant == "opt":
            r = exdot_opt(x, y, c.topology, c.fpe_size)
            self.residue_warning |= r.residue_warning
        else:
            return dot_baseline(x, y, c.topology, self.rng)
        return r.value

    def pair(self, x1, y1, x2, y2) -> tuple[float, float]:
        c = self.config
        if c.variant == "exblas":
            r1, r2 = exdot_pair_exblas(x1, y1, x2, y2, c.topology, c.fpe_size)
        elif c.variant == "opt":
            r1, r2 = exdot_pair_opt(x1, y1, x2, y2, c.topology, c.fpe_size)
            self.residue_warning |= r1.residue_warning or r2.residue_warning
        else:
            return (
                dot_baseline(x1, y1, c.topology, self.rng),
                dot_baseline(x2, y2, c.topology, self.rng),
            )
        return r1.value, r2.value


def pcg_solve(
    a: CsrMatrix,
    b: np.ndarray,
    config: SolverConfig = SolverConfig(),
    x_true: np.ndarray | None = None,
) -> SolverResult:
    """Solve A x = b from x0 = 0 with Jacobi-preconditioned CG.

    Raises BreakdownError when the curvature term is nonpositive and
    DivergenceError when the residual leaves the representable range.
    Hitting max_iterations is not an error: the result comes back with
    converged=False.
    """
    b = np.ascontiguousarray(b, dtype=np.float64)
    if b.shape != (a.n,):
        raise ValueError(f"rhs length {b.shape} does not match n={a.n}")
    if not np.all(np.isfinite(b)):
        raise ValueError("rhs must be finite")

    def guard(v: np.ndarray, what: str, iteration: int) -> None:
        if not np.all(np.isfinite(v)):
            raise DivergenceError(
                f"{what} left the representable range at iteration {iteration}"
            )

    dots = _Dots(config)
    m = jacobi_build(a)
    x = np.zeros(a.n, dtype=np.float64)
    r = b - spmv(a, x)
    tau = dots.single(r, r)
    if not math.isfinite(tau):
        raise DivergenceError(f"squared residual of the rhs is {tau!r}")
    history = [tau]
    z = jacobi_apply(m, r)
    guard(z, "preconditioned residual", 0)
    d = z.copy()
    beta = dots.single(z, r)

    def done(t: float) -> bool:
        if config.sqrt_residual_convergence:
            return math.sqrt(t) <= config.tolerance
        return t <= config.tolerance

    iterations = 0
    converged = False
    while True:
        if done(tau):
            converged = True
            break
        if iterations >= config.max_iterations:
            break
        beta_prev = beta
        w = spmv(a, d)
        guard(w, "A d", iterations)
        curvature = dots.single(d, w)
        if not math.isfinite(curvature):
            raise DivergenceError(
                f"curvature <d, A d> became {curvature!r} at iteration "
                f"{iterations}"
            )
        if curvature <= 0.0:
            raise BreakdownError(iterations, curvature)
        if beta_prev == 0.0:
            raise BreakdownError(iterations, 0.0)
        rho = beta_prev / curvature
        x = axpy_fma(rho, d, x)
        r = axpy_fma(-rho, w, r)
        guard(x, "iterate", iterations)
        guard(r, "residual", iterations)
        z = jacobi_apply(m, r)
        guard(z, "preconditioned residual", iterations)
        beta, tau = dots.pair(z, r, r, r)
        if not math.isfinite(tau):
            raise DivergenceError(
                f"squared residual became {tau!r} at iteration {iterations}"
            )
        history.append(tau)
        d = axpy_fma(beta / beta_prev, d, z)
        guard(d, "search direction", iterations)
        iterations += 1

    result = SolverResult(
        x=x,
        iterations=iterations,
        converged=converged,
        residual_history=history,
        residue_warning=dots.residue_warning,
    )
    if x_true is not None:
        result.direct_error = direct_error(x, x_true)
    return result
