"""Reproducible sparse kernels and a bit-deterministic PCG solver.

Dot products, sums, SpMV, and the conjugate gradient iteration built
on error-free transformations, floating-point expansions, and a long
fixed-point accumulator, so results are bit-identical for any
parallel decomposition of the same data.
"""

from .eft import FpRangeError, ResultError, fma, two_prod, two_sum
from .fpe import Fpe, fpe_sum
from .oracle import ExactValue, oracle_dot, oracle_sum
from .pcg import (
    BreakdownError,
    DivergenceError,
    SolverConfig,
    SolverResult,
    axpy_fma,
    direct_error,
    jacobi_apply,
    jacobi_build,
    pcg_solve,
)
from .repro_reduce import (
    ReduceResult,
    Topology,
    dot_baseline,
    exdot_exblas,
    exdot_opt,
    exdot_pair_exblas,
    exdot_pair_opt,
    exsum_exblas,
    exsum_opt,
    reduce_then_broadcast,
    sum_baseline,
)
from .sparse import (
    CsrMatrix,
    condition_estimate,
    gen_band,
    gen_illcond,
    gen_poisson27,
    load_matrix_market,
    save_matrix_market,
    spmv,
)
from .superacc import LongAccumulator, superacc_merge

__version__ = "0.1.0"

__all__ = [
    "__version__",
    "fma",
    "two_sum",
    "two_prod",
    "ResultError",
    "FpRangeError",
    "Fpe",
    "fpe_sum",
    "LongAccumulator",
    "superacc_merge",
    "Topology",
    "ReduceResult",
    "exdot_exblas",
    "exdot_opt",
    "exdot_pair_exblas",
    "exdot_pair_opt",
    "exsum_exblas",
    "exsum_opt",
    "dot_baseline",
    "sum_baseline",
    "reduce_then_broadcast",
    "CsrMatrix",
    "spmv",
    "load_matrix_market",
    "save_matrix_market",
    "gen_poisson27",
    "gen_band",
    "gen_illcond",
    "condition_estimate",
    "SolverConfig",
    "SolverResult",
    "BreakdownError",
    "DivergenceError",
    "pcg_solve",
    "jacobi_build",
    "jacobi_apply",
    "axpy_fma",
    "direct_error",
    "ExactValue",
    "oracle_dot",
    "oracle_sum",
]
