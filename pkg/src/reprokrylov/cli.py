"""Command-line front end: generate, solve, verify, benchmark.

Reports are machine readable (JSON or key/value CSV) and carry every
float that matters twice: decimal for humans and C99-style lowercase
hex (as from ``float.hex``) for bit-exact comparison. Apart from the
wall-time fields, reports are deterministic functions of the flags.

Exit codes:
  0  success / verification PASS
  1  usage, bad parameters, or I/O failure
  2  numerical failure (solver breakdown, overflow, range fault)
  3  verification FAIL (a reproducible variant produced differing bits)
  4  solver reached max_iterations without converging
"""

from __future__ import annotations

import argparse
import json
import os
import statistics
import sys
import time

import numpy as np

from .oracle import oracle_dot
from .pcg import VARIANTS, SolverConfig, SolverResult, pcg_solve
from .repro_reduce import Topology, dot_baseline, exdot_exblas, exdot_opt
from .sparse import (
    CsrMatrix,
    gen_band,
    gen_illcond,
    gen_poisson27,
    load_matrix_market,
    save_matrix_market,
    spmv,
)
from .vecgen import dot_wide

__all__ = ["main", "build_parser"]

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_NUMERICAL = 2
EXIT_VERIFY_FAIL = 3
EXIT_NO_CONVERGENCE = 4


class _Parser(argparse.ArgumentParser):
    """argparse with usage failures mapped to exit code 1."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _hex(x: float) -> str:
    return float(x).hex()


def _parse_ints(text: str) -> list[int]:
    return [int(tok) for tok in text.split(",") if tok != ""]


def _resolve_chunk(token: str, n: int) -> int:
    if token == "n":
        return n
    return int(token)


def _gen_from_spec(spec: str) -> CsrMatrix:
    kind, _, rest = spec.partition(":")
    params = [p for p in rest.split(",") if p != ""]
    if kind == "poisson27":
        if len(params) != 3:
            raise ValueError("poisson27 spec needs NX,NY,NZ")
        return gen_poisson27(int(params[0]), int(params[1]), int(params[2]))
    if kind == "band":
        if len(params) != 2:
            raise ValueError("band spec needs N,BANDWIDTH")
        return gen_band(int(params[0]), int(params[1]))
    if kind == "illcond":
        if len(params) != 3:
            raise ValueError("illcond spec needs TARGET_COND,N,BANDWIDTH")
        base = gen_band(int(params[1]), int(params[2]))
        matrix, _ = gen_illcond(base, float(params[0]))
        return matrix
    raise ValueError(f"unknown generator kind {kind!r}")


def _matrix_from_spec(spec: str) -> CsrMatrix:
    """A path to a Matrix Market file, or poisson27:...|band:...|illcond:..."""
    kind = spec.partition(":")[0]
    if kind in ("poisson27", "band", "illcond") and not os.path.exists(spec):
        return _gen_from_spec(spec)
    return load_matrix_market(spec)


def _report_csv(report: dict) -> str:
    lines = ["key,value"]

    def emit(prefix, value):
        if isinstance(value, dict):
            for k, v in value.items():
                emit(f"{prefix}.{k}" if prefix else k, v)
        elif isinstance(value, (list, tuple)):
            for i, v in enumerate(value):
                emit(f"{prefix}[{i}]", v)
        else:
            lines.append(f"{prefix},{value}")

    emit("", report)
    return "\n".join(lines) + "\n"


def _write_report(report: dict, args) -> None:
    text = (
        json.dumps(report, indent=2) + "\n"
        if args.format == "json"
        else _report_csv(report)
    )
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _solver_config(args, n: int, shuffle_seed: int | None = None) -> SolverConfig:
    return SolverConfig(
        variant=args.variant,
        tolerance=args.tol,
        max_iterations=args.max_iter,
        topology=Topology(args.procs, args.workers, _resolve_chunk(args.chunk, n)),
        fpe_size=args.fpe_size,
        sqrt_residual_convergence=args.sqrt_residual,
        baseline_shuffle_seed=shuffle_seed,
    )


def cmd_gen(args) -> int:
    if args.kind == "poisson27":
        matrix = gen_poisson27(args.nx, args.ny, args.nz)
        extra = {}
    elif args.kind == "band":
        matrix = gen_band(args.n, args.bandwidth)
        extra = {}
    else:
        kind, _, rest = args.base.partition(":")
        if kind != "band":
            raise ValueError("illcond base must be band:N,BANDWIDTH")
        params = _parse_ints(rest)
        if len(params) != 2:
            raise ValueError("illcond base must be band:N,BANDWIDTH")
        matrix, estimate = gen_illcond(gen_band(*params), args.target_cond)
        extra = {"condition_estimate": estimate}
    save_matrix_market(matrix, args.out)
    line = f"wrote {args.out}: n={matrix.n} nnz={matrix.nnz}"
    if extra:
        line += f" condition_estimate={extra['condition_estimate']:.6e}"
    print(line)
    return EXIT_OK


def _run_report(args, spec: str, a: CsrMatrix, result: SolverResult, wall: float) -> dict:
    return {
        "command": "solve",
        "matrix": spec,
        "n": a.n,
        "nnz": a.nnz,
        "variant": args.variant,
        "topology": {
            "processes": args.procs,
            "workers": args.workers,
            "chunk": _resolve_chunk(args.chunk, a.n),
        },
        "fpe_size": args.fpe_size,
        "tolerance": args.tol,
        "tolerance_hex": _hex(args.tol),
        "max_iterations": args.max_iter,
        "sqrt_residual_convergence": args.sqrt_residual,
        "baseline_shuffle": args.baseline_shuffle,
        "seed": args.seed,
        "iterations": result.iterations,
        "converged": result.converged,
        "residue_warning": result.residue_warning,
        "direct_error": result.direct_error,
        "direct_error_hex": _hex(result.direct_error),
        "residuals_hex": [_hex(t) for t in result.residual_history],
        "wall_time_s": wall,
    }


def cmd_solve(args) -> int:
    a = _matrix_from_spec(args.matrix)
    config = _solver_config(
        args, a.n, args.seed if args.baseline_shuffle else None
    )
    ones = np.ones(a.n, dtype=np.float64)
    b = spmv(a, ones)
    start = time.perf_counter()
    result = pcg_solve(a, b, config, x_true=ones)
    wall = time.perf_counter() - start
    _write_report(_run_report(args, args.matrix, a, result, wall), args)
    return EXIT_OK if result.converged else EXIT_NO_CONVERGENCE


def first_divergence(a: SolverResult, b: SolverResult) -> dict | None:
    """Locate the first differing bit between two solver trajectories."""
    if a.iterations != b.iterations:
        return {
            "kind": "iterations",
            "value_a": a.iterations,
            "value_b": b.iterations,
        }
    for i, (ta, tb) in enumerate(zip(a.residual_history, b.residual_history)):
        if ta != tb or _hex(ta) != _hex(tb):
            return {
                "kind": "residual",
                "iteration": i,
                "value_a": _hex(ta),
                "value_b": _hex(tb),
            }
    if a.x.tobytes() != b.x.tobytes():
        idx = int(np.nonzero(a.x.view(np.uint64) != b.x.view(np.uint64))[0][0])
        return {
            "kind": "solution",
            "index": idx,
            "value_a": _hex(float(a.x[idx])),
            "value_b": _hex(float(b.x[idx])),
        }
    return None


def cmd_verify(args) -> int:
    a = _matrix_from_spec(args.matrix)
    ones = np.ones(a.n, dtype=np.float64)
    b = spmv(a, ones)
    variants = [v for v in args.variants.split(",") if v != ""]
    for v in variants:
        if v not in VARIANTS:
            raise ValueError(f"unknown variant {v!r}")
    chunks = [_resolve_chunk(tok, a.n) for tok in args.chunk_list.split(",") if tok]
    grid = [
        (variant, p, t, c)
        for variant in variants
        for p in _parse_ints(args.procs_list)
        for t in _parse_ints(args.workers_list)
        for c in chunks
    ]

    start = time.perf_counter()
    reference = None
    ref_config = None
    divergence = None
    runs = 0
    for variant, p, t, c in grid:
        config = SolverConfig(
            variant=variant,
            tolerance=args.tol,
            max_iterations=args.max_iter,
            topology=Topology(p, t, c),
            fpe_size=args.fpe_size,
        )
        result = pcg_solve(a, b, config)
        runs += 1
        if reference is None:
            reference = result
            ref_config = (variant, p, t, c)
            continue
        divergence = first_divergence(reference, result)
        if divergence is not None:
            divergence["config_a"] = ref_config
            divergence["config_b"] = (variant, p, t, c)
            break

    baseline_stats = None
    if args.baseline_runs > 0:
        seen = set()
        for i in range(args.baseline_runs):
            config = SolverConfig(
                variant="baseline",
                tolerance=args.tol,
                max_iterations=args.max_iter,
                topology=Topology(
                    _parse_ints(args.procs_list)[-1],
                    _parse_ints(args.workers_list)[-1],
                    chunks[0],
                ),
                baseline_shuffle_seed=args.seed + i,
            )
            result = pcg_solve(a, b, config)
            seen.add(
                (result.iterations, tuple(result.residual_history), result.x.tobytes())
            )
        baseline_stats = {
            "runs": args.baseline_runs,
            "distinct_trajectories": len(seen),
        }
    wall = time.perf_counter() - start

    verdict = "PASS" if divergence is None else "FAIL"
    report = {
        "command": "verify",
        "matrix": args.matrix,
        "n": a.n,
        "variants": variants,
        "grid_size": len(grid),
        "runs": runs,
        "verdict": verdict,
        "iterations": None if reference is None else reference.iterations,
        "first_divergence": divergence,
        "baseline": baseline_stats,
        "wall_time_s": wall,
    }
    _write_report(report, args)
    if divergence is not None:
        print(
            "FAIL: first divergence {kind} between {config_a} and {config_b}: "
            "{value_a} vs {value_b}".format(**{
                "kind": divergence["kind"],
                "config_a": divergence["config_a"],
                "config_b": divergence["config_b"],
                "value_a": divergence["value_a"],
                "value_b": divergence["value_b"],
            }),
            file=sys.stderr,
        )
        return EXIT_VERIFY_FAIL
    return EXIT_OK


def cmd_dot_bench(args) -> int:
    n = args.n
    if n < 1:
        raise ValueError("n must be >= 1")
    rng = np.random.default_rng(args.seed)
    if args.zero:
        x = np.zeros(n, dtype=np.float64)
        y = np.zeros(n, dtype=np.float64)
    else:
        x, y = dot_wide(n, rng, args.dynamic_range)
    topology = Topology(args.procs, args.workers, _resolve_chunk(args.chunk, n))

    def run() -> float:
        if args.variant == "exblas":
            return exdot_exblas(x, y, topology, args.fpe_size).value
        if args.variant == "opt":
            return exdot_opt(x, y, topology, args.fpe_size).value
        return dot_baseline(x, y, topology)

    times = []
    value = None
    for _ in range(args.repeats):
        t0 = time.perf_counter()
        got = run()
        times.append(time.perf_counter() - t0)
        if value is None:
            value = got
    median = statistics.median(times)

    check = None
    reference = None
    if args.check:
        reference = oracle_dot(x, y)
        if args.variant in ("exblas", "opt"):
            check = "ok" if value == reference and _hex(value) == _hex(reference) else "mismatch"
        else:
            check = "informational"
    report = {
        "command": "dot-bench",
        "n": n,
        "variant": args.variant,
        "dynamic_range_decades": args.dynamic_range,
        "zero_vectors": args.zero,
        "topology": {
            "processes": args.procs,
            "workers": args.workers,
            "chunk": _resolve_chunk(args.chunk, n),
        },
        "fpe_size": args.fpe_size,
        "seed": args.seed,
        "repeats": args.repeats,
        "value": value,
        "value_hex": _hex(value),
        "oracle_hex": None if reference is None else _hex(reference),
        "check": check,
        "times_s": times,
        "median_s": median,
        "ns_per_element": 1e9 * median / n,
    }
    _write_report(report, args)
    return EXIT_VERIFY_FAIL if check == "mismatch" else EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(
        prog="reprokrylov",
        description="Reproducible sparse kernels and a bit-deterministic PCG solver.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    common = _Parser(add_help=False)
    common.add_argument("--variant", choices=VARIANTS, default="exblas")
    common.add_argument("--procs", type=int, default=1, metavar="P")
    common.add_argument("--workers", type=int, default=1, metavar="T")
    common.add_argument("--chunk", default="256", metavar="BM",
                        help="chunk size, or 'n' for a single full-length chunk")
    common.add_argument("--fpe-size", type=int, default=8, metavar="P")
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--format", choices=("json", "csv"), default="json")
    common.add_argument("--out", default=None, metavar="PATH")

    p_gen = sub.add_parser("gen", parents=[], help="write a generated matrix")
    gen_sub = p_gen.add_subparsers(dest="kind", required=True)
    g27 = gen_sub.add_parser("poisson27", help="27-point Poisson stencil")
    g27.add_argument("nx", type=int)
    g27.add_argument("ny", type=int)
    g27.add_argument("nz", type=int)
    gband = gen_sub.add_parser("band", help="banded s.p.d. matrix")
    gband.add_argument("n", type=int)
    gband.add_argument("bandwidth", type=int)
    gill = gen_sub.add_parser("illcond", help="condition-targeted scaling of a band matrix")
    gill.add_argument("target_cond", type=float)
    gill.add_argument("--base", default="band:100,1", metavar="band:N,B")
    for g in (g27, gband, gill):
        g.add_argument("--out", required=True, metavar="PATH")
        g.set_defaults(func=cmd_gen)
    g27.set_defaults(kind="poisson27")
    gband.set_defaults(kind="band")
    gill.set_defaults(kind="illcond")

    p_solve = sub.add_parser("solve", parents=[common], help="run the PCG solver")
    p_solve.add_argument("matrix", help="Matrix Market path or generator spec "
                         "(poisson27:NX,NY,NZ | band:N,B | illcond:COND,N,B)")
    p_solve.add_argument("--tol", type=float, default=1e-8)
    p_solve.add_argument("--max-iter", type=int, default=10000)
    p_solve.add_argument("--sqrt-residual", action="store_true",
                         help="test sqrt(<r,r>) <= tol instead of <r,r> <= tol")
    p_solve.add_argument("--baseline-shuffle", action="store_true",
                         help="randomize baseline reduction association (uses --seed)")
    p_solve.set_defaults(func=cmd_solve)

    p_verify = sub.add_parser("verify", parents=[common],
                              help="assert bit-identical solves across a topology grid")
    p_verify.add_argument("matrix")
    p_verify.add_argument("--tol", type=float, default=1e-8)
    p_verify.add_argument("--max-iter", type=int, default=10000)
    p_verify.add_argument("--variants", default="exblas,opt")
    p_verify.add_argument("--procs-list", default="1,2,4,8")
    p_verify.add_argument("--workers-list", default="1,2,4")
    p_verify.add_argument("--chunk-list", default="1,13,256,n")
    p_verify.add_argument("--baseline-runs", type=int, default=5,
                          help="shuffled baseline repeats reported (not asserted); 0 disables")
    p_verify.set_defaults(func=cmd_verify)

    p_bench = sub.add_parser("dot-bench", parents=[common],
                             help="time reproducible dots and check against the oracle")
    p_bench.add_argument("n", type=int)
    p_bench.add_argument("--dynamic-range", type=float, default=10.0,
                         metavar="DECADES")
    p_bench.add_argument("--repeats", type=int, default=9)
    p_bench.add_argument("--check", action=argparse.BooleanOptionalAction, default=True)
    p_bench.add_argument("--zero", action="store_true", help="benchmark on zero vectors")
    p_bench.set_defaults(func=cmd_dot_bench)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args)
    except ArithmeticError as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
