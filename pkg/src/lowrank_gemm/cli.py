"""Command-line interface.

Subcommands: ``bench``, ``model``, ``svd``, ``multiply``, ``quantize``.
Exit codes: 0 success, 1 usage error, 2 verification failure, 3 I/O error.
"""

from __future__ import annotations

import argparse
import dataclasses
import sys
from pathlib import Path

from .bench import (
    BenchRecord,
    BenchSkip,
    emit_csv,
    emit_plots,
    load_config,
    parse_policy,
    run_bench,
    validate_config,
)
from .decomposition import decompose, reconstruct, truncated_svd
from .errors import (
    ConfigError,
    FileFormatError,
    ProfileError,
    VerificationError,
)
from .fp8 import E4M3, E5M2, dequantize, fp8_gemm, quantize
from .gemm import lowrank_multiply, quantized_factor_multiply
from .io import (
    FACTORS_MAGIC,
    read_factors,
    read_matrix,
    sniff_format,
    write_factors,
    write_matrix,
)
from .matrices import matmul_reference
from .perfmodel import (
    REFERENCE_MEASURED_FLOPS,
    bandwidth_limited_flops,
    capacity_limited_n,
    extrapolate_throughput,
    fraction_of_peak,
    gemm_flops,
    gemm_traffic_bytes,
)
from .matrices import Precision
from .profiles import builtin_profiles, resolve_profile

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_VERIFICATION = 2
EXIT_IO = 3


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    # argparse exits 2 on bad flags; this project reserves 2 for verification
    # failures, so usage problems are surfaced as exceptions instead.
    def error(self, message):
        raise _UsageError(message)


def _build_parser() -> _Parser:
    parser = _Parser(prog="lowrank-gemm", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    bench = sub.add_parser("bench", help="run the benchmark protocol")
    bench.add_argument("--config", type=Path, help="key = value config file")
    bench.add_argument("--out-csv", type=Path, help="write records as CSV")
    bench.add_argument("--plots", type=Path, help="write SVG plots into this directory")
    bench.add_argument("--seed", type=int, help="override the config seed")

    model = sub.add_parser("model", help="print the analytic performance model")
    model.add_argument("--profile", default="rtx4090", help="profile name or file path")
    model.add_argument(
        "--measured-flops",
        type=float,
        default=REFERENCE_MEASURED_FLOPS,
        help="sustained low-rank throughput on the base profile [FLOP/s]",
    )
    model.add_argument("--out-csv", type=Path, help="also write the projection table as CSV")

    svd = sub.add_parser("svd", help="decompose an LRGM matrix into an LRFB bundle")
    svd.add_argument("input", type=Path)
    svd.add_argument("output", type=Path)
    svd.add_argument("--policy", default="energy:0.99", help="energy:T | error:E | fraction:A | budget:B:W")
    svd.add_argument("--method", choices=("exact", "randomized"), default="exact")
    svd.add_argument("--rank", type=int, help="exact truncation rank (overrides --policy)")
    svd.add_argument("--seed", type=int, default=0)

    multiply = sub.add_parser("multiply", help="multiply two LRGM/LRFB files into an LRGM result")
    multiply.add_argument("left", type=Path)
    multiply.add_argument("right", type=Path)
    multiply.add_argument("output", type=Path)
    multiply.add_argument(
        "--precision",
        choices=("fp64", "fp8"),
        default="fp64",
        help="fp64: exact path; fp8: quantized storage (dense) or quantized factors (bundles)",
    )

    quant = sub.add_parser("quantize", help="round an LRGM matrix onto an fp8 grid")
    quant.add_argument("input", type=Path)
    quant.add_argument("output", type=Path)
    quant.add_argument("--format", choices=("e4m3", "e5m2"), default="e4m3")
    return parser


def _cmd_bench(args) -> int:
    if args.config is not None:
        config = load_config(args.config)
    else:
        config = validate_config({})
    if args.seed is not None:
        config = dataclasses.replace(config, seed=args.seed)
    results = run_bench(config)
    for entry in results:
        if isinstance(entry, BenchSkip):
            print(f"skip  {entry.method.value:>13} n={entry.n:<6} {entry.reason}")
        else:
            print(
                f"ok    {entry.method.value:>13} n={entry.n:<6} rank={entry.rank or '-':<5} "
                f"time={entry.time_s_mean:.6f}s rel_error={entry.rel_error:.3e} "
                f"flops={entry.achieved_flops:.3e}"
            )
    if args.out_csv is not None:
        emit_csv(results, args.out_csv)
        print(f"wrote {args.out_csv}")
    if args.plots is not None:
        measured = [r for r in results if isinstance(r, BenchRecord)]
        for path in emit_plots(measured, args.plots):
            print(f"wrote {path}")
    return EXIT_OK


def _cmd_model(args) -> int:
    base = resolve_profile(args.profile)
    measured = args.measured_flops
    peak = base.peak_flops[Precision.FP8]
    bw_ceiling = bandwidth_limited_flops(base.mem_bandwidth_bytes_per_s, 1)
    n_ref = 20480

    print(f"profile: {base.name}")
    print(f"square GEMM at n = {n_ref}:")
    print(f"  flops                      = {gemm_flops(n_ref):.6e}")
    print(f"  fp8 traffic bytes          = {gemm_traffic_bytes(n_ref, 1):.6e}")
    print(f"step 1  compute peak (fp8)         = {peak:.6e} FLOP/s = {peak / 1e12:.1f} TFLOPS")
    print(f"step 2  measured low-rank rate     = {measured:.6e} FLOP/s = {measured / 1e12:.1f} TFLOPS")
    print(
        f"step 3  fraction of compute peak   = {fraction_of_peak(measured, peak) * 100:.1f}%"
    )
    print(
        f"step 4  bandwidth-limited ceiling  = {bw_ceiling:.6e} FLOP/s"
        f" = {bw_ceiling / 1e12:.2f} TFLOPS (printed as {bw_ceiling / 1e12:.0f})"
    )
    print(
        f"step 5  fraction of bandwidth peak = {fraction_of_peak(measured, bw_ceiling) * 100:.1f}%"
    )
    print()
    registry = builtin_profiles()
    header = (
        f"{'profile':<10} {'bandwidth_B_per_s':>18} {'fp8_peak_FLOPs':>15} "
        f"{'projected_FLOPs':>16} {'projected_PFLOPS':>17} {'capacity_max_n':>15}"
    )
    print("projection table (throughput scales with the bandwidth ratio):")
    print(header)
    rows = []
    for name in registry.names():
        profile = registry.profiles[name]
        projected = extrapolate_throughput(
            measured, base.mem_bandwidth_bytes_per_s, profile.mem_bandwidth_bytes_per_s
        )
        max_n = capacity_limited_n(profile)
        rows.append((name, profile, projected, max_n))
        print(
            f"{name:<10} {profile.mem_bandwidth_bytes_per_s:>18.3e} "
            f"{profile.peak_flops[Precision.FP8]:>15.3e} {projected:>16.4e} "
            f"{projected / 1e15:>17.4f} {max_n:>15}"
        )
    if args.out_csv is not None:
        with open(args.out_csv, "w", encoding="utf-8") as handle:
            handle.write(
                "profile,bandwidth_bytes_per_s,fp8_peak_flops,projected_flops,capacity_max_n\n"
            )
            for name, profile, projected, max_n in rows:
                handle.write(
                    f"{name},{profile.mem_bandwidth_bytes_per_s!r},"
                    f"{profile.peak_flops[Precision.FP8]!r},{projected!r},{max_n}\n"
                )
        print(f"wrote {args.out_csv}")
    return EXIT_OK


def _cmd_svd(args) -> int:
    matrix = read_matrix(args.input).matrix
    if args.rank is not None:
        factors = truncated_svd(matrix, args.rank)
    else:
        factors = decompose(matrix, parse_policy(args.policy), method=args.method, seed=args.seed)
    write_factors(args.output, factors)
    print(f"wrote {args.output} (rank {factors.rank})")
    return EXIT_OK


def _cmd_multiply(args) -> int:
    kinds = (sniff_format(args.left), sniff_format(args.right))
    if kinds == (FACTORS_MAGIC, FACTORS_MAGIC):
        fa = read_factors(args.left)
        fb = read_factors(args.right)
        if args.precision == "fp8":
            result = quantized_factor_multiply(fa, fb)
        else:
            result = lowrank_multiply(fa, fb)
    else:
        left = _load_dense(args.left)
        right = _load_dense(args.right)
        if args.precision == "fp8":
            result = fp8_gemm(quantize(left), quantize(right))
        else:
            result = matmul_reference(left, right)
    write_matrix(args.output, result)
    print(f"wrote {args.output} ({result.rows}x{result.cols})")
    return EXIT_OK


def _load_dense(path: Path):
    if sniff_format(path) == FACTORS_MAGIC:
        return reconstruct(read_factors(path))
    return read_matrix(path).matrix


def _cmd_quantize(args) -> int:
    matrix = read_matrix(args.input).matrix
    fmt = E4M3 if args.format == "e4m3" else E5M2
    tensor = quantize(matrix, fmt)
    write_matrix(args.output, dequantize(tensor), scale=tensor.scale)
    print(f"wrote {args.output} (format {fmt.name}, scale {tensor.scale!r})")
    return EXIT_OK


def main(argv: list[str] | None = None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
        handler = {
            "bench": _cmd_bench,
            "model": _cmd_model,
            "svd": _cmd_svd,
            "multiply": _cmd_multiply,
            "quantize": _cmd_quantize,
        }[args.command]
        return handler(args)
    except _UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except VerificationError as exc:
        print(f"verification failure: {exc}", file=sys.stderr)
        return EXIT_VERIFICATION
    except (FileFormatError, OSError) as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (ConfigError, ProfileError, ValueError) as exc:
        # FileFormatError subclasses ValueError, so the I/O branch must come first.
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
