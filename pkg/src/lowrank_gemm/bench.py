"""Benchmark harness: warmup/measure protocol, CSV and plot emission.

Method analogs at desk scale (everything runs emulated, in-process):

* ``direct_fp32``  -- the fixed-order float64 reference multiply (baseline;
  its relative error is identically zero).
* ``direct_fp16``  -- reference multiply over fp16-rounded operands.
* ``direct_fp8``   -- quantize both operands and run the emulated
  fp8-storage/fp16-compute/fp32-accumulate GEMM.
* ``lowrank_fp8``  -- decompose-and-multiply with fp8-quantized factors.
* ``lowrank_auto`` -- decompose-and-multiply with full-precision factors
  (the adaptive path picks the best available precision, which in emulation
  is fp64).

Wall-clock numbers are reported, never asserted against hardware figures;
determinism covers every field except ``time_s_mean``, ``time_s_std`` and
the time-derived ``achieved_flops``.
"""

from __future__ import annotations

import csv
import logging
import math
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Mapping, Sequence, Union

import numpy as np

from .decomposition import (
    EnergyThreshold,
    ErrorConstrained,
    FixedFraction,
    HardwareAware,
    RankPolicy,
)
from .errors import ConfigError, VerificationError
from .gemm import GemmPrecision, lowrank_gemm
from .fp8 import fp8_gemm, quantize
from .kvformat import KvParseError, parse_kv_text
from .matrices import (
    DenseMatrix,
    Precision,
    SpectrumSpec,
    matmul_reference,
    relative_error,
    round_to_grid,
    synth_matrix,
)
from .perfmodel import memory_report
from .profiles import resolve_profile
from .selector import HardwareProfile, KernelKind

__all__ = [
    "KneeSpectrum",
    "GeometricSpectrum",
    "SpectrumTemplate",
    "DEFAULT_SPECTRUM",
    "BenchConfig",
    "BenchRecord",
    "BenchSkip",
    "size_ladder",
    "validate_config",
    "load_config",
    "run_bench",
    "emit_csv",
    "parse_csv",
    "build_figures",
    "emit_plots",
    "CSV_HEADER",
]

logger = logging.getLogger(__name__)

SIZE_STEP = 64
SQRT2 = math.sqrt(2.0)

#: Safety factor applied to a policy's implied error bound before a record
#: counts as a verification failure.
ERROR_BOUND_SAFETY = 3.0


@dataclass(frozen=True)
class KneeSpectrum:
    """Plateau of equal singular values followed by a small noise floor.

    The default operand family: an effective rank of ``plateau_fraction * n``
    carries almost all the energy, the floor models broadband noise. Under a
    0.99 energy threshold this family lands end-to-end product errors in the
    one-to-two-percent band.
    """

    plateau_fraction: float = 1.0 / 16.0
    floor: float = 2e-3

    def __post_init__(self) -> None:
        if not 0.0 < self.plateau_fraction <= 1.0:
            raise ConfigError(f"plateau_fraction must lie in (0, 1], got {self.plateau_fraction}")
        if not 0.0 <= self.floor <= 1.0:
            raise ConfigError(f"floor must lie in [0, 1], got {self.floor}")

    def values(self, n: int) -> tuple[float, ...]:
        plateau = min(n, max(1, int(np.floor(self.plateau_fraction * n + 0.5))))
        return (1.0,) * plateau + (self.floor,) * (n - plateau)


@dataclass(frozen=True)
class GeometricSpectrum:
    """Geometric decay ``sigma_j = ratio**j``."""

    ratio: float = 0.9

    def __post_init__(self) -> None:
        if not 0.0 < self.ratio <= 1.0:
            raise ConfigError(f"ratio must lie in (0, 1], got {self.ratio}")

    def values(self, n: int) -> tuple[float, ...]:
        return tuple(self.ratio ** np.arange(n))


SpectrumTemplate = Union[KneeSpectrum, GeometricSpectrum]

DEFAULT_SPECTRUM = KneeSpectrum()


def _parse_spectrum(text: str) -> SpectrumTemplate:
    parts = text.strip().lower().split(":")
    kind, args = parts[0], parts[1:]
    try:
        if kind == "knee":
            if len(args) == 0:
                return KneeSpectrum()
            if len(args) == 2:
                return KneeSpectrum(float(args[0]), float(args[1]))
        elif kind == "geometric":
            if len(args) == 1:
                return GeometricSpectrum(float(args[0]))
    except ValueError as exc:
        raise ConfigError(f"bad spectrum {text!r}: {exc}") from exc
    raise ConfigError(
        f"bad spectrum {text!r}; expected 'knee', 'knee:FRACTION:FLOOR' or 'geometric:RATIO'"
    )


def _spectrum_string(t: SpectrumTemplate) -> str:
    if isinstance(t, KneeSpectrum):
        return f"knee:{t.plateau_fraction!r}:{t.floor!r}"
    return f"geometric:{t.ratio!r}"


def parse_policy(text: str) -> RankPolicy:
    """Parse the CLI/config policy syntax.

    ``energy:TAU`` | ``error:EPS`` | ``fraction:ALPHA`` | ``budget:BYTES:BPE``
    """
    parts = text.strip().lower().split(":")
    kind, args = parts[0], parts[1:]
    try:
        if kind == "energy" and len(args) == 1:
            return EnergyThreshold(float(args[0]))
        if kind == "error" and len(args) == 1:
            return ErrorConstrained(float(args[0]))
        if kind == "fraction" and len(args) == 1:
            return FixedFraction(float(args[0]))
        if kind == "budget" and len(args) == 2:
            return HardwareAware(int(args[0]), int(args[1]))
    except ValueError as exc:
        raise ConfigError(f"bad rank policy {text!r}: {exc}") from exc
    raise ConfigError(
        f"bad rank policy {text!r}; expected energy:TAU, error:EPS, fraction:ALPHA "
        "or budget:BYTES:BPE"
    )


def policy_string(policy: RankPolicy) -> str:
    if isinstance(policy, EnergyThreshold):
        return f"energy:{policy.tau!r}"
    if isinstance(policy, ErrorConstrained):
        return f"error:{policy.epsilon!r}"
    if isinstance(policy, FixedFraction):
        return f"fraction:{policy.alpha!r}"
    return f"budget:{policy.memory_budget_bytes}:{policy.bytes_per_element}"


def size_ladder(start_n: int, max_n: int, ratio: float = SQRT2) -> list[int]:
    """Geometric size progression, each value rounded up to a multiple of 64.

    Sizes are ``start_n * ratio**k`` (computed from the exponent, not by
    iterated multiplication, so exact powers stay exact), rounded up so steps
    never collapse; the progression is cut at ``max_n``, which is always
    included as the final size. start=256, max=1024 yields
    {256, 384, 512, 768, 1024}.
    """
    if start_n < 1 or max_n < start_n:
        raise ConfigError(f"need 1 <= start_n <= max_n, got start={start_n} max={max_n}")
    if ratio <= 1.0:
        raise ConfigError(f"progression ratio must exceed 1, got {ratio}")
    sizes: list[int] = []
    k = 0
    while True:
        value = start_n * ratio**k
        # Shave a relative epsilon before the ceiling so float noise in
        # ratio**k (e.g. sqrt(2)**2 = 2.0000000000000004) cannot push an
        # exact multiple of 64 up a whole step.
        rounded = int(math.ceil(value * (1.0 - 1e-12) / SIZE_STEP)) * SIZE_STEP
        if rounded >= max_n:
            sizes.append(max_n)
            break
        if not sizes or rounded != sizes[-1]:
            sizes.append(rounded)
        k += 1
    return sizes


@dataclass(frozen=True)
class BenchConfig:
    """Resolved benchmark plan; build one with :func:`validate_config`."""

    sizes: tuple[int, ...]
    methods: tuple[KernelKind, ...]
    warmup_iters: int = 5
    measure_iters: int = 5
    seed: int = 0
    rank_policy: RankPolicy = EnergyThreshold(0.99)
    profile: HardwareProfile | None = None
    spectrum: SpectrumTemplate = DEFAULT_SPECTRUM
    max_bytes: int | None = None

    def __post_init__(self) -> None:
        if not self.sizes:
            raise ConfigError("no sizes to benchmark")
        if any(s < 1 for s in self.sizes):
            raise ConfigError("sizes must be positive")
        if not self.methods:
            raise ConfigError("no methods to benchmark")
        if self.warmup_iters < 0:
            raise ConfigError("warmup_iters must be non-negative")
        if self.measure_iters < 1:
            raise ConfigError("measure_iters must be at least 1")


_CONFIG_KEYS = frozenset(
    {
        "sizes",
        "start_n",
        "max_n",
        "ratio",
        "methods",
        "warmup_iters",
        "measure_iters",
        "seed",
        "rank_policy",
        "profile",
        "spectrum",
        "max_bytes",
    }
)

_DEFAULT_METHODS = (
    KernelKind.DIRECT_FP32,
    KernelKind.DIRECT_FP16,
    KernelKind.DIRECT_FP8,
    KernelKind.LOWRANK_FP8,
    KernelKind.LOWRANK_AUTO,
)

_DEFAULT_SIZES = (64, 128, 192, 256)


def validate_config(raw: Mapping[str, object]) -> BenchConfig:
    """Apply defaults (warmup 5, measure 5, ratio sqrt(2)) and reject contradictions.

    ``raw`` maps config keys to strings (as parsed from a config file) or to
    already-typed values. An empty mapping yields the all-defaults plan.
    """
    unknown = [k for k in raw if k not in _CONFIG_KEYS]
    if unknown:
        raise ConfigError(f"unknown config key(s): {', '.join(sorted(unknown))}")

    def _get_int(key: str, default: int | None) -> int | None:
        if key not in raw:
            return default
        value = raw[key]
        try:
            return int(str(value))
        except ValueError as exc:
            raise ConfigError(f"config key {key!r}: expected an integer, got {value!r}") from exc

    if "sizes" in raw and ("start_n" in raw or "max_n" in raw):
        raise ConfigError("give either explicit sizes or a start_n/max_n progression, not both")
    if "sizes" in raw:
        value = raw["sizes"]
        if isinstance(value, str):
            value = [part.strip() for part in value.split(",") if part.strip()]
        sizes = tuple(int(v) for v in value)
        if not sizes:
            raise ConfigError("sizes list is empty")
    elif "start_n" in raw or "max_n" in raw:
        if "start_n" not in raw or "max_n" not in raw:
            raise ConfigError("a progression needs both start_n and max_n")
        start_n = _get_int("start_n", None)
        max_n = _get_int("max_n", None)
        ratio = float(str(raw["ratio"])) if "ratio" in raw else SQRT2
        if max_n < start_n:
            raise ConfigError(f"max_n {max_n} is smaller than start_n {start_n}")
        sizes = tuple(size_ladder(start_n, max_n, ratio))
    else:
        sizes = _DEFAULT_SIZES

    if "methods" in raw:
        value = raw["methods"]
        if isinstance(value, str):
            value = [part.strip() for part in value.split(",") if part.strip()]
        try:
            methods = tuple(m if isinstance(m, KernelKind) else KernelKind(str(m)) for m in value)
        except ValueError as exc:
            known = ", ".join(k.value for k in KernelKind)
            raise ConfigError(f"unknown method in {value!r}; known methods: {known}") from exc
    else:
        methods = _DEFAULT_METHODS

    policy = raw.get("rank_policy", EnergyThreshold(0.99))
    if isinstance(policy, str):
        policy = parse_policy(policy)

    spectrum = raw.get("spectrum", DEFAULT_SPECTRUM)
    if isinstance(spectrum, str):
        spectrum = _parse_spectrum(spectrum)

    profile = raw.get("profile")
    if isinstance(profile, str):
        profile = resolve_profile(profile)

    return BenchConfig(
        sizes=sizes,
        methods=methods,
        warmup_iters=_get_int("warmup_iters", 5),
        measure_iters=_get_int("measure_iters", 5),
        seed=_get_int("seed", 0),
        rank_policy=policy,
        profile=profile,
        spectrum=spectrum,
        max_bytes=_get_int("max_bytes", None),
    )


def load_config(path: str | Path) -> BenchConfig:
    """Read a ``key = value`` config file and validate it."""
    try:
        entries = parse_kv_text(Path(path).read_text(encoding="utf-8"), source=str(path))
    except KvParseError as exc:
        raise ConfigError(str(exc)) from exc
    return validate_config(entries)


@dataclass(frozen=True)
class BenchRecord:
    """One measured (method, size) cell."""

    method: KernelKind
    n: int
    rank: int | None
    time_s_mean: float
    time_s_std: float
    achieved_flops: float
    rel_error: float
    peak_bytes: int
    seed: int

    def __post_init__(self) -> None:
        if self.time_s_mean <= 0:
            raise ValueError("mean time must be positive")
        if self.rel_error < 0:
            raise ValueError("relative error cannot be negative")


@dataclass(frozen=True)
class BenchSkip:
    """A (method, size) cell that was skipped instead of crashing the run."""

    method: KernelKind
    n: int
    reason: str


def _operands(config: BenchConfig, n: int) -> tuple[DenseMatrix, DenseMatrix]:
    seed_a, seed_b = np.random.SeedSequence([config.seed, n]).generate_state(2)
    sv = config.spectrum.values(n)
    a = synth_matrix(SpectrumSpec(n, n, sv, int(seed_a)))
    b = synth_matrix(SpectrumSpec(n, n, sv, int(seed_b)))
    return a, b


def _runner(
    method: KernelKind, config: BenchConfig, a: DenseMatrix, b: DenseMatrix
) -> Callable[[], tuple[DenseMatrix, int | None]]:
    if method is KernelKind.DIRECT_FP32:
        return lambda: (matmul_reference(a, b), None)
    if method is KernelKind.DIRECT_FP16:
        a16 = round_to_grid(a, Precision.FP16)
        b16 = round_to_grid(b, Precision.FP16)
        return lambda: (matmul_reference(a16, b16), None)
    if method is KernelKind.DIRECT_FP8:
        qa, qb = quantize(a), quantize(b)
        return lambda: (fp8_gemm(qa, qb), None)
    precision = (
        GemmPrecision.FP8_FACTORS if method is KernelKind.LOWRANK_FP8 else GemmPrecision.FP64
    )

    def run() -> tuple[DenseMatrix, int | None]:
        result, stats = lowrank_gemm(
            a, b, config.rank_policy, method="exact", precision=precision, seed=config.seed
        )
        return result, max(stats.rank_a, stats.rank_b)

    return run


def _implied_error_bound(policy: RankPolicy) -> float | None:
    if isinstance(policy, ErrorConstrained):
        return policy.epsilon
    if isinstance(policy, EnergyThreshold):
        return math.sqrt(1.0 - policy.tau)
    return None


def _estimated_bytes(n: int) -> int:
    # Worst-case float64 working set: three dense operands plus slack for
    # decomposition scratch.
    return 4 * (3 * n * n * 8)


def run_bench(config: BenchConfig) -> list[BenchRecord | BenchSkip]:
    """Execute the benchmark plan.

    Per (size, method): synthesize seeded operands, run ``warmup_iters``
    unmeasured and ``measure_iters`` timed executions, compute the relative
    error against the fixed-order reference product once, and account peak
    bytes analytically. Low-rank records whose error exceeds the policy's
    implied bound times the safety factor raise :class:`VerificationError`.
    Cells that would exhaust memory become :class:`BenchSkip` entries.
    """
    out: list[BenchRecord | BenchSkip] = []
    for n in config.sizes:
        a, b = _operands(config, n)
        reference: DenseMatrix | None = None
        for method in config.methods:
            if config.max_bytes is not None and _estimated_bytes(n) > config.max_bytes:
                out.append(
                    BenchSkip(
                        method,
                        n,
                        f"estimated working set {_estimated_bytes(n)} B "
                        f"exceeds cap {config.max_bytes} B",
                    )
                )
                continue
            try:
                run = _runner(method, config, a, b)
                result, rank = run()
                if reference is None:
                    reference = matmul_reference(a, b)
                rel = relative_error(result, reference)
                bound = _implied_error_bound(config.rank_policy)
                if method.is_lowrank and bound is not None and rel > ERROR_BOUND_SAFETY * bound:
                    raise VerificationError(
                        f"{method.value} at n={n}: relative error {rel:.4g} exceeds "
                        f"{ERROR_BOUND_SAFETY} x implied bound {bound:.4g}"
                    )
                for _ in range(config.warmup_iters):
                    run()
                times = []
                for _ in range(config.measure_iters):
                    t0 = time.perf_counter()
                    run()
                    times.append(time.perf_counter() - t0)
                mean = float(np.mean(times))
                std = float(np.std(times))
                out.append(
                    BenchRecord(
                        method=method,
                        n=n,
                        rank=rank,
                        time_s_mean=mean,
                        time_s_std=std,
                        achieved_flops=2.0 * n**3 / mean,
                        rel_error=rel,
                        peak_bytes=memory_report(
                            method, n, rank, method.storage_precision.itemsize
                        ).total_bytes,
                        seed=config.seed,
                    )
                )
            except MemoryError:
                out.append(BenchSkip(method, n, "out of memory"))
    return out


CSV_HEADER = "method,n,rank,time_s_mean,time_s_std,achieved_flops,rel_error,peak_bytes,seed"


def emit_csv(records: Sequence[BenchRecord | BenchSkip], path: str | Path) -> None:
    """Write records as CSV (skips are omitted; they carry no measurements).

    Floats are written with ``repr`` (shortest round-trip form), so parsing
    the file back reproduces every numeric field exactly.
    """
    path = Path(path)
    with path.open("w", encoding="utf-8", newline="") as handle:
        handle.write(CSV_HEADER + "\n")
        for record in records:
            if isinstance(record, BenchSkip):
                continue
            rank = "" if record.rank is None else str(record.rank)
            handle.write(
                f"{record.method.value},{record.n},{rank},"
                f"{record.time_s_mean!r},{record.time_s_std!r},"
                f"{record.achieved_flops!r},{record.rel_error!r},"
                f"{record.peak_bytes},{record.seed}\n"
            )


def parse_csv(path: str | Path) -> list[BenchRecord]:
    """Parse a file written by :func:`emit_csv` back into records."""
    records: list[BenchRecord] = []
    with Path(path).open("r", encoding="utf-8", newline="") as handle:
        reader = csv.DictReader(handle)
        for row in reader:
            records.append(
                BenchRecord(
                    method=KernelKind(row["method"]),
                    n=int(row["n"]),
                    rank=int(row["rank"]) if row["rank"] else None,
                    time_s_mean=float(row["time_s_mean"]),
                    time_s_std=float(row["time_s_std"]),
                    achieved_flops=float(row["achieved_flops"]),
                    rel_error=float(row["rel_error"]),
                    peak_bytes=int(row["peak_bytes"]),
                    seed=int(row["seed"]),
                )
            )
    return records


def _series(records: Sequence[BenchRecord]) -> dict[KernelKind, list[BenchRecord]]:
    by_method: dict[KernelKind, list[BenchRecord]] = {}
    for record in records:
        by_method.setdefault(record.method, []).append(record)
    for rows in by_method.values():
        rows.sort(key=lambda r: r.n)
    return by_method


def build_figures(records: Sequence[BenchRecord]) -> dict[str, "Figure"]:
    """Build the four benchmark figures keyed by file stem.

    The x axis is log2(n); one series per method. The speedup figure needs
    the ``direct_fp32`` baseline and is omitted with a logged notice when
    that method is absent.
    """
    from matplotlib.figure import Figure

    if not records:
        raise ValueError("no measured records to plot")
    by_method = _series(records)

    def new_axes(ylabel: str, title: str, log_y: bool):
        fig = Figure(figsize=(7, 4.5))
        ax = fig.subplots()
        ax.set_xscale("log", base=2)
        if log_y:
            ax.set_yscale("log")
        ax.set_xlabel("matrix size n (log2 axis)")
        ax.set_ylabel(ylabel)
        ax.set_title(title)
        ax.grid(True, which="both", linestyle=":")
        return fig, ax

    panels: list[tuple[str, str, str, Callable[[BenchRecord], float]]] = [
        ("time", "time", "wall time [s]", lambda r: r.time_s_mean),
        ("throughput", "throughput", "dense-equivalent FLOP/s", lambda r: r.achieved_flops),
        ("rel_error", "relative error", "rel. error vs exact", lambda r: r.rel_error),
    ]
    figures: dict[str, Figure] = {}
    for stem, title, ylabel, getter in panels:
        fig, ax = new_axes(ylabel, title, log_y=True)
        for method, rows in sorted(by_method.items(), key=lambda kv: kv[0].value):
            ax.plot([r.n for r in rows], [getter(r) for r in rows], marker="o", label=method.value)
        ax.legend()
        figures[stem] = fig

    baseline = by_method.get(KernelKind.DIRECT_FP32)
    if baseline is None:
        logger.warning("speedup plot skipped: no %s records", KernelKind.DIRECT_FP32.value)
        return figures
    base_times = {r.n: r.time_s_mean for r in baseline}
    fig, ax = new_axes(f"speedup vs {KernelKind.DIRECT_FP32.value}", "speedup", log_y=False)
    for method, rows in sorted(by_method.items(), key=lambda kv: kv[0].value):
        xs = [r.n for r in rows if r.n in base_times]
        ys = [base_times[r.n] / r.time_s_mean for r in rows if r.n in base_times]
        ax.plot(xs, ys, marker="o", label=method.value)
    ax.legend()
    figures["speedup"] = fig
    return figures


def emit_plots(records: Sequence[BenchRecord | BenchSkip], directory: str | Path) -> list[Path]:
    """Write the benchmark figures as SVG files; returns the paths written."""
    measured = [r for r in records if isinstance(r, BenchRecord)]
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    written: list[Path] = []
    for stem, fig in build_figures(measured).items():
        path = directory / f"{stem}.svg"
        fig.savefig(path, format="svg")
        written.append(path)
    return written
