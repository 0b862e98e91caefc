"""Low-rank approximate matrix multiplication with emulated reduced precision.

The package covers the full pipeline: dense reference operations, truncated
and randomized SVD with pluggable rank-selection policies, the factor-merge
multiply, software-emulated fp8 storage with fp16 compute and fp32
accumulation, a cost-model kernel selector, an analytic roofline/memory
model, and a benchmark harness with CSV/plot emission. A scikit-learn
compatible transformer wraps the approximation core.
"""

from .matrices import (
    DenseMatrix,
    Precision,
    SpectrumSpec,
    frobenius_norm,
    matmul_reference,
    relative_error,
    round_to_grid,
    synth_matrix,
)
from .fp8 import (
    E4M3,
    E5M2,
    Fp8Format,
    Fp8Tensor,
    dequantize,
    fp8_gemm,
    quantize,
    resolve_precision,
)
from .decomposition import (
    EnergyThreshold,
    ErrorConstrained,
    FixedFraction,
    HardwareAware,
    RankPolicy,
    SvdFactors,
    decompose,
    randomized_svd,
    reconstruct,
    select_rank,
    truncated_svd,
)
from .gemm import (
    GemmPrecision,
    GemmStats,
    crossover_rank,
    lowrank_flops,
    lowrank_gemm,
    lowrank_multiply,
    quantized_factor_multiply,
)
from .selector import (
    DEFAULT_RANK_POLICY,
    CostEstimate,
    HardwareProfile,
    KernelConfig,
    KernelKind,
    estimate_cost,
    policy_rank,
    select_kernel,
)
from .perfmodel import (
    ERROR_MODEL_COEFFICIENT,
    MemoryReport,
    ThroughputReport,
    bandwidth_limited_flops,
    capacity_limited_n,
    error_scale_estimate,
    extrapolate_throughput,
    fraction_of_peak,
    gemm_flops,
    gemm_traffic_bytes,
    memory_report,
    throughput_report,
)
from .profiles import (
    ProfileRegistry,
    builtin_profiles,
    load_profile,
    resolve_profile as resolve_profile_name,
    serialize_profile,
)
from .bench import (
    BenchConfig,
    BenchRecord,
    BenchSkip,
    DEFAULT_SPECTRUM,
    GeometricSpectrum,
    KneeSpectrum,
    emit_csv,
    emit_plots,
    parse_csv,
    run_bench,
    size_ladder,
    validate_config,
)
from .io import (
    MatrixFile,
    read_factors,
    read_matrix,
    write_factors,
    write_matrix,
)
from .estimator import LowRankApproximator
from . import errors

__version__ = "0.1.0"

__all__ = [
    "DenseMatrix",
    "Precision",
    "SpectrumSpec",
    "frobenius_norm",
    "matmul_reference",
    "relative_error",
    "round_to_grid",
    "synth_matrix",
    "E4M3",
    "E5M2",
    "Fp8Format",
    "Fp8Tensor",
    "dequantize",
    "fp8_gemm",
    "quantize",
    "resolve_precision",
    "EnergyThreshold",
    "ErrorConstrained",
    "FixedFraction",
    "HardwareAware",
    "RankPolicy",
    "SvdFactors",
    "decompose",
    "randomized_svd",
    "reconstruct",
    "select_rank",
    "truncated_svd",
    "GemmPrecision",
    "GemmStats",
    "crossover_rank",
    "lowrank_flops",
    "lowrank_gemm",
    "lowrank_multiply",
    "quantized_factor_multiply",
    "DEFAULT_RANK_POLICY",
    "CostEstimate",
    "HardwareProfile",
    "KernelConfig",
    "KernelKind",
    "estimate_cost",
    "policy_rank",
    "select_kernel",
    "ERROR_MODEL_COEFFICIENT",
    "MemoryReport",
    "ThroughputReport",
    "bandwidth_limited_flops",
    "capacity_limited_n",
    "error_scale_estimate",
    "extrapolate_throughput",
    "fraction_of_peak",
    "gemm_flops",
    "gemm_traffic_bytes",
    "memory_report",
    "throughput_report",
    "ProfileRegistry",
    "builtin_profiles",
    "load_profile",
    "resolve_profile_name",
    "serialize_profile",
    "BenchConfig",
    "BenchRecord",
    "BenchSkip",
    "DEFAULT_SPECTRUM",
    "GeometricSpectrum",
    "KneeSpectrum",
    "emit_csv",
    "emit_plots",
    "parse_csv",
    "run_bench",
    "size_ladder",
    "validate_config",
    "MatrixFile",
    "read_factors",
    "read_matrix",
    "write_factors",
    "write_matrix",
    "LowRankApproximator",
    "errors",
    "__version__",
]
