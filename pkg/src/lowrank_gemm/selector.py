"""Cost-model-driven choice among direct and low-rank execution strategies.

The model predicts, it does not measure: for every candidate kind it prices
FLOPs against the profile's peak throughput and bytes against its bandwidth,
adds a per-kind launch overhead, and picks the cheapest. Measured feedback
belongs to the benchmark harness, which keeps selection deterministic.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from types import MappingProxyType
from typing import Mapping

from .decomposition import (
    EnergyThreshold,
    FixedFraction,
    RankPolicy,
    _shape_only_rank,
)
from .errors import RankError
from .gemm import lowrank_flops
from .matrices import Precision

__all__ = [
    "KernelKind",
    "HardwareProfile",
    "CostEstimate",
    "KernelConfig",
    "estimate_cost",
    "select_kernel",
    "policy_rank",
    "DEFAULT_RANK_POLICY",
    "DEFAULT_SVD_PASSES",
]

#: Rank policy the selector assumes when none is given. alpha = 1/40 keeps
#: rank 512 at n = 20480, the operating point the shipped profiles were sized
#: around.
DEFAULT_RANK_POLICY = FixedFraction(alpha=0.025)

#: Passes over the data charged for the decomposition step of low-rank kinds
#: (a randomized SVD reads the operand a small constant number of times).
#: This constant positions the direct/low-rank crossover, so it is a visible
#: knob rather than a buried literal.
DEFAULT_SVD_PASSES = 4.0


class KernelKind(enum.Enum):
    """The five execution strategies the selector arbitrates between."""

    DIRECT_FP32 = "direct_fp32"
    DIRECT_FP16 = "direct_fp16"
    DIRECT_FP8 = "direct_fp8"
    LOWRANK_FP8 = "lowrank_fp8"
    LOWRANK_AUTO = "lowrank_auto"

    @property
    def is_lowrank(self) -> bool:
        return self in (KernelKind.LOWRANK_FP8, KernelKind.LOWRANK_AUTO)

    @property
    def storage_precision(self) -> Precision:
        return {
            KernelKind.DIRECT_FP32: Precision.FP32,
            KernelKind.DIRECT_FP16: Precision.FP16,
            KernelKind.DIRECT_FP8: Precision.FP8,
            KernelKind.LOWRANK_FP8: Precision.FP8,
            KernelKind.LOWRANK_AUTO: Precision.FP8,
        }[self]


# Candidates in ascending order of modeled approximation error: direct kinds
# before low-rank kinds, and the adaptive low-rank path before the fixed one.
# Scanning in this order with a strict comparison makes cost ties resolve
# toward the lower-error kind, deterministically.
_SELECTION_ORDER = (
    KernelKind.DIRECT_FP32,
    KernelKind.DIRECT_FP16,
    KernelKind.DIRECT_FP8,
    KernelKind.LOWRANK_AUTO,
    KernelKind.LOWRANK_FP8,
)


@dataclass(frozen=True)
class HardwareProfile:
    """Named accelerator description driving the cost model."""

    name: str
    mem_bandwidth_bytes_per_s: float
    peak_flops: Mapping[Precision, float]
    memory_capacity_bytes: int
    launch_overhead_s_direct: float = 5e-5
    launch_overhead_s_lowrank: float = 2e-4

    def __post_init__(self) -> None:
        peaks = dict(self.peak_flops)
        missing = [p for p in (Precision.FP32, Precision.FP16, Precision.FP8) if p not in peaks]
        if missing:
            raise ValueError(f"profile {self.name!r} lacks peak FLOPS for {missing}")
        for label, value in (
            ("mem_bandwidth_bytes_per_s", self.mem_bandwidth_bytes_per_s),
            ("memory_capacity_bytes", self.memory_capacity_bytes),
            *((f"peak_flops[{p.value}]", peaks[p]) for p in peaks),
        ):
            if not (value > 0 and value != float("inf")):
                raise ValueError(f"profile {self.name!r}: {label} must be positive and finite")
        if self.launch_overhead_s_direct < 0 or self.launch_overhead_s_lowrank < 0:
            raise ValueError(f"profile {self.name!r}: launch overheads must be non-negative")
        if not (
            peaks[Precision.FP32] <= peaks[Precision.FP16] <= peaks[Precision.FP8]
        ):
            raise ValueError(
                f"profile {self.name!r}: peak FLOPS must be non-decreasing from fp32 to fp8"
            )
        object.__setattr__(self, "peak_flops", MappingProxyType(peaks))

    def launch_overhead_s(self, kind: KernelKind) -> float:
        return self.launch_overhead_s_lowrank if kind.is_lowrank else self.launch_overhead_s_direct


@dataclass(frozen=True)
class CostEstimate:
    """Predicted cost of one kind: time is overhead + max(compute, traffic)."""

    kind: KernelKind
    rank: int | None
    flops: int
    bytes_moved: int
    predicted_time_s: float
    limited_by: str  # "compute" | "bandwidth" | "overhead"


@dataclass(frozen=True)
class KernelConfig:
    """Selector output: the winning kind plus every candidate's estimate."""

    kind: KernelKind
    rank: int | None
    policy: RankPolicy
    estimate: CostEstimate
    alternatives: tuple[CostEstimate, ...]


def _finish_estimate(
    kind: KernelKind,
    rank: int | None,
    flops: int,
    bytes_moved: int,
    profile: HardwareProfile,
    peak: float,
) -> CostEstimate:
    overhead = profile.launch_overhead_s(kind)
    t_compute = flops / peak
    t_bytes = bytes_moved / profile.mem_bandwidth_bytes_per_s
    bound = max(t_compute, t_bytes)
    if overhead > bound:
        limited = "overhead"
    elif t_compute >= t_bytes:
        limited = "compute"
    else:
        limited = "bandwidth"
    return CostEstimate(
        kind=kind,
        rank=rank,
        flops=flops,
        bytes_moved=bytes_moved,
        predicted_time_s=overhead + bound,
        limited_by=limited,
    )


def estimate_cost(
    kind: KernelKind,
    m: int,
    k: int,
    n: int,
    rank: int | None = None,
    profile: HardwareProfile | None = None,
    svd_passes: float = DEFAULT_SVD_PASSES,
) -> CostEstimate:
    """Price one kind for an m x k times k x n product under ``profile``.

    Direct kinds move all three dense operands and do ``2*m*k*n`` FLOPs at
    the kind's precision peak. Low-rank kinds move two factor bundles plus
    the dense output, and pay the staged pipeline FLOPs plus a decomposition
    surcharge of ``2 * svd_passes * (m + n) * rank * k``. ``rank`` is
    required for (and only for) low-rank kinds.

    The adaptive kind prices each storage precision and keeps the cheapest,
    which models its freedom to pick the precision at run time.
    """
    if profile is None:
        raise ValueError("a hardware profile is required")
    if min(m, k, n) < 1:
        raise ValueError("matrix dimensions must be positive")
    if kind.is_lowrank:
        if rank is None:
            raise RankError(f"{kind.value} requires a rank")
        if rank < 1:
            raise RankError(f"rank must be positive, got {rank}")
        flops = lowrank_flops(m, k, n, rank, rank) + int(2 * svd_passes * (m + n) * rank * k)
        if kind is KernelKind.LOWRANK_AUTO:
            candidates = (Precision.FP8, Precision.FP16, Precision.FP32)
        else:
            candidates = (kind.storage_precision,)
        best: CostEstimate | None = None
        for prec in candidates:
            bpe = prec.itemsize
            bytes_moved = (m * rank + rank + rank * n) * 2 * bpe + m * n * bpe
            est = _finish_estimate(kind, rank, flops, bytes_moved, profile, profile.peak_flops[prec])
            if best is None or est.predicted_time_s < best.predicted_time_s:
                best = est
        return best
    if rank is not None:
        raise RankError(f"{kind.value} does not take a rank")
    prec = kind.storage_precision
    bpe = prec.itemsize
    flops = 2 * m * k * n
    bytes_moved = (m * k + k * n + m * n) * bpe
    return _finish_estimate(kind, None, flops, bytes_moved, profile, profile.peak_flops[prec])


def policy_rank(policy: RankPolicy, m: int, k: int, n: int) -> int:
    """Rank the selector assumes a policy will pick for an (m, k, n) product.

    Shape-only policies answer directly (on the tighter of the two operand
    shapes). Spectrum-dependent policies have no spectrum at selection time,
    so the error model ``eps ~ coeff * sqrt(n / r)`` is inverted at the
    policy's error target (``epsilon``, or ``sqrt(1 - tau)`` for energy
    retention).
    """
    limit = min(m, k, n)
    shaped = _shape_only_rank(policy, m, n)
    if shaped is not None:
        return min(shaped, limit)
    if isinstance(policy, EnergyThreshold):
        target = float((1.0 - policy.tau) ** 0.5)
    else:
        target = policy.epsilon
    from .perfmodel import ERROR_MODEL_COEFFICIENT

    if target <= 0.0:
        return limit
    implied = int(n * (ERROR_MODEL_COEFFICIENT / target) ** 2) + 1
    return max(1, min(implied, limit))


def select_kernel(
    m: int,
    k: int,
    n: int,
    profile: HardwareProfile,
    rank_policy: RankPolicy | None = None,
    error_budget: float | None = None,
) -> KernelConfig:
    """Pick the kind with the smallest predicted time.

    Low-rank kinds are priced at the rank the policy implies for this shape
    and are filtered out entirely when ``error_budget`` is given and sits
    below the model's error estimate for that rank. Cost ties resolve toward
    direct (lower-error) kinds.
    """
    policy = rank_policy if rank_policy is not None else DEFAULT_RANK_POLICY
    rank = policy_rank(policy, m, k, n)
    from .perfmodel import error_scale_estimate

    estimates: list[CostEstimate] = []
    best: CostEstimate | None = None
    for kind in _SELECTION_ORDER:
        est = estimate_cost(kind, m, k, n, rank if kind.is_lowrank else None, profile)
        estimates.append(est)
        if kind.is_lowrank and error_budget is not None:
            if error_budget < error_scale_estimate(n, min(rank, n)):
                continue
        if best is None or est.predicted_time_s < best.predicted_time_s:
            best = est
    return KernelConfig(
        kind=best.kind,
        rank=best.rank,
        policy=policy,
        estimate=best,
        alternatives=tuple(estimates),
    )
