"""Exact and randomized truncated SVD plus rank-selection policies.

All factorizations run in float64. Singular values below ``1e-12 * sigma_1``
are treated as zero so round-off never inflates the numerical rank; a
returned decomposition can therefore have smaller rank than requested when
the spectrum is degenerate.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Union

import numpy as np

from .errors import RankError, ShapeMismatchError, ZeroNormError
from .matrices import DenseMatrix, frobenius_norm

__all__ = [
    "SvdFactors",
    "FixedFraction",
    "EnergyThreshold",
    "ErrorConstrained",
    "HardwareAware",
    "RankPolicy",
    "truncated_svd",
    "randomized_svd",
    "select_rank",
    "decompose",
    "reconstruct",
]

#: Relative threshold below which singular values count as zero.
RANK_TOLERANCE = 1e-12

#: Default Halko-style range-finder parameters.
DEFAULT_OVERSAMPLE = 8
DEFAULT_POWER_ITERS = 2

#: Initial sketch width for spectrum-dependent policies under the randomized
#: method; doubled until the policy is satisfiable inside the sketch.
ESCALATION_START_WIDTH = 16

_ORTHO_TOL = 1e-8


@dataclass(frozen=True, eq=False)
class SvdFactors:
    """Truncated triple (U, s, Vt): U is m x r, s has length r, Vt is r x n."""

    u: DenseMatrix
    s: np.ndarray
    vt: DenseMatrix

    def __post_init__(self) -> None:
        s = np.array(self.s, dtype=np.float64, copy=True)
        if s.ndim != 1 or len(s) < 1:
            raise RankError("s must be a non-empty 1-D sequence")
        if np.any(s <= 0):
            raise ValueError("singular values must be positive (zeros are truncated away)")
        if np.any(s[:-1] < s[1:]):
            raise ValueError("singular values must be sorted non-increasing")
        r = len(s)
        if self.u.cols != r or self.vt.rows != r:
            raise ShapeMismatchError(
                f"rank mismatch: len(s)={r}, u is {self.u.rows}x{self.u.cols}, "
                f"vt is {self.vt.rows}x{self.vt.cols}"
            )
        eye = np.eye(r)
        if not np.allclose(self.u.data.T @ self.u.data, eye, atol=_ORTHO_TOL):
            raise ValueError("u does not have orthonormal columns")
        if not np.allclose(self.vt.data @ self.vt.data.T, eye, atol=_ORTHO_TOL):
            raise ValueError("vt does not have orthonormal rows")
        s.setflags(write=False)
        object.__setattr__(self, "s", s)

    @property
    def rank(self) -> int:
        return len(self.s)


@dataclass(frozen=True)
class FixedFraction:
    """Keep ``r = max(1, round(alpha * min(m, n)))`` (half rounds up)."""

    alpha: float

    def __post_init__(self) -> None:
        if not 0.0 < self.alpha <= 1.0:
            raise ValueError(f"alpha must lie in (0, 1], got {self.alpha}")


@dataclass(frozen=True)
class EnergyThreshold:
    """Smallest rank whose retained squared-singular-value mass reaches tau."""

    tau: float

    def __post_init__(self) -> None:
        if not 0.0 < self.tau <= 1.0:
            raise ValueError(f"tau must lie in (0, 1], got {self.tau}")


@dataclass(frozen=True)
class ErrorConstrained:
    """Smallest rank whose relative Frobenius truncation error is <= epsilon."""

    epsilon: float

    def __post_init__(self) -> None:
        if not self.epsilon > 0.0:
            raise ValueError(f"epsilon must be positive, got {self.epsilon}")


@dataclass(frozen=True)
class HardwareAware:
    """Largest rank whose factorized storage fits a byte budget."""

    memory_budget_bytes: int
    bytes_per_element: int

    def __post_init__(self) -> None:
        if self.memory_budget_bytes < 1:
            raise ValueError("memory_budget_bytes must be positive")
        if self.bytes_per_element < 1:
            raise ValueError("bytes_per_element must be positive")


RankPolicy = Union[FixedFraction, EnergyThreshold, ErrorConstrained, HardwareAware]


def _clean_spectrum(s: np.ndarray) -> np.ndarray:
    """Drop singular values below RANK_TOLERANCE relative to the largest."""
    if len(s) == 0 or s[0] <= 0:
        return s[:0]
    return s[s > RANK_TOLERANCE * s[0]]


def _factors_from_arrays(u: np.ndarray, s: np.ndarray, vt: np.ndarray) -> SvdFactors:
    kept = _clean_spectrum(s)
    if len(kept) == 0:
        raise ZeroNormError("matrix is numerically zero; no positive singular values")
    r = len(kept)
    return SvdFactors(DenseMatrix(u[:, :r]), kept, DenseMatrix(vt[:r, :]))


def truncated_svd(a: DenseMatrix, r: int) -> SvdFactors:
    """Top-``r`` factors of the full float64 SVD.

    The reconstruction is the Frobenius-optimal rank-r approximation.
    Deterministic. LAPACK convergence failures (np.linalg.LinAlgError)
    propagate untouched.
    """
    limit = min(a.rows, a.cols)
    if not 1 <= r <= limit:
        raise RankError(f"rank {r} out of range [1, {limit}] for a {a.rows}x{a.cols} matrix")
    u, s, vt = np.linalg.svd(a.data, full_matrices=False)
    return _factors_from_arrays(u[:, :r], s[:r], vt[:r, :])


def randomized_svd(
    a: DenseMatrix,
    r: int,
    oversample: int = DEFAULT_OVERSAMPLE,
    power_iters: int = DEFAULT_POWER_ITERS,
    seed: int = 0,
) -> SvdFactors:
    """Halko-style randomized truncated SVD, deterministic given ``seed``.

    A PCG64 generator seeded with ``seed`` draws one n x (r + oversample)
    Gaussian sketch; the sampled range is re-orthonormalized by reduced QR
    after every power iteration (one A^T pass then one A pass per iteration),
    a small exact SVD finishes the job and the result is truncated to ``r``.
    """
    if r < 1:
        raise RankError(f"rank must be positive, got {r}")
    if oversample < 0 or power_iters < 0:
        raise RankError("oversample and power_iters must be non-negative")
    width = r + oversample
    limit = min(a.rows, a.cols)
    if width > limit:
        raise RankError(
            f"sketch width {width} (= r {r} + oversample {oversample}) exceeds min(m, n) = {limit}"
        )
    rng = np.random.default_rng(seed)
    sketch = rng.standard_normal((a.cols, width))
    q, _ = np.linalg.qr(a.data @ sketch)
    for _ in range(power_iters):
        z, _ = np.linalg.qr(a.data.T @ q)
        q, _ = np.linalg.qr(a.data @ z)
    small = q.T @ a.data
    u_small, s, vt = np.linalg.svd(small, full_matrices=False)
    u = q @ u_small
    return _factors_from_arrays(u[:, :r], s[:r], vt[:r, :])


def _shape_only_rank(policy: RankPolicy, m: int, n: int) -> int | None:
    """Rank implied by the policy from the shape alone; None if it needs the spectrum."""
    limit = min(m, n)
    if isinstance(policy, FixedFraction):
        return min(limit, max(1, int(np.floor(policy.alpha * limit + 0.5))))
    if isinstance(policy, HardwareAware):
        per_rank = (m + n + 1) * policy.bytes_per_element
        r = policy.memory_budget_bytes // per_rank
        if r < 1:
            raise RankError(
                f"memory budget {policy.memory_budget_bytes} B cannot hold rank-1 factors "
                f"({per_rank} B) of a {m}x{n} matrix"
            )
        return min(limit, int(r))
    return None


def select_rank(singular_values, policy: RankPolicy, m: int, n: int) -> int:
    """Apply a rank policy to a non-increasing spectrum.

    Energy and error policies scan prefix/suffix sums in index order, so the
    selected rank is bit-for-bit the one a sequential scan finds; threshold
    comparisons are inclusive (>= for energy, <= for error), which picks the
    smaller rank on boundary-equality spectra.
    """
    sv = np.asarray(singular_values, dtype=np.float64)
    if sv.ndim != 1 or len(sv) < 1:
        raise RankError("spectrum must be a non-empty 1-D sequence")
    if np.any(sv < 0) or np.any(sv[:-1] < sv[1:]):
        raise ValueError("spectrum must be non-negative and sorted non-increasing")
    if sv[0] == 0.0:
        raise ZeroNormError("all-zero spectrum has no selectable rank")

    shaped = _shape_only_rank(policy, m, n)
    if shaped is not None:
        return shaped

    sq = sv * sv
    if isinstance(policy, EnergyThreshold):
        prefix = np.cumsum(sq)
        ratios = prefix / prefix[-1]
        return int(np.argmax(ratios >= policy.tau)) + 1
    # ErrorConstrained: suffix sums accumulated from the back so the scan the
    # brute-force oracle performs is reproduced exactly.
    suffix = np.concatenate([np.cumsum(sq[::-1])[::-1][1:], [0.0]])
    total = float(np.cumsum(sq[::-1])[-1])
    ratios = np.sqrt(suffix / total)
    return int(np.argmax(ratios <= policy.epsilon)) + 1


def _select_with_estimated_tail(
    s_estimate: np.ndarray, policy: RankPolicy, total_sq: float
) -> int | None:
    """Smallest rank satisfying an energy/error policy given sketched singular values.

    ``total_sq`` is the exact squared Frobenius norm of the full matrix, so
    the tail estimate ``total_sq - prefix`` only overestimates the true tail
    (sketched singular values never exceed the true ones) and an accepted
    rank genuinely satisfies the policy. Returns None when no rank inside the
    sketch qualifies.
    """
    prefix = np.cumsum(s_estimate * s_estimate)
    if isinstance(policy, EnergyThreshold):
        ok = prefix / total_sq >= policy.tau
    else:
        tail = np.maximum(total_sq - prefix, 0.0)
        ok = np.sqrt(tail / total_sq) <= policy.epsilon
    if not ok.any():
        return None
    return int(np.argmax(ok)) + 1


def decompose(
    a: DenseMatrix,
    policy: RankPolicy,
    method: str = "exact",
    seed: int = 0,
) -> SvdFactors:
    """Factorize ``a`` and truncate to the rank the policy selects.

    ``method="exact"`` runs one full SVD and applies :func:`select_rank` to
    its spectrum. ``method="randomized"`` uses the seeded range finder: for
    shape-only policies the sketch width is the implied rank plus the default
    oversampling; for energy/error policies the width starts at 16 and
    doubles until the policy is satisfiable inside the sketch (judged against
    the exact squared Frobenius norm, so acceptance is conservative), falling
    back to the full width if the tolerance is unreachable.
    """
    if method not in ("exact", "randomized"):
        raise ValueError(f"method must be 'exact' or 'randomized', got {method!r}")
    if float(np.max(np.abs(a.data))) == 0.0:
        raise ZeroNormError("cannot decompose an all-zero matrix")
    limit = min(a.rows, a.cols)

    if method == "exact":
        full = truncated_svd(a, limit)
        r = min(select_rank(full.s, policy, a.rows, a.cols), full.rank)
        return _slice_factors(full, r)

    shaped = _shape_only_rank(policy, a.rows, a.cols)
    if shaped is not None:
        oversample = min(DEFAULT_OVERSAMPLE, limit - shaped)
        return randomized_svd(a, shaped, oversample, DEFAULT_POWER_ITERS, seed)

    total_sq = frobenius_norm(a) ** 2
    width = min(ESCALATION_START_WIDTH, limit)
    while True:
        oversample = min(DEFAULT_OVERSAMPLE, limit - width)
        factors = randomized_svd(a, width, oversample, DEFAULT_POWER_ITERS, seed)
        r = _select_with_estimated_tail(factors.s, policy, total_sq)
        if r is not None:
            return _slice_factors(factors, min(r, factors.rank))
        if width >= limit:
            # Tolerance unreachable even at full width: full rank is the best
            # approximation this matrix admits.
            return factors
        width = min(2 * width, limit)


def _slice_factors(f: SvdFactors, r: int) -> SvdFactors:
    if r >= f.rank:
        return f
    return SvdFactors(DenseMatrix(f.u.data[:, :r]), f.s[:r], DenseMatrix(f.vt.data[:r, :]))


def reconstruct(f: SvdFactors) -> DenseMatrix:
    """``u @ diag(s) @ vt``, associated as (u * s) @ vt."""
    return DenseMatrix((f.u.data * f.s) @ f.vt.data)
