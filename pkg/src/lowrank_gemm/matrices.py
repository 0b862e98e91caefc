"""Dense matrices with emulated element precision, reference GEMM and error metrics.

Storage is always float64. Reduced precisions (fp32/fp16/fp8) are emulated by
rounding values onto the corresponding representable grid and tagging the
matrix with the precision it was last rounded to. This keeps every emulated
computation bit-reproducible on any host with IEEE-754 doubles.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .errors import NonFiniteError, RankError, ShapeMismatchError, ZeroNormError

__all__ = [
    "Precision",
    "DenseMatrix",
    "SpectrumSpec",
    "matmul_reference",
    "frobenius_norm",
    "relative_error",
    "synth_matrix",
    "round_to_grid",
]

FP16_MAX = 65504.0


class Precision(enum.Enum):
    """Element precision tag. Tags record the grid values were last rounded to."""

    FP64 = "fp64"
    FP32 = "fp32"
    FP16 = "fp16"
    FP8 = "fp8"

    @property
    def itemsize(self) -> int:
        """Bytes one element of this precision occupies on real hardware."""
        return {"fp64": 8, "fp32": 4, "fp16": 2, "fp8": 1}[self.value]


def _as_float64_array(data) -> np.ndarray:
    arr = np.array(data, dtype=np.float64, order="C", copy=True)
    if arr.ndim != 2:
        raise ShapeMismatchError(f"expected a 2-D array, got ndim={arr.ndim}")
    if arr.shape[0] < 1 or arr.shape[1] < 1:
        raise ShapeMismatchError(f"matrix dimensions must be positive, got {arr.shape}")
    return arr


def _on_grid(arr: np.ndarray, precision: Precision) -> bool:
    if precision is Precision.FP32:
        return bool(np.all(arr.astype(np.float32).astype(np.float64) == arr))
    if precision is Precision.FP16:
        return bool(np.all(arr.astype(np.float16).astype(np.float64) == arr))
    return True


@dataclass(frozen=True, eq=False)
class DenseMatrix:
    """Immutable row-major float64 matrix with an element-precision tag.

    The ``precision`` tag is provenance: fp32/fp16-tagged matrices hold values
    that lie exactly on the corresponding value grid (checked on
    construction). fp8-tagged matrices hold per-tensor *scaled* fp8 grid
    values, so grid membership depends on the scale and is not re-checked
    here.
    """

    data: np.ndarray
    precision: Precision = Precision.FP64

    def __post_init__(self) -> None:
        arr = _as_float64_array(self.data)
        if not np.all(np.isfinite(arr)):
            raise NonFiniteError("matrix contains NaN or infinite entries")
        if not _on_grid(arr, self.precision):
            raise NonFiniteError(
                f"matrix tagged {self.precision.value} has entries off that precision's grid"
            )
        arr.setflags(write=False)
        object.__setattr__(self, "data", arr)

    @property
    def rows(self) -> int:
        return self.data.shape[0]

    @property
    def cols(self) -> int:
        return self.data.shape[1]

    @property
    def shape(self) -> tuple[int, int]:
        return self.data.shape

    @classmethod
    def from_rows(cls, rows, precision: Precision = Precision.FP64) -> "DenseMatrix":
        return cls(np.asarray(rows, dtype=np.float64), precision)

    @classmethod
    def identity(cls, n: int) -> "DenseMatrix":
        return cls(np.eye(n))

    @classmethod
    def zeros(cls, rows: int, cols: int) -> "DenseMatrix":
        return cls(np.zeros((rows, cols)))


@dataclass(frozen=True)
class SpectrumSpec:
    """Recipe for a synthetic matrix with a prescribed singular spectrum."""

    m: int
    n: int
    singular_values: tuple[float, ...]
    seed: int = 0

    def __post_init__(self) -> None:
        object.__setattr__(self, "singular_values", tuple(float(s) for s in self.singular_values))
        if self.m < 1 or self.n < 1:
            raise ShapeMismatchError(f"dimensions must be positive, got {self.m}x{self.n}")
        sv = self.singular_values
        if len(sv) < 1:
            raise RankError("spectrum must contain at least one singular value")
        if len(sv) > min(self.m, self.n):
            raise RankError(
                f"spectrum length {len(sv)} exceeds min(m, n) = {min(self.m, self.n)}"
            )
        if any(s < 0 for s in sv):
            raise ValueError("singular values must be non-negative")
        if any(sv[i] < sv[i + 1] for i in range(len(sv) - 1)):
            raise ValueError("singular values must be sorted non-increasing")


def matmul_reference(a: DenseMatrix, b: DenseMatrix) -> DenseMatrix:
    """Exact float64 GEMM with a fixed accumulation order.

    Every output element is the sum of its products taken with k ascending,
    one addition at a time, which makes results bit-identical across runs and
    hosts. This is the correctness baseline the approximate paths are
    measured against; it is deliberately not BLAS-backed.
    """
    if a.cols != b.rows:
        raise ShapeMismatchError(
            f"cannot multiply {a.rows}x{a.cols} by {b.rows}x{b.cols}: inner dimensions differ"
        )
    out = np.zeros((a.rows, b.cols))
    lhs, rhs = a.data, b.data
    for k in range(a.cols):
        out += lhs[:, k : k + 1] * rhs[k : k + 1, :]
    return DenseMatrix(out)


def frobenius_norm(a: DenseMatrix) -> float:
    """Square root of the sum of squared elements."""
    return float(np.sqrt(np.sum(a.data * a.data)))


def relative_error(approx: DenseMatrix, exact: DenseMatrix) -> float:
    """``||approx - exact||_F / ||exact||_F``; the reference must be nonzero."""
    if approx.shape != exact.shape:
        raise ShapeMismatchError(
            f"shape mismatch: approx is {approx.rows}x{approx.cols}, "
            f"exact is {exact.rows}x{exact.cols}"
        )
    ref = frobenius_norm(exact)
    if ref == 0.0:
        raise ZeroNormError("reference matrix has zero Frobenius norm")
    diff = approx.data - exact.data
    return float(np.sqrt(np.sum(diff * diff))) / ref


def _orthonormal_columns(rng: np.random.Generator, rows: int, cols: int) -> np.ndarray:
    # Reduced QR of a Gaussian draw; column signs fixed so the R diagonal is
    # non-negative, removing the QR sign ambiguity.
    q, r = np.linalg.qr(rng.standard_normal((rows, cols)))
    signs = np.where(np.diag(r) >= 0.0, 1.0, -1.0)
    return q * signs


def synth_matrix(spec: SpectrumSpec) -> DenseMatrix:
    """Build ``U @ diag(sv) @ V.T`` with seeded orthonormal U (m x l) and V (n x l).

    Generator recipe (fixed so tests reproduce across platforms): a PCG64
    generator seeded with ``spec.seed`` (``numpy.random.default_rng``) first
    draws the m x l Gaussian block for U, then the n x l block for V; each is
    orthonormalized by reduced QR with the R-diagonal sign fix. The singular
    values of the result match ``spec.singular_values`` to within 1e-10
    absolute.
    """
    sv = np.asarray(spec.singular_values)
    rng = np.random.default_rng(spec.seed)
    u = _orthonormal_columns(rng, spec.m, len(sv))
    v = _orthonormal_columns(rng, spec.n, len(sv))
    return DenseMatrix((u * sv) @ v.T)


def round_to_grid(a: DenseMatrix, precision: Precision) -> DenseMatrix:
    """Round every element to ``precision``'s value grid and retag.

    fp16 saturates at +-65504 (same convention as the fp8 quantizer: no
    infinities are ever produced). fp8 has no fixed grid without a per-tensor
    scale; use :func:`lowrank_gemm.fp8.quantize` for that.
    """
    if precision is Precision.FP64:
        return DenseMatrix(a.data, Precision.FP64)
    if precision is Precision.FP32:
        return DenseMatrix(a.data.astype(np.float32).astype(np.float64), Precision.FP32)
    if precision is Precision.FP16:
        clipped = np.clip(a.data, -FP16_MAX, FP16_MAX)
        return DenseMatrix(clipped.astype(np.float16).astype(np.float64), Precision.FP16)
    raise ValueError("fp8 rounding requires a per-tensor scale; use fp8.quantize")
