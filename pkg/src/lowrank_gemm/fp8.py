"""Software emulation of FP8 storage with FP16 compute and FP32 accumulation.

An 8-bit float here is 1 sign bit, ``exponent_bits`` exponent bits and
``mantissa_bits`` mantissa bits (always summing to 7). Two conventions are
supported and told apart by ``max_finite``:

* **fn style** (E4M3 default): the all-ones exponent is usable for normal
  numbers and only the all-ones code (exponent and mantissa all set) is NaN.
  Largest magnitude ``(2 - 2**-m) * 2**(2**e - 1 - bias)`` minus one mantissa
  step, i.e. 448 for E4M3.
* **IEEE style** (E5M2): the all-ones exponent is reserved for Inf/NaN, so the
  largest magnitude is ``(2 - 2**-m) * 2**(2**e - 2 - bias)``, i.e. 57344.

Encoding saturates at ``+-max_finite`` and never emits NaN/Inf codes; decoding
is total, mapping reserved codes to ``+-max_finite`` so all 256 code points
are enumerable. Subnormals are representable.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import NonFiniteError, ShapeMismatchError
from .matrices import DenseMatrix, Precision

__all__ = [
    "Fp8Format",
    "E4M3",
    "E5M2",
    "Fp8Tensor",
    "quantize",
    "dequantize",
    "fp8_gemm",
    "resolve_precision",
]

# Significand widths (including the implicit leading bit) of the emulated
# compute grids.
_FP16_SIG_BITS = 11


def _format_max(exponent_bits: int, mantissa_bits: int, ieee_specials: bool) -> float:
    bias = 2 ** (exponent_bits - 1) - 1
    top_exp = (2**exponent_bits - 1) - (1 if ieee_specials else 0)
    top_mant = (2**mantissa_bits - 1) - (0 if ieee_specials else 1)
    return (2**mantissa_bits + top_mant) * 2.0 ** (top_exp - bias - mantissa_bits)


@dataclass(frozen=True)
class Fp8Format:
    """An 8-bit floating-point format: 1 sign bit plus e+m = 7."""

    exponent_bits: int
    mantissa_bits: int
    max_finite: float
    name: str

    def __post_init__(self) -> None:
        if self.exponent_bits < 1 or self.mantissa_bits < 0:
            raise ValueError("exponent_bits must be >= 1 and mantissa_bits >= 0")
        if self.exponent_bits + self.mantissa_bits != 7:
            raise ValueError("exponent_bits + mantissa_bits must equal 7 (1 sign bit)")
        if self.max_finite not in (
            _format_max(self.exponent_bits, self.mantissa_bits, False),
            _format_max(self.exponent_bits, self.mantissa_bits, True),
        ):
            raise ValueError(
                f"max_finite {self.max_finite} is not consistent with "
                f"E{self.exponent_bits}M{self.mantissa_bits} under either encoding convention"
            )

    @property
    def bias(self) -> int:
        return 2 ** (self.exponent_bits - 1) - 1

    @property
    def ieee_specials(self) -> bool:
        """True when the all-ones exponent field is reserved for Inf/NaN."""
        return self.max_finite == _format_max(self.exponent_bits, self.mantissa_bits, True)


E4M3 = Fp8Format(exponent_bits=4, mantissa_bits=3, max_finite=448.0, name="e4m3")
E5M2 = Fp8Format(exponent_bits=5, mantissa_bits=2, max_finite=57344.0, name="e5m2")


@lru_cache(maxsize=None)
def _grid(fmt: Fp8Format) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Decode table for the 128 non-negative codes of ``fmt``.

    Returns (values_for_all_codes, finite_code_numbers, finite_code_values);
    reserved Inf/NaN codes decode to max_finite in the first array.
    """
    m_bits = fmt.mantissa_bits
    codes = np.arange(128)
    exp_field = codes >> m_bits
    mant = codes & ((1 << m_bits) - 1)
    normal = exp_field > 0
    values = np.where(
        normal,
        (2.0**m_bits + mant) * 2.0 ** (exp_field - fmt.bias - m_bits),
        mant * 2.0 ** (1 - fmt.bias - m_bits),
    )
    if fmt.ieee_specials:
        reserved = exp_field == (2**fmt.exponent_bits - 1)
    else:
        reserved = codes == 127
    values = np.where(reserved, fmt.max_finite, values)
    finite_codes = codes[~reserved]
    finite_values = values[~reserved]
    for arr in (values, finite_codes, finite_values):
        arr.setflags(write=False)
    return values, finite_codes, finite_values


def decode_code(code: int, fmt: Fp8Format) -> float:
    """Value of one 8-bit code. Total: reserved codes saturate to +-max_finite."""
    values, _, _ = _grid(fmt)
    sign = -1.0 if code & 0x80 else 1.0
    return sign * float(values[code & 0x7F])


def encode_values(values: np.ndarray, fmt: Fp8Format) -> np.ndarray:
    """Round-to-nearest-even fp8 encoding, saturating at +-max_finite."""
    _, finite_codes, grid = _grid(fmt)
    a = np.minimum(np.abs(values), fmt.max_finite)
    idx = np.clip(np.searchsorted(grid, a), 1, len(grid) - 1)
    lo = grid[idx - 1]
    hi = grid[idx]
    d_lo = a - lo
    d_hi = hi - a
    # On an exact midpoint the code with even mantissa wins; codes of adjacent
    # magnitudes are consecutive integers, so that is the even code number.
    take_hi = (d_hi < d_lo) | ((d_hi == d_lo) & (finite_codes[idx] % 2 == 0))
    codes = np.where(take_hi, finite_codes[idx], finite_codes[idx - 1])
    return np.where(np.signbit(values), codes + 128, codes).astype(np.uint8)


@dataclass(frozen=True, eq=False)
class Fp8Tensor:
    """Quantized 8-bit codes plus one positive per-tensor scale."""

    codes: np.ndarray
    scale: float
    format: Fp8Format

    def __post_init__(self) -> None:
        arr = np.array(self.codes, dtype=np.uint8, order="C", copy=True)
        if arr.ndim != 2 or arr.shape[0] < 1 or arr.shape[1] < 1:
            raise ShapeMismatchError(f"codes must form a non-empty 2-D array, got {arr.shape}")
        if not (np.isfinite(self.scale) and self.scale > 0):
            raise ValueError(f"scale must be positive and finite, got {self.scale}")
        _, finite_codes, _ = _grid(self.format)
        valid = np.zeros(128, dtype=bool)
        valid[finite_codes] = True
        if not np.all(valid[arr & 0x7F]):
            raise ValueError("codes contain reserved NaN/Inf bit patterns")
        arr.setflags(write=False)
        object.__setattr__(self, "codes", arr)

    @property
    def rows(self) -> int:
        return self.codes.shape[0]

    @property
    def cols(self) -> int:
        return self.codes.shape[1]


def quantize(a: DenseMatrix, fmt: Fp8Format = E4M3) -> Fp8Tensor:
    """Per-tensor absmax quantization: ``scale = absmax / max_finite``.

    An all-zero matrix gets scale 1. Elements are divided by the scale and
    rounded to the nearest grid point (ties to even), saturating at the
    format's largest finite magnitude.
    """
    if not np.all(np.isfinite(a.data)):
        raise NonFiniteError("cannot quantize a matrix with NaN or infinite entries")
    absmax = float(np.max(np.abs(a.data)))
    scale = absmax / fmt.max_finite if absmax > 0 else 1.0
    return Fp8Tensor(encode_values(a.data / scale, fmt), scale, fmt)


def _decode_array(q: Fp8Tensor) -> np.ndarray:
    values, _, _ = _grid(q.format)
    signs = np.where(q.codes >= 128, -1.0, 1.0)
    return signs * values[q.codes & 0x7F]


def dequantize(q: Fp8Tensor) -> DenseMatrix:
    """Decode every code and multiply by the tensor scale; tagged fp8."""
    return DenseMatrix(_decode_array(q) * q.scale, Precision.FP8)


def _round_fp16_product(x: np.ndarray) -> np.ndarray:
    # Round-to-nearest-even onto an 11-bit significand. The exponent is left
    # unbounded: products of two raw fp8 codes can exceed the fp16 range
    # (448^2 > 65504 for E4M3) before the tensor scales are applied, and
    # hardware pipelines apply scales in wider registers, so the emulation
    # models fp16 precision loss, not fp16 range, for these intermediates.
    mant, exp = np.frexp(x)
    return np.ldexp(np.rint(np.ldexp(mant, _FP16_SIG_BITS)), exp - _FP16_SIG_BITS)


def _round_fp32(x: np.ndarray) -> np.ndarray:
    return x.astype(np.float32).astype(np.float64)


def fp8_gemm(qa: Fp8Tensor, qb: Fp8Tensor) -> DenseMatrix:
    """Multiply two quantized tensors on the emulated mixed-precision path.

    Raw code values are decoded, each scalar product is rounded to the fp16
    grid, partial sums are accumulated on the fp32 grid (the running sum is
    rounded to fp32 after every addition, k ascending), and the result is
    scaled by both tensor scales and rounded once more to fp32 so the output
    tag is honest.
    """
    if qa.cols != qb.rows:
        raise ShapeMismatchError(
            f"cannot multiply {qa.rows}x{qa.cols} by {qb.rows}x{qb.cols}: inner dimensions differ"
        )
    lhs = _decode_array(qa)
    rhs = _decode_array(qb)
    acc = np.zeros((qa.rows, qb.cols))
    for k in range(qa.cols):
        acc = _round_fp32(acc + _round_fp16_product(lhs[:, k : k + 1] * rhs[k : k + 1, :]))
    return DenseMatrix(_round_fp32(acc * qa.scale * qb.scale), Precision.FP32)


def resolve_precision(requested: Precision) -> Precision:
    """Fallback policy hook for pipeline entry points.

    On hardware the request chain fp8 -> fp16 -> fp32 degrades to the best
    supported precision. The software emulation supports every grid, so this
    is a documented pass-through kept so ports with real hardware probes have
    a single seam to replace.
    """
    if requested is Precision.FP64:
        raise ValueError("precision requests cover the reduced grids: fp8, fp16, fp32")
    return requested
