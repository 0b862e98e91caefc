"""Binary containers for matrices (LRGM) and factor bundles (LRFB).

LRGM layout, all integers little-endian::

    bytes 0-3   magic "LRGM"
    bytes 4-5   version, u16 (currently 1)
    bytes 6-13  rows, u64
    bytes 14-21 cols, u64
    byte  22    element precision tag, u8 (fp64=0, fp32=1, fp16=2, fp8=3)
    ...         rows*cols little-endian IEEE-754 float64, row-major
    [+8 bytes]  trailing float64 quantization scale, present iff tag is fp8

fp8 payloads store the *dequantized* values (code value times scale); the
trailing scale makes the original codes recoverable by re-encoding
``value / scale`` on the format's grid.

LRFB layout::

    bytes 0-3   magic "LRFB"
    bytes 4-5   version, u16 (currently 1)
    bytes 6-13  rank, u64
    ...         three LRGM containers back to back: U (m x r), s (1 x r), Vt (r x n)
"""

from __future__ import annotations

import struct
from pathlib import Path
from typing import BinaryIO, NamedTuple

import numpy as np

from .decomposition import SvdFactors
from .errors import FileFormatError
from .matrices import DenseMatrix, Precision

__all__ = [
    "MATRIX_MAGIC",
    "FACTORS_MAGIC",
    "FORMAT_VERSION",
    "MatrixFile",
    "write_matrix",
    "read_matrix",
    "write_factors",
    "read_factors",
    "sniff_format",
]

MATRIX_MAGIC = b"LRGM"
FACTORS_MAGIC = b"LRFB"
FORMAT_VERSION = 1

_HEADER = struct.Struct("<4sHQQB")
_BUNDLE_HEADER = struct.Struct("<4sHQ")
_SCALE = struct.Struct("<d")

_TAG_TO_CODE = {
    Precision.FP64: 0,
    Precision.FP32: 1,
    Precision.FP16: 2,
    Precision.FP8: 3,
}
_CODE_TO_TAG = {v: k for k, v in _TAG_TO_CODE.items()}


class MatrixFile(NamedTuple):
    """A loaded matrix plus its quantization scale (None unless tagged fp8)."""

    matrix: DenseMatrix
    scale: float | None


def _write_matrix_stream(handle: BinaryIO, matrix: DenseMatrix, scale: float | None) -> None:
    if matrix.precision is Precision.FP8:
        if scale is None:
            raise FileFormatError("fp8-tagged matrices need a quantization scale")
    elif scale is not None:
        raise FileFormatError(f"{matrix.precision.value}-tagged matrices carry no scale")
    handle.write(
        _HEADER.pack(
            MATRIX_MAGIC,
            FORMAT_VERSION,
            matrix.rows,
            matrix.cols,
            _TAG_TO_CODE[matrix.precision],
        )
    )
    handle.write(np.ascontiguousarray(matrix.data, dtype="<f8").tobytes())
    if scale is not None:
        handle.write(_SCALE.pack(scale))


def _read_exact(handle: BinaryIO, count: int, what: str, source: str) -> bytes:
    data = handle.read(count)
    if len(data) != count:
        raise FileFormatError(f"{source}: truncated while reading {what}")
    return data


def _read_matrix_stream(handle: BinaryIO, source: str) -> MatrixFile:
    magic, version, rows, cols, tag_code = _HEADER.unpack(
        _read_exact(handle, _HEADER.size, "matrix header", source)
    )
    if magic != MATRIX_MAGIC:
        raise FileFormatError(f"{source}: bad magic {magic!r}, expected {MATRIX_MAGIC!r}")
    if version != FORMAT_VERSION:
        raise FileFormatError(f"{source}: unsupported version {version}")
    if rows < 1 or cols < 1:
        raise FileFormatError(f"{source}: invalid dimensions {rows}x{cols}")
    if tag_code not in _CODE_TO_TAG:
        raise FileFormatError(f"{source}: unknown precision tag {tag_code}")
    tag = _CODE_TO_TAG[tag_code]
    payload = _read_exact(handle, rows * cols * 8, f"{rows}x{cols} payload", source)
    data = np.frombuffer(payload, dtype="<f8").astype(np.float64).reshape(rows, cols)
    scale = None
    if tag is Precision.FP8:
        (scale,) = _SCALE.unpack(_read_exact(handle, _SCALE.size, "fp8 scale", source))
        if not (np.isfinite(scale) and scale > 0):
            raise FileFormatError(f"{source}: fp8 scale must be positive and finite, got {scale}")
    try:
        matrix = DenseMatrix(data, tag)
    except ValueError as exc:
        raise FileFormatError(f"{source}: {exc}") from exc
    return MatrixFile(matrix, scale)


def write_matrix(path: str | Path, matrix: DenseMatrix, scale: float | None = None) -> None:
    """Write one LRGM container. ``scale`` is required iff the tag is fp8."""
    with Path(path).open("wb") as handle:
        _write_matrix_stream(handle, matrix, scale)


def read_matrix(path: str | Path) -> MatrixFile:
    """Read one LRGM container."""
    path = Path(path)
    with path.open("rb") as handle:
        loaded = _read_matrix_stream(handle, str(path))
        if handle.read(1):
            raise FileFormatError(f"{path}: trailing bytes after matrix payload")
    return loaded


def write_factors(path: str | Path, factors: SvdFactors) -> None:
    """Write one LRFB bundle: header plus U, s (as a 1 x r matrix) and Vt."""
    with Path(path).open("wb") as handle:
        handle.write(_BUNDLE_HEADER.pack(FACTORS_MAGIC, FORMAT_VERSION, factors.rank))
        _write_matrix_stream(handle, factors.u, None)
        _write_matrix_stream(handle, DenseMatrix(factors.s[None, :]), None)
        _write_matrix_stream(handle, factors.vt, None)


def read_factors(path: str | Path) -> SvdFactors:
    """Read one LRFB bundle and revalidate the factor invariants."""
    path = Path(path)
    with path.open("rb") as handle:
        magic, version, rank = _BUNDLE_HEADER.unpack(
            _read_exact(handle, _BUNDLE_HEADER.size, "bundle header", str(path))
        )
        if magic != FACTORS_MAGIC:
            raise FileFormatError(f"{path}: bad magic {magic!r}, expected {FACTORS_MAGIC!r}")
        if version != FORMAT_VERSION:
            raise FileFormatError(f"{path}: unsupported version {version}")
        u = _read_matrix_stream(handle, str(path)).matrix
        s = _read_matrix_stream(handle, str(path)).matrix
        vt = _read_matrix_stream(handle, str(path)).matrix
        if handle.read(1):
            raise FileFormatError(f"{path}: trailing bytes after factor payload")
    if s.rows != 1 or s.cols != rank or u.cols != rank or vt.rows != rank:
        raise FileFormatError(
            f"{path}: header rank {rank} does not match factor shapes "
            f"u={u.rows}x{u.cols} s={s.rows}x{s.cols} vt={vt.rows}x{vt.cols}"
        )
    try:
        return SvdFactors(u, s.data[0], vt)
    except ValueError as exc:
        raise FileFormatError(f"{path}: invalid factors: {exc}") from exc


def sniff_format(path: str | Path) -> bytes:
    """Return the leading magic bytes of a container file."""
    with Path(path).open("rb") as handle:
        magic = handle.read(4)
    if magic not in (MATRIX_MAGIC, FACTORS_MAGIC):
        raise FileFormatError(f"{path}: unrecognized container (magic {magic!r})")
    return magic
