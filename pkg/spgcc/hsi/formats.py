"""
Little-endian binary codecs for every artifact the pipeline exchanges.

    HSIF  cube        magic, u32 H, W, C, H·W·C f32 (pixel-major)
    HSIL  labels      magic, u32 H, W, H·W u32
    SPGF  features    magic, u32 N, d, N·d f32 (row-major)
    SPGW  checkpoint  magic, u32 count, then per tensor: u32 rank, rank × u32 dims, f64 values

Loaders validate the whole file before building any object.
"""

from __future__ import annotations

import logging
from pathlib import Path
from typing import List, Optional, Sequence, Tuple

import numpy as np

from spgcc.config import CHECKPOINT_MAGIC, FEATURE_MAGIC, HSI_MAGIC, LABEL_MAGIC
from spgcc.errors import (
    BadMagicError,
    DimensionMismatchError,
    FormatError,
    LabelRangeError,
    TruncatedPayloadError,
)
from spgcc.models import FeatureMatrix, HsiCube, LabelRaster

logger = logging.getLogger("spgcc.hsi")

_U32 = np.dtype("<u4")
_F32 = np.dtype("<f4")
_F64 = np.dtype("<f8")


# ---------------------------------------------------------------------------
# Shared header handling
# ---------------------------------------------------------------------------

def _read(path: Path, magic: bytes) -> bytes:
    raw = Path(path).read_bytes()
    if len(raw) < len(magic):
        raise TruncatedPayloadError(f"{path}: truncated payload (file shorter than the magic)")
    if raw[: len(magic)] != magic:
        raise BadMagicError(f"{path}: bad magic {raw[:len(magic)]!r}, expected {magic!r}")
    return raw


def _header(raw: bytes, path: Path, count: int, offset: int = 4) -> Tuple[Tuple[int, ...], int]:
    end = offset + count * _U32.itemsize
    if len(raw) < end:
        raise TruncatedPayloadError(f"{path}: truncated payload (incomplete header)")
    dims = tuple(int(v) for v in np.frombuffer(raw, dtype=_U32, count=count, offset=offset))
    return dims, end


def _payload(raw: bytes, path: Path, offset: int, count: int, dtype: np.dtype) -> np.ndarray:
    expected = offset + count * dtype.itemsize
    if len(raw) < expected:
        raise TruncatedPayloadError(f"{path}: truncated payload ({len(raw)} bytes, header declares {expected})")
    if len(raw) > expected:
        raise DimensionMismatchError(f"{path}: {len(raw) - expected} bytes beyond the declared dimensions")
    return np.frombuffer(raw, dtype=dtype, count=count, offset=offset)


def _require_positive(path: Path, names: Sequence[str], dims: Sequence[int]) -> None:
    for name, value in zip(names, dims):
        if value < 1:
            raise DimensionMismatchError(f"{path}: declared {name} = {value}, must be at least 1")


def _write(path: Path, magic: bytes, dims: Sequence[int], payload: np.ndarray) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "wb") as f:
        f.write(magic)
        f.write(np.asarray(dims, dtype=_U32).tobytes())
        f.write(np.ascontiguousarray(payload).tobytes())


# ---------------------------------------------------------------------------
# Cubes
# ---------------------------------------------------------------------------

def save_hsi(path: Path, cube: HsiCube) -> None:
    _write(path, HSI_MAGIC, cube.values.shape, cube.values.astype(_F32))


def load_hsi(path: Path) -> HsiCube:
    raw = _read(path, HSI_MAGIC)
    (height, width, bands), offset = _header(raw, path, 3)
    _require_positive(path, ("H", "W", "C"), (height, width, bands))
    values = _payload(raw, path, offset, height * width * bands, _F32)
    if not np.all(np.isfinite(values)):
        raise FormatError(f"{path}: cube contains non-finite values")
    return HsiCube(values.reshape(height, width, bands).astype(np.float64))


# ---------------------------------------------------------------------------
# Label rasters
# ---------------------------------------------------------------------------

def save_labels(path: Path, raster: LabelRaster) -> None:
    labels = np.asarray(raster.labels)
    if labels.ndim != 2:
        raise DimensionMismatchError(f"{path}: label raster must be 2-D, got shape {labels.shape}")
    if labels.size and labels.min() < 0:
        raise LabelRangeError(f"{path}: negative class id {labels.min()}")
    _write(path, LABEL_MAGIC, labels.shape, labels.astype(_U32))


def load_labels(
    path: Path,
    num_classes: Optional[int] = None,
    expected_shape: Optional[Tuple[int, int]] = None,
) -> LabelRaster:
    """Read an HSIL raster; `num_classes` bounds the ids, `expected_shape` ties it to its cube."""
    raw = _read(path, LABEL_MAGIC)
    (height, width), offset = _header(raw, path, 2)
    _require_positive(path, ("H", "W"), (height, width))
    labels = _payload(raw, path, offset, height * width, _U32).reshape(height, width).astype(np.int64)
    if expected_shape is not None and tuple(expected_shape) != (height, width):
        raise DimensionMismatchError(
            f"{path}: label raster is {height}×{width}, paired cube is {expected_shape[0]}×{expected_shape[1]}"
        )
    if num_classes is not None and labels.max(initial=0) > num_classes:
        raise LabelRangeError(f"{path}: class id {labels.max()} exceeds declared K = {num_classes}")
    return LabelRaster(labels=labels, num_classes=num_classes)


# ---------------------------------------------------------------------------
# Feature caches
# ---------------------------------------------------------------------------

def save_features(path: Path, features: FeatureMatrix) -> None:
    _write(path, FEATURE_MAGIC, features.values.shape, features.values.astype(_F32))


def load_features(path: Path, expected_rows: Optional[int] = None) -> FeatureMatrix:
    raw = _read(path, FEATURE_MAGIC)
    (rows, dim), offset = _header(raw, path, 2)
    _require_positive(path, ("N", "d"), (rows, dim))
    values = _payload(raw, path, offset, rows * dim, _F32).reshape(rows, dim).astype(np.float64)
    if expected_rows is not None and rows != expected_rows:
        raise DimensionMismatchError(f"{path}: {rows} feature rows, paired data has {expected_rows}")
    return FeatureMatrix(values)


# ---------------------------------------------------------------------------
# Checkpoints
# ---------------------------------------------------------------------------

def save_checkpoint(path: Path, tensors: Sequence[np.ndarray]) -> None:
    """
    Write tensors in order. Each tensor is headed by its rank as u32, so the per-tensor
    dims that follow can be read back without knowing the layer layout.
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "wb") as f:
        f.write(CHECKPOINT_MAGIC)
        f.write(np.asarray([len(tensors)], dtype=_U32).tobytes())
        for array in tensors:
            array = np.asarray(array)
            f.write(np.asarray([array.ndim, *array.shape], dtype=_U32).tobytes())
            f.write(np.ascontiguousarray(array, dtype=_F64).tobytes())


def load_checkpoint(path: Path) -> List[np.ndarray]:
    raw = _read(path, CHECKPOINT_MAGIC)
    (count,), offset = _header(raw, path, 1)
    tensors: List[np.ndarray] = []
    for _ in range(count):
        (rank,), offset = _header(raw, path, 1, offset)
        dims, offset = _header(raw, path, rank, offset)
        size = int(np.prod(dims)) if dims else 1
        end = offset + size * _F64.itemsize
        if len(raw) < end:
            raise TruncatedPayloadError(f"{path}: truncated payload in tensor {len(tensors)}")
        tensors.append(np.frombuffer(raw, dtype=_F64, count=size, offset=offset).reshape(dims).copy())
        offset = end
    if len(raw) != offset:
        raise DimensionMismatchError(f"{path}: {len(raw) - offset} bytes beyond the declared tensors")
    return tensors
