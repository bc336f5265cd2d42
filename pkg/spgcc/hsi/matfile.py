"""Import of the public benchmark scenes, which are distributed as MATLAB .mat files."""

import logging
from pathlib import Path
from typing import Optional, Tuple

import numpy as np
from scipy.io import loadmat

from spgcc.errors import DimensionMismatchError, FormatError, LabelRangeError
from spgcc.hsi.formats import save_hsi, save_labels
from spgcc.models import HsiCube, LabelRaster

logger = logging.getLogger("spgcc.matfile")


def _variable(path: Path, key: Optional[str], rank: int) -> Tuple[str, np.ndarray]:
    """The named variable, or the only non-metadata variable of the given rank."""
    try:
        contents = loadmat(str(path))
    except (ValueError, OSError) as e:
        raise FormatError(f"{path}: not a readable .mat file ({e})") from e
    arrays = {name: value for name, value in contents.items() if not name.startswith("__")}
    if key is not None:
        if key not in arrays:
            raise FormatError(f"{path}: no variable '{key}' (found {', '.join(sorted(arrays)) or 'none'})")
        return key, np.asarray(arrays[key])
    candidates = [name for name, value in arrays.items() if np.ndim(value) == rank]
    if len(candidates) != 1:
        raise FormatError(
            f"{path}: expected exactly one {rank}-D variable, found {len(candidates)}; pass the variable name"
        )
    return candidates[0], np.asarray(arrays[candidates[0]])


def load_mat_cube(path: Path, key: Optional[str] = None) -> HsiCube:
    name, values = _variable(Path(path), key, rank=3)
    if values.ndim != 3:
        raise DimensionMismatchError(f"{path}: variable '{name}' has shape {values.shape}, expected H×W×C")
    logger.info(f"Read cube '{name}' {values.shape} from {path}")
    return HsiCube(values.astype(np.float64))


def load_mat_labels(path: Path, key: Optional[str] = None) -> LabelRaster:
    name, values = _variable(Path(path), key, rank=2)
    if values.ndim != 2:
        raise DimensionMismatchError(f"{path}: variable '{name}' has shape {values.shape}, expected H×W")
    if values.min(initial=0) < 0:
        raise LabelRangeError(f"{path}: variable '{name}' holds negative class ids")
    labels = values.astype(np.int64)
    logger.info(f"Read labels '{name}' {labels.shape} from {path}, {int(labels.max(initial=0))} classes")
    return LabelRaster(labels=labels, num_classes=int(labels.max(initial=0)))


def import_mat(
    cube_mat: Path,
    cube_out: Path,
    labels_mat: Optional[Path] = None,
    labels_out: Optional[Path] = None,
    cube_key: Optional[str] = None,
    labels_key: Optional[str] = None,
) -> Tuple[HsiCube, Optional[LabelRaster]]:
    """Convert a .mat cube (and optionally its ground truth) to HSIF / HSIL files."""
    cube = load_mat_cube(cube_mat, cube_key)
    labels = None
    if labels_mat is not None:
        labels = load_mat_labels(labels_mat, labels_key)
        if labels.shape != cube.values.shape[:2]:
            raise DimensionMismatchError(f"labels are {labels.shape}, cube is {cube.values.shape[:2]}")
    save_hsi(cube_out, cube)
    if labels is not None and labels_out is not None:
        save_labels(labels_out, labels)
    return cube, labels
