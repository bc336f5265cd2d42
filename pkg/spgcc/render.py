"""Clustering maps as binary PPM images with a fixed HSV palette."""

from __future__ import annotations

from pathlib import Path

import numpy as np
from PIL import Image, ImageColor

from spgcc.config import MAP_SATURATION, MAP_VALUE
from spgcc.errors import LabelRangeError, ParameterError
from spgcc.models import LabelRaster


def palette(num_classes: int) -> np.ndarray:
    """Row 0 is black; row k has hue 360·(k−1)/K at S = 75%, V = 95%."""
    if num_classes < 1:
        raise ParameterError(f"palette needs K ≥ 1, got {num_classes}")
    colors = np.zeros((num_classes + 1, 3), dtype=np.uint8)
    for k in range(1, num_classes + 1):
        hue = 360.0 * (k - 1) / num_classes
        colors[k] = ImageColor.getrgb(f"hsv({hue:.6f},{MAP_SATURATION}%,{MAP_VALUE}%)")
    return colors


def render_map(raster: LabelRaster, num_classes: int) -> Image.Image:
    labels = raster.labels
    if labels.max(initial=0) > num_classes:
        raise LabelRangeError(f"label id {labels.max()} exceeds K = {num_classes}")
    return Image.fromarray(palette(num_classes)[labels])


def save_map(path: Path, raster: LabelRaster, num_classes: int) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    render_map(raster, num_classes).save(path, format="PPM")
    return path
