"""Superpixel segmentation backends and the map matrices derived from them."""

from typing import Dict, Type

from spgcc.errors import ParameterError
from spgcc.segmentation.base import (
    Segmenter,
    build_segmentation,
    grid_shape,
    load_segmentation,
    map_matrix,
    save_segmentation,
    sp_segmentation_accuracy,
)
from spgcc.segmentation.grid import GridSegmenter
from spgcc.segmentation.slic import SlicSegmenter, enforce_connectivity

SEGMENTERS: Dict[str, Type[Segmenter]] = {
    SlicSegmenter.name: SlicSegmenter,
    GridSegmenter.name: GridSegmenter,
}


def make_segmenter(name: str, compactness: float = 1.0) -> Segmenter:
    if name not in SEGMENTERS:
        raise ParameterError(f"unknown segmenter '{name}', choose one of {sorted(SEGMENTERS)}")
    if name == SlicSegmenter.name:
        return SlicSegmenter(compactness=compactness)
    return SEGMENTERS[name]()


__all__ = [
    "GridSegmenter",
    "SEGMENTERS",
    "Segmenter",
    "SlicSegmenter",
    "build_segmentation",
    "enforce_connectivity",
    "grid_shape",
    "load_segmentation",
    "make_segmenter",
    "map_matrix",
    "save_segmentation",
    "sp_segmentation_accuracy",
]
