from __future__ import annotations

import logging
import math
from abc import ABC, abstractmethod
from pathlib import Path
from typing import Tuple

import numpy as np
from scipy import sparse

from spgcc.errors import ParameterError, ShapeError
from spgcc.hsi.formats import load_labels, save_labels
from spgcc.models import HsiCube, LabelRaster, Segmentation

logger = logging.getLogger("spgcc.segmentation")


def grid_shape(height: int, width: int, num_superpixels: int) -> Tuple[int, int]:
    """Rows × columns of seed cells whose product is as close to M as the aspect ratio allows."""
    rows = max(1, min(height, round(math.sqrt(num_superpixels * height / width))))
    cols = max(1, min(width, round(num_superpixels / rows)))
    return rows, cols


class Segmenter(ABC):
    """Partition of the image plane into superpixels."""

    name: str = "segmenter"

    @abstractmethod
    def assign(self, cube: HsiCube, num_superpixels: int) -> np.ndarray:
        """Integer raster H×W of (not necessarily consecutive) superpixel ids."""

    def segment(self, cube: HsiCube, num_superpixels: int) -> Segmentation:
        if not 1 <= num_superpixels <= cube.num_pixels:
            raise ParameterError(
                f"number of superpixels M = {num_superpixels} must lie in [1, {cube.num_pixels}]"
            )
        seg = build_segmentation(self.assign(cube, num_superpixels))
        drift = abs(seg.num_superpixels - num_superpixels) / num_superpixels
        logger.info(f"{self.name}: requested M={num_superpixels}, produced M'={seg.num_superpixels} ({100 * drift:.1f}% off)")
        return seg


def build_segmentation(raster: np.ndarray) -> Segmentation:
    """Relabel ids to 0..M−1 in raster order of first appearance and derive members and T, T̃."""
    raster = np.asarray(raster)
    if raster.ndim != 2:
        raise ShapeError(f"segmentation raster must be 2-D, got shape {raster.shape}")
    flat = raster.reshape(-1)
    ids, first, inverse = np.unique(flat, return_index=True, return_inverse=True)
    rank = np.empty(len(ids), dtype=np.int64)
    rank[np.argsort(first, kind="stable")] = np.arange(len(ids))
    labels = rank[inverse.reshape(-1)]

    num = len(ids)
    order = np.argsort(labels, kind="stable")
    counts = np.bincount(labels, minlength=num)
    members = np.split(order, np.cumsum(counts)[:-1])
    t, t_norm = _map_matrices(labels, num)
    return Segmentation(
        labels=labels.reshape(raster.shape),
        num_superpixels=num,
        members=members,
        map_matrix=t,
        normalized_map=t_norm,
    )


def _map_matrices(labels: np.ndarray, num: int) -> Tuple[sparse.csr_array, sparse.csr_array]:
    n = labels.size
    t = sparse.csr_array((np.ones(n), (labels, np.arange(n))), shape=(num, n))
    t.sort_indices()
    counts = np.asarray(t.sum(axis=1)).reshape(-1)
    t_norm = sparse.csr_array(sparse.diags_array(1.0 / counts) @ t)
    t_norm.sort_indices()
    return t, t_norm


def map_matrix(seg: Segmentation) -> Tuple[sparse.csr_array, sparse.csr_array]:
    """(T, T̃): T_ij = 1 iff pixel j lies in superpixel i; T̃ is T with rows summing to 1."""
    return seg.map_matrix, seg.normalized_map


def sp_segmentation_accuracy(seg: Segmentation, labels: LabelRaster) -> float:
    """
    Percentage of labeled pixels that carry their superpixel's dominant class.
    Superpixels without labeled pixels count in neither sum.
    """
    if labels.shape != seg.shape:
        raise ShapeError(f"label raster {labels.shape} does not match segmentation {seg.shape}")
    truth = labels.flat()
    labeled = truth > 0
    if not labeled.any():
        raise ParameterError("segmentation accuracy needs at least one labeled pixel")

    classes = int(truth.max()) + 1
    pairs = seg.labels.reshape(-1)[labeled] * classes + truth[labeled]
    table = np.bincount(pairs, minlength=seg.num_superpixels * classes).reshape(seg.num_superpixels, classes)
    return 100.0 * table.max(axis=1).sum() / table.sum()


def save_segmentation(path: Path, seg: Segmentation) -> None:
    """Stored as an HSIL raster with ids shifted by +1."""
    save_labels(path, LabelRaster(labels=seg.labels + 1))


def load_segmentation(path: Path) -> Segmentation:
    raster = load_labels(path)
    if raster.labels.min() < 1:
        raise ShapeError(f"{path}: segmentation raster contains id 0, expected ids shifted by +1")
    return build_segmentation(raster.labels - 1)
