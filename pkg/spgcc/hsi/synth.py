"""Blocky synthetic scenes with known classes, the desk-scale verification substrate."""

from __future__ import annotations

import logging
from typing import Tuple

import numpy as np

from spgcc.errors import ParameterError
from spgcc.models import HsiCube, LabelRaster
from spgcc.utils import make_rng

logger = logging.getLogger("spgcc.hsi")

MAX_SPECTRA_ATTEMPTS = 1000
MAX_SPECTRA_COSINE = 0.9


def class_spectra(num_classes: int, bands: int, rng: np.random.Generator) -> np.ndarray:
    """Random unit spectra whose pairwise cosine similarity stays below MAX_SPECTRA_COSINE."""
    for attempt in range(MAX_SPECTRA_ATTEMPTS):
        spectra = rng.normal(size=(num_classes, bands))
        spectra /= np.linalg.norm(spectra, axis=1, keepdims=True)
        cosine = spectra @ spectra.T
        np.fill_diagonal(cosine, -1.0)
        if num_classes == 1 or cosine.max() < MAX_SPECTRA_COSINE:
            return spectra
    raise ParameterError(
        f"could not draw {num_classes} spectra in {bands} bands with cosine < {MAX_SPECTRA_COSINE}"
    )


def generate_synthetic(
    height: int,
    width: int,
    bands: int,
    num_classes: int,
    noise: float,
    seed: int,
    block_size: int,
) -> Tuple[HsiCube, LabelRaster]:
    """Tile the plane with block_size squares, give each a class, add Gaussian noise."""
    if min(height, width, bands, num_classes, block_size) < 1:
        raise ParameterError("synthetic scene dimensions, class count and block size must be at least 1")
    if noise < 0:
        raise ParameterError(f"noise level must be non-negative, got {noise}")

    blocks_y = -(-height // block_size)
    blocks_x = -(-width // block_size)
    if blocks_y * blocks_x < num_classes:
        raise ParameterError(
            f"{blocks_y * blocks_x} blocks of {block_size}px cannot host {num_classes} classes"
        )

    rng = make_rng(seed)
    spectra = class_spectra(num_classes, bands, rng)
    block_classes = rng.permutation(np.arange(blocks_y * blocks_x) % num_classes).reshape(blocks_y, blocks_x)

    rows = np.arange(height) // block_size
    cols = np.arange(width) // block_size
    labels = block_classes[rows[:, None], cols[None, :]] + 1

    values = spectra[labels - 1] + noise * rng.normal(size=(height, width, bands))
    logger.info(f"Synthetic scene {height}x{width}x{bands}, K={num_classes}, noise={noise}, seed={seed}")
    return HsiCube(values), LabelRaster(labels=labels, num_classes=num_classes)
