"""
SLIC-style superpixels: local k-means in joint spectral–spatial space, followed by
connectivity enforcement.
"""

from __future__ import annotations

import logging
import math

import numpy as np
from scipy import ndimage

from spgcc.config import DEFAULT_COMPACTNESS, SLIC_ITERATIONS
from spgcc.models import HsiCube
from spgcc.segmentation.base import Segmenter, grid_shape

logger = logging.getLogger("spgcc.segmentation")

_FOUR_CONNECTED = ndimage.generate_binary_structure(2, 1)


def _gradient_magnitude(values: np.ndarray) -> np.ndarray:
    padded = np.pad(values, ((1, 1), (1, 1), (0, 0)), mode="edge")
    dy = padded[2:, 1:-1] - padded[:-2, 1:-1]
    dx = padded[1:-1, 2:] - padded[1:-1, :-2]
    return np.sum(dy * dy, axis=-1) + np.sum(dx * dx, axis=-1)


def _perturb(seed_y: np.ndarray, seed_x: np.ndarray, gradient: np.ndarray):
    """
    Move each seed to the lowest-gradient pixel of its 3×3 neighbourhood clipped to the image.
    The current seed wins ties, and a pixel already holding another seed is never taken.
    """
    height, width = gradient.shape
    ys, xs = seed_y.copy(), seed_x.copy()
    taken = set(zip(ys.tolist(), xs.tolist()))
    for k in range(len(ys)):
        y0, x0 = int(ys[k]), int(xs[k])
        best_y, best_x, best = y0, x0, gradient[y0, x0]
        for y in range(max(y0 - 1, 0), min(y0 + 2, height)):
            for x in range(max(x0 - 1, 0), min(x0 + 2, width)):
                if gradient[y, x] < best and (y, x) not in taken:
                    best, best_y, best_x = gradient[y, x], y, x
        taken.discard((y0, x0))
        taken.add((best_y, best_x))
        ys[k], xs[k] = best_y, best_x
    return ys, xs


def _contact_labels(mask: np.ndarray, raster: np.ndarray) -> np.ndarray:
    """Labels across every 4-neighbour edge leaving `mask`, one entry per contact."""
    found = [
        raster[:-1, :][mask[1:, :] & ~mask[:-1, :]],
        raster[1:, :][mask[:-1, :] & ~mask[1:, :]],
        raster[:, :-1][mask[:, 1:] & ~mask[:, :-1]],
        raster[:, 1:][mask[:, :-1] & ~mask[:, 1:]],
    ]
    return np.concatenate(found)


def enforce_connectivity(raster: np.ndarray) -> np.ndarray:
    """
    Keep the largest 4-connected component of every superpixel; every orphaned region
    joins the adjacent superpixel it shares the most 4-neighbour contacts with
    (lowest id on ties).
    """
    raster = raster.copy()
    for label, region in enumerate(ndimage.find_objects(raster + 1)):
        if region is None:
            continue
        mask = raster[region] == label
        components, count = ndimage.label(mask, structure=_FOUR_CONNECTED)
        if count <= 1:
            continue
        sizes = np.bincount(components.reshape(-1))[1:]
        keep = int(np.argmax(sizes)) + 1
        view = raster[region]
        view[mask & (components != keep)] = -1

    orphans, count = ndimage.label(raster == -1, structure=_FOUR_CONNECTED)
    if count:
        logger.debug(f"connectivity: merging {count} orphaned fragment(s)")
    for index, region in enumerate(ndimage.find_objects(orphans), start=1):
        grown = tuple(slice(max(s.start - 1, 0), s.stop + 1) for s in region)
        mask = orphans[grown] == index
        contacts = _contact_labels(mask, raster[grown])
        contacts = contacts[contacts >= 0]
        raster[grown][mask] = int(np.argmax(np.bincount(contacts)))
    return raster


class SlicSegmenter(Segmenter):
    """Distance = ‖spectral difference‖₂ + compactness · spatial distance / grid step."""

    name = "slic"

    def __init__(self, compactness: float = DEFAULT_COMPACTNESS, iterations: int = SLIC_ITERATIONS) -> None:
        self.compactness = compactness
        self.iterations = iterations

    def assign(self, cube: HsiCube, num_superpixels: int) -> np.ndarray:
        values = cube.values
        height, width = cube.height, cube.width
        rows, cols = grid_shape(height, width, num_superpixels)
        step = math.sqrt(height * width / (rows * cols))

        grid_y = ((np.arange(rows) + 0.5) * height / rows).astype(np.int64)
        grid_x = ((np.arange(cols) + 0.5) * width / cols).astype(np.int64)
        seed_y = np.repeat(grid_y, cols)
        seed_x = np.tile(grid_x, rows)
        seed_y, seed_x = _perturb(seed_y, seed_x, _gradient_magnitude(values))

        center_pos = np.stack([seed_y, seed_x], axis=1).astype(np.float64)
        center_spec = values[seed_y, seed_x].copy()
        num_centers = len(center_pos)
        reach = int(math.ceil(step))
        yy, xx = np.mgrid[0:height, 0:width]

        labels = np.full((height, width), -1, dtype=np.int64)
        for _ in range(self.iterations):
            best = np.full((height, width), np.inf)
            labels.fill(-1)
            for k in range(num_centers):
                cy, cx = center_pos[k]
                y0, y1 = max(int(cy) - reach, 0), min(int(cy) + reach + 1, height)
                x0, x1 = max(int(cx) - reach, 0), min(int(cx) + reach + 1, width)
                diff = values[y0:y1, x0:x1] - center_spec[k]
                spectral = np.sqrt(np.sum(diff * diff, axis=-1))
                spatial = np.hypot(yy[y0:y1, x0:x1] - cy, xx[y0:y1, x0:x1] - cx) / step
                distance = spectral + self.compactness * spatial
                window = best[y0:y1, x0:x1]
                closer = distance < window
                window[closer] = distance[closer]
                labels[y0:y1, x0:x1][closer] = k

            uncovered = labels < 0
            if uncovered.any():
                labels[uncovered] = self._nearest(values[uncovered], yy[uncovered], xx[uncovered],
                                                  center_spec, center_pos, step)

            flat = labels.reshape(-1)
            counts = np.bincount(flat, minlength=num_centers)
            filled = counts > 0
            for axis, coords in enumerate((yy, xx)):
                sums = np.bincount(flat, weights=coords.reshape(-1), minlength=num_centers)
                center_pos[filled, axis] = sums[filled] / counts[filled]
            spectra = values.reshape(-1, cube.bands)
            for band in range(cube.bands):
                sums = np.bincount(flat, weights=spectra[:, band], minlength=num_centers)
                center_spec[filled, band] = sums[filled] / counts[filled]

        return enforce_connectivity(labels)

    def _nearest(self, spectra, ys, xs, center_spec, center_pos, step) -> np.ndarray:
        best = np.full(len(ys), np.inf)
        chosen = np.zeros(len(ys), dtype=np.int64)
        for k in range(len(center_pos)):
            spectral = np.sqrt(np.sum((spectra - center_spec[k]) ** 2, axis=-1))
            spatial = np.hypot(ys - center_pos[k, 0], xs - center_pos[k, 1]) / step
            distance = spectral + self.compactness * spatial
            closer = distance < best
            best[closer] = distance[closer]
            chosen[closer] = k
        return chosen
