"""Band reduction by PCA on the band covariance, solved with cyclic Jacobi rotations."""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Tuple

import numpy as np

from spgcc.config import JACOBI_MAX_SWEEPS, JACOBI_THETA_LIMIT, JACOBI_TOLERANCE
from spgcc.errors import ParameterError
from spgcc.models import HsiCube

logger = logging.getLogger("spgcc.hsi")


@dataclass
class PcaModel:
    mean: np.ndarray
    components: np.ndarray
    eigenvalues: np.ndarray

    def transform(self, spectra: np.ndarray) -> np.ndarray:
        return (spectra - self.mean) @ self.components


def jacobi_eigh(
    matrix: np.ndarray,
    tolerance: float = JACOBI_TOLERANCE,
    max_sweeps: int = JACOBI_MAX_SWEEPS,
) -> Tuple[np.ndarray, np.ndarray]:
    """
    Eigen-decomposition of a symmetric matrix by cyclic Jacobi sweeps.

    Stops once the off-diagonal Frobenius norm is below `tolerance` times the matrix
    norm. Returns (eigenvalues, eigenvectors as columns) in the solver's native order.
    """
    a = np.array(matrix, dtype=np.float64, copy=True)
    n = a.shape[0]
    v = np.eye(n)
    scale = max(np.linalg.norm(a), np.finfo(np.float64).tiny)

    for sweep in range(max_sweeps):
        off = np.sqrt(max(np.sum(a * a) - np.sum(np.diag(a) ** 2), 0.0))
        if off <= tolerance * scale:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                if apq == 0.0:
                    continue
                diff = a[q, q] - a[p, p]
                if abs(diff) > JACOBI_THETA_LIMIT * abs(2.0 * apq):
                    # theta = diff / (2·apq) or its square would overflow
                    t = apq / diff
                else:
                    theta = diff / (2.0 * apq)
                    t = (1.0 if theta >= 0 else -1.0) / (abs(theta) + np.sqrt(theta * theta + 1.0))
                c = 1.0 / np.sqrt(t * t + 1.0)
                s = t * c

                col_p, col_q = a[:, p].copy(), a[:, q].copy()
                a[:, p] = c * col_p - s * col_q
                a[:, q] = s * col_p + c * col_q
                row_p, row_q = a[p, :].copy(), a[q, :].copy()
                a[p, :] = c * row_p - s * row_q
                a[q, :] = s * row_p + c * row_q
                vec_p, vec_q = v[:, p].copy(), v[:, q].copy()
                v[:, p] = c * vec_p - s * vec_q
                v[:, q] = s * vec_p + c * vec_q
    else:
        logger.warning(f"Jacobi solver hit {max_sweeps} sweeps before converging")

    return np.diag(a).copy(), v


def fit_pca(spectra: np.ndarray, num_components: int) -> PcaModel:
    """Top-h principal axes of N×C spectra, descending eigenvalue, deterministic signs."""
    bands = spectra.shape[1]
    if not 1 <= num_components <= bands:
        raise ParameterError(f"pca: target bands h = {num_components} must lie in [1, {bands}]")

    mean = spectra.mean(axis=0)
    centered = spectra - mean
    covariance = centered.T @ centered / max(spectra.shape[0] - 1, 1)
    covariance = 0.5 * (covariance + covariance.T)

    eigenvalues, vectors = jacobi_eigh(covariance)
    order = np.argsort(-eigenvalues, kind="stable")
    eigenvalues, vectors = eigenvalues[order], vectors[:, order]

    peaks = np.argmax(np.abs(vectors), axis=0)
    signs = np.where(vectors[peaks, np.arange(bands)] < 0, -1.0, 1.0)
    vectors = vectors * signs

    return PcaModel(mean=mean, components=vectors[:, :num_components], eigenvalues=eigenvalues)


def pca_reduce(cube: HsiCube, num_components: int) -> HsiCube:
    """Project every pixel onto the top-h principal axes (centered, not whitened)."""
    model = fit_pca(cube.spectra(), num_components)
    kept = model.eigenvalues[:num_components].sum() / max(model.eigenvalues.sum(), np.finfo(float).tiny)
    logger.info(f"PCA {cube.bands} -> {num_components} bands keeps {100 * kept:.2f}% of the variance")
    reduced = model.transform(cube.spectra())
    return HsiCube(reduced.reshape(cube.height, cube.width, num_components))
