from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Dict, List, Tuple

import numpy as np
from sklearn.cluster import kmeans_plusplus

from spgcc.config import KMEANS_MAX_ITER
from spgcc.engine import ops
from spgcc.engine.tensor import Tensor
from spgcc.errors import ParameterError, ShapeError

logger = logging.getLogger("spgcc.kmeans")


@dataclass
class KMeansResult:
    assignments: np.ndarray
    centers: np.ndarray
    distances: np.ndarray
    objective_history: List[float] = field(default_factory=list)

    @property
    def iterations(self) -> int:
        return len(self.objective_history)

    @property
    def objective(self) -> float:
        return self.objective_history[-1]


def squared_distances(points: np.ndarray, centers: np.ndarray) -> np.ndarray:
    """M×K squared Euclidean distances, one center at a time to bound memory."""
    out = np.empty((points.shape[0], centers.shape[0]))
    for k, center in enumerate(centers):
        diff = points - center
        out[:, k] = np.einsum("ij,ij->i", diff, diff)
    return out


def _update_centers(points: np.ndarray, assignments: np.ndarray, centers: np.ndarray,
                    nearest: np.ndarray) -> np.ndarray:
    num_clusters = centers.shape[0]
    counts = np.bincount(assignments, minlength=num_clusters)
    updated = centers.copy()
    for k in np.flatnonzero(counts):
        updated[k] = points[assignments == k].mean(axis=0)

    empty = np.flatnonzero(counts == 0)
    if len(empty):
        # farthest points first, lowest index on ties
        far = np.argsort(-nearest, kind="stable")
        for k, index in zip(empty, far):
            updated[k] = points[index]
        logger.debug(f"k-means: reseeded {len(empty)} empty cluster(s)")
    return updated


def kmeans(points: np.ndarray, num_clusters: int, seed: int, max_iter: int = KMEANS_MAX_ITER) -> KMeansResult:
    """k-means++ seeding, then Lloyd iterations until the assignment stops changing."""
    if points.ndim != 2:
        raise ShapeError(f"kmeans expects an M×D matrix, got shape {points.shape}")
    if num_clusters < 1 or points.shape[0] < num_clusters:
        raise ParameterError(f"kmeans needs 1 ≤ K ≤ M, got K={num_clusters}, M={points.shape[0]}")

    centers, _ = kmeans_plusplus(points, num_clusters, random_state=seed % (2 ** 32))
    centers = centers.astype(np.float64)
    history: List[float] = []
    previous = None
    for _ in range(max_iter):
        distances = squared_distances(points, centers)
        assignments = np.argmin(distances, axis=1)
        nearest = distances[np.arange(len(points)), assignments]
        history.append(float(nearest.sum()))
        if previous is not None and np.array_equal(assignments, previous):
            break
        previous = assignments
        centers = _update_centers(points, assignments, centers, nearest)
    else:
        # out of iterations: assignments and distances must match the returned centers
        distances = squared_distances(points, centers)
        assignments = np.argmin(distances, axis=1)
        nearest = distances[np.arange(len(points)), assignments]
        history.append(float(nearest.sum()))

    logger.debug(f"k-means K={num_clusters}: {len(history)} iterations, objective {history[-1]:.6f}")
    return KMeansResult(assignments=assignments, centers=centers, distances=nearest, objective_history=history)


def confidence_count(num_points: int, fraction: float) -> int:
    return max(1, int(np.floor(fraction * num_points + 0.5)))


def confidence_select(points: np.ndarray, assignments: np.ndarray, centers: np.ndarray,
                      fraction: float) -> Tuple[np.ndarray, Dict[int, np.ndarray]]:
    """
    d_i = squared distance to the nearest center; the round(λM) smallest d_i are kept
    (lower index first on ties) and grouped by assigned class.
    """
    if not 0.0 < fraction <= 1.0:
        raise ParameterError(f"high-confidence fraction λ must lie in (0, 1], got {fraction}")
    distances = squared_distances(points, centers).min(axis=1)
    kept = np.sort(np.argsort(distances, kind="stable")[: confidence_count(len(points), fraction)])
    confident = {k: kept[assignments[kept] == k] for k in range(centers.shape[0])}
    return distances, confident


def recompute_centers(z1: Tensor, z2: Tensor, confident: Dict[int, np.ndarray]) -> Tuple[Tensor, Tensor, List[int]]:
    """
    Per-class means of the high-confidence rows in each view, L2-normalized.
    Classes with no members, or whose mean vanishes in either view, are left out.
    """
    valid: List[int] = []
    for k in sorted(confident):
        members = confident[k]
        if len(members) == 0:
            logger.info(f"class {k}: no high-confidence members, excluded from center contrast")
            continue
        if any(np.allclose(z.data[members].mean(axis=0), 0.0, rtol=0.0, atol=1e-12) for z in (z1, z2)):
            logger.info(f"class {k}: high-confidence mean is the zero vector, excluded from center contrast")
            continue
        valid.append(k)

    averaging = np.zeros((len(valid), z1.shape[0]))
    for row, k in enumerate(valid):
        averaging[row, confident[k]] = 1.0 / len(confident[k])
    weights = ops.constant(averaging)
    c1 = ops.l2_normalize_rows(ops.matmul(weights, z1))
    c2 = ops.l2_normalize_rows(ops.matmul(weights, z2))
    return c1, c2, valid
