"""
Superpixel graph: mean-pooled node features, binary spatial adjacency and the
renormalized propagation matrix D^-1/2 (A + I) D^-1/2 consumed by the GCN.
"""

from __future__ import annotations

import logging
from pathlib import Path
from typing import List, Tuple

import numpy as np
import pandas as pd
from scipy import sparse

from spgcc.errors import DimensionMismatchError, ParameterError, ShapeError
from spgcc.models import Segmentation, SuperpixelGraph

logger = logging.getLogger("spgcc.graph")


def superpixel_features(normalized_map: sparse.sparray, pixel_features: np.ndarray) -> np.ndarray:
    """Row i is the mean pixel feature of superpixel i (normalized map times pixel features)."""
    if normalized_map.shape[1] != pixel_features.shape[0]:
        raise ShapeError(
            f"superpixel_features: map axis 1 has {normalized_map.shape[1]} pixels, "
            f"feature axis 0 has {pixel_features.shape[0]} rows"
        )
    return np.asarray(normalized_map @ pixel_features)


def _neighbour_pairs(labels: np.ndarray, connectivity: int) -> List[Tuple[np.ndarray, np.ndarray]]:
    pairs = [
        (labels[:, :-1], labels[:, 1:]),
        (labels[:-1, :], labels[1:, :]),
    ]
    if connectivity == 8:
        pairs += [
            (labels[:-1, :-1], labels[1:, 1:]),
            (labels[:-1, 1:], labels[1:, :-1]),
        ]
    return pairs


def build_adjacency(seg: Segmentation, connectivity: int = 8) -> sparse.csr_array:
    """a_mn = a_nm = 1 iff a pixel of m touches a pixel of n (m ≠ n) under the given pixel connectivity."""
    if connectivity not in (4, 8):
        raise ParameterError(f"pixel connectivity must be 4 or 8, got {connectivity}")
    rows, cols = [], []
    for a, b in _neighbour_pairs(seg.labels, connectivity):
        border = a != b
        rows.append(a[border])
        cols.append(b[border])
    src = np.concatenate(rows) if rows else np.empty(0, dtype=np.int64)
    dst = np.concatenate(cols) if cols else np.empty(0, dtype=np.int64)

    m = seg.num_superpixels
    adjacency = sparse.coo_array(
        (np.ones(2 * len(src)), (np.concatenate([src, dst]), np.concatenate([dst, src]))),
        shape=(m, m),
    ).tocsr()
    adjacency.sum_duplicates()
    adjacency.data[:] = 1.0
    adjacency.sort_indices()
    return adjacency


def normalize_adjacency(adjacency: sparse.sparray) -> Tuple[sparse.csr_array, np.ndarray]:
    """Return (P, degrees) where P = D^-1/2 (A + I) D^-1/2 and D holds the degrees of A + I."""
    m = adjacency.shape[0]
    if adjacency.shape != (m, m):
        raise ShapeError(f"normalize_adjacency: adjacency must be square, got {adjacency.shape}")
    looped = sparse.csr_array(adjacency + sparse.eye_array(m, format="csr"))
    degrees = np.asarray(looped.sum(axis=1)).reshape(-1)
    scale = sparse.diags_array(1.0 / np.sqrt(degrees))
    propagation = sparse.csr_array(scale @ looped @ scale)
    propagation.sort_indices()
    return propagation, degrees


def build_graph(seg: Segmentation, features: np.ndarray, connectivity: int = 8) -> SuperpixelGraph:
    if features.shape[0] != seg.num_superpixels:
        raise ShapeError(
            f"build_graph: feature axis 0 has {features.shape[0]} rows, segmentation has {seg.num_superpixels} superpixels"
        )
    adjacency = build_adjacency(seg, connectivity)
    propagation, degrees = normalize_adjacency(adjacency)
    logger.info(f"superpixel graph: {seg.num_superpixels} nodes, {adjacency.nnz // 2} edges ({connectivity}-connectivity)")
    return SuperpixelGraph(adjacency=adjacency, propagation=propagation, degrees=degrees, features=features)


# ---------------------------------------------------------------------------
# Edge-list dump
# ---------------------------------------------------------------------------

def save_edge_list(path: Path, adjacency: sparse.sparray) -> int:
    """Write every undirected edge once as "m n" (m < n), sorted; returns the edge count."""
    upper = sparse.triu(sparse.coo_array(adjacency), k=1).tocoo()
    df = pd.DataFrame({"m": upper.row, "n": upper.col}).sort_values(["m", "n"], kind="stable")
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    df.to_csv(path, sep=" ", header=False, index=False)
    return len(df)


def load_edge_list(path: Path, num_nodes: int) -> sparse.csr_array:
    path = Path(path)
    if not path.read_text().strip():
        edges = np.empty((0, 2), dtype=np.int64)
    else:
        edges = pd.read_csv(path, sep=" ", header=None, names=["m", "n"], dtype=np.int64).to_numpy()
    if edges.size and edges.max() >= num_nodes:
        raise DimensionMismatchError(f"{path}: node id {edges.max()} outside a graph of {num_nodes} nodes")
    src, dst = edges[:, 0], edges[:, 1]
    adjacency = sparse.coo_array(
        (np.ones(2 * len(src)), (np.concatenate([src, dst]), np.concatenate([dst, src]))),
        shape=(num_nodes, num_nodes),
    ).tocsr()
    adjacency.sort_indices()
    return adjacency
