"""
Dual-branch graph convolutional encoder.

Layers 1..L−1 are shared, H ← ReLU(P H W); the last layer runs twice with unshared
weights W^1 and W^2 (model weight augmentation), has no ReLU, and is followed by row
L2 normalization. Superpixel features and sampled-pixel features propagate over the
same P.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import List, Union

import numpy as np
from scipy import sparse

from spgcc.engine import ops
from spgcc.engine.tensor import Tensor, parameter
from spgcc.errors import ParameterError, ShapeError
from spgcc.models import EmbeddingViews, Segmentation

ArrayLike = Union[np.ndarray, Tensor]


@dataclass
class GcnParams:
    shared: List[Tensor]
    branch1: Tensor
    branch2: Tensor

    @property
    def num_layers(self) -> int:
        return len(self.shared) + 1

    @property
    def tied(self) -> bool:
        return self.branch1 is self.branch2

    def parameters(self) -> List[Tensor]:
        params = list(self.shared) + [self.branch1]
        if not self.tied:
            params.append(self.branch2)
        return params

    def state_arrays(self) -> List[np.ndarray]:
        return [w.data for w in self.shared] + [self.branch1.data, self.branch2.data]


def _xavier(rng: np.random.Generator, n_in: int, n_out: int) -> np.ndarray:
    bound = np.sqrt(6.0 / (n_in + n_out))
    return rng.uniform(-bound, bound, size=(n_in, n_out))


def init_gcn(in_dim: int, hidden: int, out: int, layers: int, rng: np.random.Generator,
             use_mwa: bool = True) -> GcnParams:
    """Glorot-uniform weights for d → hidden → … → hidden → out; no biases."""
    if layers < 2:
        raise ParameterError(f"GCN needs at least 2 layers, got {layers}")
    dims = [in_dim] + [hidden] * (layers - 1)
    shared = [parameter(_xavier(rng, a, b), f"gcn.shared_{i + 1}") for i, (a, b) in enumerate(zip(dims[:-1], dims[1:]))]
    branch1 = parameter(_xavier(rng, hidden, out), "gcn.branch_1")
    branch2 = parameter(_xavier(rng, hidden, out), "gcn.branch_2") if use_mwa else branch1
    return GcnParams(shared=shared, branch1=branch1, branch2=branch2)


def params_from_arrays(arrays: List[np.ndarray], use_mwa: bool = True) -> GcnParams:
    if len(arrays) < 3:
        raise ShapeError(f"GCN checkpoint needs at least 3 weight matrices, got {len(arrays)}")
    *shared, w1, w2 = arrays
    branch1 = parameter(w1, "gcn.branch_1")
    branch2 = parameter(w2, "gcn.branch_2") if use_mwa else branch1
    return GcnParams(
        shared=[parameter(w, f"gcn.shared_{i + 1}") for i, w in enumerate(shared)],
        branch1=branch1,
        branch2=branch2,
    )


def _as_tensor(x: ArrayLike) -> Tensor:
    return x if isinstance(x, Tensor) else ops.constant(x)


def _propagate(propagation: sparse.sparray, h: Tensor, weight: Tensor) -> Tensor:
    return ops.spmm(propagation, ops.matmul(h, weight))


def gcn_forward(propagation: sparse.sparray, x_sp: ArrayLike, x_p: ArrayLike, params: GcnParams) -> EmbeddingViews:
    x_sp, x_p = _as_tensor(x_sp), _as_tensor(x_p)
    if x_sp.shape != x_p.shape:
        raise ShapeError(f"gcn_forward: superpixel input {x_sp.shape} vs sampled-pixel input {x_p.shape}")
    if propagation.shape[0] != x_sp.shape[0]:
        raise ShapeError(f"gcn_forward: graph has {propagation.shape[0]} nodes, input axis 0 has {x_sp.shape[0]}")

    def shared(h: Tensor) -> Tensor:
        for weight in params.shared:
            h = ops.relu(_propagate(propagation, h, weight))
        return h

    def head(h: Tensor, weight: Tensor) -> Tensor:
        return ops.l2_normalize_rows(_propagate(propagation, h, weight))

    h_sp, h_p = shared(x_sp), shared(x_p)
    return EmbeddingViews(
        sp1=head(h_sp, params.branch1),
        sp2=head(h_sp, params.branch2),
        p1=head(h_p, params.branch1),
        p2=head(h_p, params.branch2),
    )


def sample_pixels(seg: Segmentation, pixel_features: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """Row i is the feature of one uniformly drawn member pixel of superpixel i."""
    if pixel_features.shape[0] != seg.labels.size:
        raise ShapeError(
            f"sample_pixels: feature axis 0 has {pixel_features.shape[0]} rows, image has {seg.labels.size} pixels"
        )
    sizes = seg.sizes
    order = np.concatenate(seg.members)
    starts = np.concatenate([[0], np.cumsum(sizes)[:-1]])
    picks = order[starts + rng.integers(0, sizes)]
    return pixel_features[picks]
