"""Sample-level alignment, cluster-center contrast and their weighted sum."""

from __future__ import annotations

from typing import Optional

from spgcc.engine import ops
from spgcc.engine.tensor import Tensor
from spgcc.errors import ParameterError, ShapeError
from spgcc.models import EmbeddingViews


def loss_sla(views: EmbeddingViews) -> Tensor:
    """Mean over the six view pairs of ‖Z_a − Z_b‖²_F, divided by the node count M."""
    pairs = [
        (views.sp1, views.sp2),
        (views.p1, views.p2),
        (views.sp1, views.p1),
        (views.sp2, views.p2),
        (views.sp1, views.p2),
        (views.sp2, views.p1),
    ]
    total = ops.frobenius_sq_diff(*pairs[0])
    for a, b in pairs[1:]:
        total = ops.add(total, ops.frobenius_sq_diff(a, b))
    return ops.scale(total, 1.0 / (6.0 * views.sp1.shape[0]))


def _center_term(centers: Tensor, positives: Tensor, tau: float) -> Tensor:
    similarities = ops.scale(ops.matmul(centers, ops.transpose(centers)), 1.0 / tau)
    per_class = ops.sub(ops.logsumexp_rows(similarities), positives)
    return ops.scale(ops.sum_all(per_class), 1.0 / centers.shape[0])


def loss_clc(c1: Tensor, c2: Tensor, tau: float) -> Tensor:
    """
    Symmetric InfoNCE over cluster centers: the positive for c_k^1 is c_k^2, the
    negatives are the other centers of the same view; both directions averaged.
    """
    if c1.shape != c2.shape:
        raise ShapeError(f"loss_clc: view-1 centers {c1.shape} vs view-2 centers {c2.shape}")
    if c1.shape[0] < 2:
        raise ParameterError(f"center contrast needs at least 2 valid centers, got {c1.shape[0]}")
    if tau <= 0:
        raise ParameterError(f"temperature τ must be positive, got {tau}")
    positives = ops.scale(ops.row_dot(c1, c2), 1.0 / tau)
    both = ops.add(_center_term(c1, positives, tau), _center_term(c2, positives, tau))
    return ops.scale(both, 0.5)


def total_loss(sla: Optional[Tensor], clc: Optional[Tensor], alpha: float) -> Optional[Tensor]:
    """L = L_SLA + α·L_CLC; a missing term counts as zero, both missing gives None."""
    if clc is None:
        return sla
    weighted = ops.scale(clc, alpha)
    return weighted if sla is None else ops.add(sla, weighted)
