"""VAE objective: distribution (KL to the standard normal) plus reconstruction, both batch-averaged."""

from __future__ import annotations

from typing import Optional

import numpy as np

from spgcc.engine import ops
from spgcc.engine.tensor import Tensor
from spgcc.errors import ParameterError, ShapeError


def reparameterize(
    mu: Tensor,
    logvar: Tensor,
    rng: Optional[np.random.Generator] = None,
    eps: Optional[np.ndarray] = None,
) -> Tensor:
    """q = μ + ε ⊙ exp(logσ²/2); ε is a constant, so gradients reach only μ and logσ²."""
    if mu.shape != logvar.shape:
        raise ShapeError(f"reparameterize: μ {mu.shape} vs logσ² {logvar.shape}")
    if eps is None:
        if rng is None:
            raise ParameterError("reparameterize needs either a generator or an explicit ε")
        eps = rng.standard_normal(mu.shape)
    sigma = ops.exp(ops.scale(logvar, 0.5))
    return ops.add(mu, ops.mul(ops.constant(eps), sigma))


def loss_distribution(mu: Tensor, logvar: Tensor) -> Tensor:
    """½ Σ (μ² + σ² − logσ² − 1), summed over latent dims and averaged over the batch."""
    if mu.shape != logvar.shape:
        raise ShapeError(f"loss_distribution: μ {mu.shape} vs logσ² {logvar.shape}")
    terms = ops.sub(ops.add(ops.square(mu), ops.exp(logvar)), logvar)
    total = ops.sum_all(ops.add_scalar(terms, -1.0))
    return ops.scale(total, 0.5 / mu.shape[0])


def loss_reconstruction(cubes: Tensor, reconstruction: Tensor) -> Tensor:
    """½ Σ_i ‖P_i − P̄_i‖²_F averaged over the batch."""
    return ops.scale(ops.frobenius_sq_diff(cubes, reconstruction), 0.5 / cubes.shape[0])


def total_loss(distribution: Tensor, reconstruction: Tensor) -> Tensor:
    return ops.add(distribution, reconstruction)
