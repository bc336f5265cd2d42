"""Central finite-difference gradient checks for engine ops and composite losses."""

from __future__ import annotations

from typing import Callable, Sequence, Tuple

import numpy as np

from spgcc.config import GRADCHECK_STEP, GRADCHECK_TOLERANCE
from spgcc.engine.tensor import Tape, Tensor, backward, no_grad


def numerical_gradient(fn: Callable[[], Tensor], target: Tensor, step: float = GRADCHECK_STEP) -> np.ndarray:
    """∂fn/∂target by central differences, perturbing target.data in place."""
    grad = np.zeros_like(target.data)
    flat = target.data.reshape(-1)
    out = grad.reshape(-1)
    with no_grad():
        for i in range(flat.size):
            original = flat[i]
            flat[i] = original + step
            plus = fn().item()
            flat[i] = original - step
            minus = fn().item()
            flat[i] = original
            out[i] = (plus - minus) / (2.0 * step)
    return grad


def analytic_gradients(fn: Callable[[], Tensor], inputs: Sequence[Tensor]) -> Tuple[np.ndarray, ...]:
    for t in inputs:
        t.grad = None
    with Tape():
        loss = fn()
        backward(loss)
    return tuple(np.zeros_like(t.data) if t.grad is None else t.grad.copy() for t in inputs)


def relative_error(analytic: np.ndarray, numeric: np.ndarray) -> float:
    scale = max(np.abs(analytic).max(initial=0.0), np.abs(numeric).max(initial=0.0), 1e-8)
    return float(np.abs(analytic - numeric).max(initial=0.0) / scale)


def gradcheck(
    fn: Callable[[], Tensor],
    inputs: Sequence[Tensor],
    step: float = GRADCHECK_STEP,
    tolerance: float = GRADCHECK_TOLERANCE,
) -> bool:
    """True when every input's analytic gradient matches central differences within `tolerance`."""
    analytic = analytic_gradients(fn, inputs)
    for tensor, grad in zip(inputs, analytic):
        numeric = numerical_gradient(fn, tensor, step)
        if relative_error(grad, numeric) > tolerance:
            return False
    return True
