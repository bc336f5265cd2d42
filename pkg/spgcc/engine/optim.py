from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, List, Sequence

import numpy as np

from spgcc.config import ADAM_BETA1, ADAM_BETA2, ADAM_EPS
from spgcc.engine.tensor import Tensor
from spgcc.errors import GradientError, ParameterError


@dataclass
class AdamState:
    """Moment buffers per parameter plus the shared step counter and hyperparameters."""
    lr: float
    weight_decay: float = 0.0
    beta1: float = ADAM_BETA1
    beta2: float = ADAM_BETA2
    eps: float = ADAM_EPS
    step: int = 0
    first_moment: Dict[int, np.ndarray] = field(default_factory=dict)
    second_moment: Dict[int, np.ndarray] = field(default_factory=dict)


class Adam:
    """
    Adam with bias correction. Weight decay is an L2 term added to the gradient
    before the moment updates.
    """

    def __init__(self, params: Sequence[Tensor], lr: float, weight_decay: float = 0.0) -> None:
        if lr <= 0:
            raise ParameterError(f"learning rate must be positive, got {lr}")
        if weight_decay < 0:
            raise ParameterError(f"weight decay must be non-negative, got {weight_decay}")
        self.params: List[Tensor] = list(params)
        self.state = AdamState(lr=lr, weight_decay=weight_decay)
        for index, p in enumerate(self.params):
            self.state.first_moment[index] = np.zeros_like(p.data)
            self.state.second_moment[index] = np.zeros_like(p.data)

    def zero_grad(self) -> None:
        """Reset every gradient to zeros so parameters the loss never reaches stay at zero."""
        for p in self.params:
            p.grad = np.zeros_like(p.data)

    def step(self) -> None:
        s = self.state
        for index, p in enumerate(self.params):
            if p.grad is None:
                raise GradientError(f"parameter {p.name or index} has no gradient; call backward() first")

        s.step += 1
        correction1 = 1.0 - s.beta1 ** s.step
        correction2 = 1.0 - s.beta2 ** s.step
        for index, p in enumerate(self.params):
            grad = p.grad + s.weight_decay * p.data if s.weight_decay else p.grad
            m = s.first_moment[index] = s.beta1 * s.first_moment[index] + (1.0 - s.beta1) * grad
            v = s.second_moment[index] = s.beta2 * s.second_moment[index] + (1.0 - s.beta2) * grad * grad
            p.data -= s.lr * (m / correction1) / (np.sqrt(v / correction2) + s.eps)


def adam_step(params: Sequence[Tensor], optimizer: Adam) -> Sequence[Tensor]:
    """Apply one update of `optimizer` to `params` (which must be the ones it was built with)."""
    if [id(p) for p in params] != [id(p) for p in optimizer.params]:
        raise ParameterError("adam_step: parameter list differs from the optimizer's")
    optimizer.step()
    return params
