"""Minimal reverse-mode automatic differentiation over dense float64 arrays."""

from spgcc.engine import ops
from spgcc.engine.optim import Adam, AdamState, adam_step
from spgcc.engine.tensor import Tape, Tensor, backward, current_tape, no_grad, parameter

__all__ = [
    "Adam",
    "AdamState",
    "Tape",
    "Tensor",
    "adam_step",
    "backward",
    "current_tape",
    "no_grad",
    "ops",
    "parameter",
]
