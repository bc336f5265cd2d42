"""
Dense float64 tensors and the reverse-mode tape.

Every differentiable op in `spgcc.engine.ops` computes its forward value with numpy and,
when any input requires a gradient and grad mode is on, records a backward rule on the
tape active in the current execution context. `backward(loss)` replays that tape in
reverse recording order, which is a topological order by construction.
"""

from __future__ import annotations

import contextvars
import itertools
from contextlib import contextmanager
from dataclasses import dataclass
from typing import Callable, Iterator, List, Optional, Sequence, Tuple

import numpy as np

from spgcc.errors import GradientError, ShapeError

BackwardRule = Callable[[np.ndarray], Sequence[Optional[np.ndarray]]]

_active_tape: contextvars.ContextVar[Optional["Tape"]] = contextvars.ContextVar("spgcc_tape", default=None)
_grad_enabled: contextvars.ContextVar[bool] = contextvars.ContextVar("spgcc_grad_enabled", default=True)
_tape_ids = itertools.count()


class Tensor:
    """A row-major float64 array with an optional gradient buffer."""

    __slots__ = ("data", "grad", "requires_grad", "tape_node", "_tape", "name")

    def __init__(self, data, requires_grad: bool = False, name: Optional[str] = None) -> None:
        self.data: np.ndarray = np.array(data, dtype=np.float64, copy=True, order="C")
        self.grad: Optional[np.ndarray] = None
        self.requires_grad = requires_grad
        self.tape_node: Optional[int] = None
        self._tape: Optional[Tape] = None
        self.name = name

    @classmethod
    def wrap(cls, array: np.ndarray) -> "Tensor":
        """Adopt an op result without the copy made by the constructor."""
        tensor = cls.__new__(cls)
        tensor.data = np.asarray(array, dtype=np.float64, order="C")
        tensor.grad = None
        tensor.requires_grad = False
        tensor.tape_node = None
        tensor._tape = None
        tensor.name = None
        return tensor

    @property
    def shape(self) -> Tuple[int, ...]:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def size(self) -> int:
        return self.data.size

    def item(self) -> float:
        if self.data.size != 1:
            raise ShapeError(f"item() needs a single-element tensor, got shape {self.shape}")
        return float(self.data.reshape(-1)[0])

    def numpy(self) -> np.ndarray:
        return self.data

    def detach(self) -> "Tensor":
        return Tensor.wrap(self.data.copy())

    def zero_grad(self) -> None:
        self.grad = None

    def __repr__(self) -> str:
        label = f" name={self.name}" if self.name else ""
        return f"Tensor(shape={self.shape}, requires_grad={self.requires_grad}{label})"


@dataclass
class TapeEntry:
    """One recorded operation: which node ids fed it, which node it produced, how to pull back."""
    inputs: Tuple[Tensor, ...]
    output: Tensor
    backward_rule: BackwardRule
    op: str


class Tape:
    """Ordered record of differentiable operations for one execution context."""

    def __init__(self) -> None:
        self.id = next(_tape_ids)
        self.entries: List[TapeEntry] = []
        self._token: Optional[contextvars.Token] = None

    def __enter__(self) -> "Tape":
        self._token = _active_tape.set(self)
        return self

    def __exit__(self, *exc) -> None:
        if self._token is not None:
            _active_tape.reset(self._token)
            self._token = None

    def __len__(self) -> int:
        return len(self.entries)

    def record(self, op: str, inputs: Sequence[Tensor], output: Tensor, backward_rule: BackwardRule) -> None:
        output.requires_grad = True
        output.tape_node = len(self.entries)
        output._tape = self
        self.entries.append(TapeEntry(tuple(inputs), output, backward_rule, op))

    def clear(self) -> None:
        self.entries.clear()


def current_tape() -> Tape:
    """The tape of the current context, created on first use."""
    tape = _active_tape.get()
    if tape is None:
        tape = Tape()
        _active_tape.set(tape)
    return tape


def is_grad_enabled() -> bool:
    return _grad_enabled.get()


@contextmanager
def no_grad() -> Iterator[None]:
    """Evaluate ops without recording them (inference, feature export)."""
    token = _grad_enabled.set(False)
    try:
        yield
    finally:
        _grad_enabled.reset(token)


def attach(op: str, inputs: Sequence[Tensor], out: np.ndarray, backward_rule: BackwardRule) -> Tensor:
    """Wrap a forward result and record it on the tape when a gradient is needed."""
    result = Tensor.wrap(out)
    if is_grad_enabled() and any(t.requires_grad for t in inputs):
        current_tape().record(op, inputs, result, backward_rule)
    return result


def backward(loss: Tensor) -> None:
    """
    Populate `.grad` of every requires_grad leaf reachable from `loss`.

    Gradients accumulate into existing `.grad` buffers. A leaf recorded on the tape that
    the loss does not depend on gets a zero gradient when it has none yet.
    """
    if loss.size != 1:
        raise GradientError(f"backward() needs a scalar loss, got shape {loss.shape}")
    if loss._tape is None or loss.tape_node is None:
        raise GradientError("loss is not connected to any requires_grad leaf")

    tape = loss._tape
    grads = {id(loss): np.ones_like(loss.data)}

    for index in range(loss.tape_node, -1, -1):
        entry = tape.entries[index]
        upstream = grads.pop(id(entry.output), None)
        if upstream is None:
            continue
        pulled = entry.backward_rule(upstream)
        for tensor, grad in zip(entry.inputs, pulled):
            if grad is None or not tensor.requires_grad:
                continue
            if grad.shape != tensor.shape:
                raise ShapeError(
                    f"{entry.op} backward produced gradient {grad.shape} for input {tensor.shape}"
                )
            if tensor.tape_node is None:
                tensor.grad = grad.copy() if tensor.grad is None else tensor.grad + grad
            else:
                key = id(tensor)
                grads[key] = grad if key not in grads else grads[key] + grad

    for entry in tape.entries[: loss.tape_node + 1]:
        for tensor in entry.inputs:
            if tensor.requires_grad and tensor.tape_node is None and tensor.grad is None:
                tensor.grad = np.zeros_like(tensor.data)


def parameter(data, name: Optional[str] = None) -> Tensor:
    """A trainable leaf."""
    return Tensor(data, requires_grad=True, name=name)
