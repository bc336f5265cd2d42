"""
Differentiable operations over `Tensor`.

Shapes are never broadcast: every op checks conformability and raises `ShapeError`
naming the offending axis. Convolutions are stride-1 and unpadded ("valid"); the
transposed convolutions invert that shape arithmetic.
"""

from __future__ import annotations

import logging
from collections import Counter
from dataclasses import dataclass, field
from typing import Sequence, Tuple

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from scipy import sparse

from spgcc.config import BATCHNORM_EPS, BATCHNORM_MOMENTUM, POOL_GRID
from spgcc.engine.tensor import Tensor, attach
from spgcc.errors import GradientError, ShapeError

logger = logging.getLogger("spgcc.engine")

# Degenerate-input counters (e.g. zero-norm rows left unnormalized).
DIAGNOSTICS: Counter = Counter()


# ---------------------------------------------------------------------------
# Shape checks
# ---------------------------------------------------------------------------

def _require_same_shape(op: str, a: Tensor, b: Tensor) -> None:
    if a.ndim != b.ndim:
        raise ShapeError(f"{op}: rank {a.ndim} vs {b.ndim}")
    for axis, (m, n) in enumerate(zip(a.shape, b.shape)):
        if m != n:
            raise ShapeError(f"{op}: axis {axis} has size {m} vs {n}")


def _require_rank(op: str, t: Tensor, rank: int, what: str) -> None:
    if t.ndim != rank:
        raise ShapeError(f"{op}: {what} must have rank {rank}, got shape {t.shape}")


# ---------------------------------------------------------------------------
# Elementwise and reductions
# ---------------------------------------------------------------------------

def add(a: Tensor, b: Tensor) -> Tensor:
    _require_same_shape("add", a, b)
    return attach("add", (a, b), a.data + b.data, lambda g: (g, g))


def sub(a: Tensor, b: Tensor) -> Tensor:
    _require_same_shape("sub", a, b)
    return attach("sub", (a, b), a.data - b.data, lambda g: (g, -g))


def mul(a: Tensor, b: Tensor) -> Tensor:
    _require_same_shape("mul", a, b)
    x, y = a.data, b.data
    return attach("mul", (a, b), x * y, lambda g: (g * y, g * x))


def scale(a: Tensor, factor: float) -> Tensor:
    return attach("scale", (a,), a.data * factor, lambda g: (g * factor,))


def add_scalar(a: Tensor, value: float) -> Tensor:
    return attach("add_scalar", (a,), a.data + value, lambda g: (g,))


def exp(a: Tensor) -> Tensor:
    out = np.exp(a.data)
    return attach("exp", (a,), out, lambda g: (g * out,))


def square(a: Tensor) -> Tensor:
    x = a.data
    return attach("square", (a,), x * x, lambda g: (2.0 * x * g,))


def clamp(a: Tensor, low: float, high: float) -> Tensor:
    x = a.data
    inside = (x >= low) & (x <= high)
    return attach("clamp", (a,), np.clip(x, low, high), lambda g: (g * inside,))


def relu(a: Tensor) -> Tensor:
    x = a.data
    mask = x > 0
    return attach("relu", (a,), np.where(mask, x, 0.0), lambda g: (g * mask,))


def sum_all(a: Tensor) -> Tensor:
    shape = a.shape
    return attach("sum", (a,), np.array(a.data.sum()), lambda g: (np.full(shape, g.item()),))


def reshape(a: Tensor, shape: Sequence[int]) -> Tensor:
    source = a.shape
    try:
        out = a.data.reshape(tuple(shape))
    except ValueError as e:
        raise ShapeError(f"reshape: cannot view {source} as {tuple(shape)}") from e
    return attach("reshape", (a,), out, lambda g: (g.reshape(source),))


def frobenius_sq_diff(a: Tensor, b: Tensor) -> Tensor:
    """Squared Frobenius norm of a − b, as a scalar tensor."""
    _require_same_shape("frobenius_sq_diff", a, b)
    diff = a.data - b.data
    return attach(
        "frobenius_sq_diff",
        (a, b),
        np.array(np.sum(diff * diff)),
        lambda g: (2.0 * g.item() * diff, -2.0 * g.item() * diff),
    )


# ---------------------------------------------------------------------------
# Matrix ops
# ---------------------------------------------------------------------------

def matmul(a: Tensor, b: Tensor) -> Tensor:
    _require_rank("matmul", a, 2, "left operand")
    _require_rank("matmul", b, 2, "right operand")
    if a.shape[1] != b.shape[0]:
        raise ShapeError(f"matmul: inner axis {a.shape[1]} vs {b.shape[0]}")
    x, y = a.data, b.data
    return attach("matmul", (a, b), x @ y, lambda g: (g @ y.T, x.T @ g))


def transpose(a: Tensor) -> Tensor:
    _require_rank("transpose", a, 2, "operand")
    return attach("transpose", (a,), a.data.T.copy(), lambda g: (g.T,))


def spmm(matrix: sparse.sparray, a: Tensor) -> Tensor:
    """Constant sparse matrix times a dense tensor (graph propagation)."""
    _require_rank("spmm", a, 2, "dense operand")
    if matrix.shape[1] != a.shape[0]:
        raise ShapeError(f"spmm: sparse axis 1 has {matrix.shape[1]} columns, dense axis 0 has {a.shape[0]} rows")
    transposed = matrix.T.tocsr()
    return attach("spmm", (a,), np.asarray(matrix @ a.data), lambda g: (np.asarray(transposed @ g),))


def fully_connected(x: Tensor, weight: Tensor, bias: Tensor) -> Tensor:
    """x [B, in] · W [in, out] + b [out]."""
    _require_rank("fully_connected", x, 2, "input")
    _require_rank("fully_connected", weight, 2, "weight")
    _require_rank("fully_connected", bias, 1, "bias")
    if x.shape[1] != weight.shape[0]:
        raise ShapeError(f"fully_connected: input axis 1 has {x.shape[1]} features, weight axis 0 has {weight.shape[0]}")
    if bias.shape[0] != weight.shape[1]:
        raise ShapeError(f"fully_connected: bias axis 0 has {bias.shape[0]}, weight axis 1 has {weight.shape[1]}")
    xd, wd = x.data, weight.data
    return attach(
        "fully_connected",
        (x, weight, bias),
        xd @ wd + bias.data,
        lambda g: (g @ wd.T, xd.T @ g, g.sum(axis=0)),
    )


def concat_cols(a: Tensor, b: Tensor) -> Tensor:
    _require_rank("concat_cols", a, 2, "left block")
    _require_rank("concat_cols", b, 2, "right block")
    if a.shape[0] != b.shape[0]:
        raise ShapeError(f"concat_cols: axis 0 has {a.shape[0]} vs {b.shape[0]} rows")
    split = a.shape[1]
    return attach(
        "concat_cols",
        (a, b),
        np.concatenate([a.data, b.data], axis=1),
        lambda g: (g[:, :split], g[:, split:]),
    )


def l2_normalize_rows(a: Tensor) -> Tensor:
    """
    Scale each row to unit L2 norm.
    Rows with zero norm pass through unchanged and are counted in DIAGNOSTICS.
    """
    _require_rank("l2_normalize_rows", a, 2, "operand")
    x = a.data
    norms = np.sqrt(np.sum(x * x, axis=1, keepdims=True))
    zero = norms[:, 0] == 0.0
    if zero.any():
        count = int(zero.sum())
        DIAGNOSTICS["zero_norm_rows"] += count
        logger.warning(f"l2_normalize_rows: {count} zero-norm row(s) left unnormalized")
    safe = np.where(norms == 0.0, 1.0, norms)
    y = x / safe

    def rule(g: np.ndarray):
        projected = g - y * np.sum(y * g, axis=1, keepdims=True)
        return (np.where(zero[:, None], g, projected / safe),)

    return attach("l2_normalize_rows", (a,), y, rule)


def row_dot(a: Tensor, b: Tensor) -> Tensor:
    """Per-row dot products of two equally shaped matrices, as a vector."""
    _require_same_shape("row_dot", a, b)
    _require_rank("row_dot", a, 2, "operand")
    x, y = a.data, b.data
    return attach("row_dot", (a, b), np.sum(x * y, axis=1), lambda g: (g[:, None] * y, g[:, None] * x))


def logsumexp_rows(a: Tensor) -> Tensor:
    """log Σ_j exp(a_ij) per row, shifted by the row maximum for stability."""
    _require_rank("logsumexp_rows", a, 2, "operand")
    x = a.data
    peak = x.max(axis=1, keepdims=True)
    shifted = np.exp(x - peak)
    total = shifted.sum(axis=1, keepdims=True)
    out = (peak + np.log(total))[:, 0]
    softmax = shifted / total
    return attach("logsumexp_rows", (a,), out, lambda g: (g[:, None] * softmax,))


# ---------------------------------------------------------------------------
# Convolutions
# ---------------------------------------------------------------------------

def _spatial_axes(nd: int) -> Tuple[int, ...]:
    return tuple(range(2, 2 + nd))


def _correlate(x: np.ndarray, w: np.ndarray) -> np.ndarray:
    """Valid cross-correlation: x [N,Cin,*S], w [Cout,Cin,*k] -> [N,Cout,*(S-k+1)]."""
    nd = w.ndim - 2
    windows = sliding_window_view(x, w.shape[2:], axis=_spatial_axes(nd))
    out = np.tensordot(
        windows,
        w,
        axes=([1, *range(2 + nd, 2 + 2 * nd)], [1, *_spatial_axes(nd)]),
    )
    return np.ascontiguousarray(np.moveaxis(out, -1, 1))


def _full_correlate(g: np.ndarray, w: np.ndarray) -> np.ndarray:
    """Adjoint of `_correlate` in its input: g [N,Cout,*O], w [Cout,Cin,*k] -> [N,Cin,*(O+k-1)]."""
    nd = w.ndim - 2
    kernel = w.shape[2:]
    padded = np.pad(g, [(0, 0), (0, 0)] + [(k - 1, k - 1) for k in kernel])
    flipped = np.flip(w, axis=_spatial_axes(nd)).swapaxes(0, 1)
    return _correlate(padded, flipped)


def _kernel_grad(x: np.ndarray, g: np.ndarray, kernel: Tuple[int, ...]) -> np.ndarray:
    """Σ over batch and positions of g ⊗ window(x): x [N,Cx,*S], g [N,Cg,*O] -> [Cg,Cx,*k]."""
    nd = len(kernel)
    windows = sliding_window_view(x, kernel, axis=_spatial_axes(nd))
    reduce_axes = [0, *_spatial_axes(nd)]
    return np.tensordot(g, windows, axes=(reduce_axes, reduce_axes))


def _check_conv(op: str, x: Tensor, kernel: Tensor, bias: Tensor, nd: int, transposed: bool) -> None:
    _require_rank(op, x, nd + 2, "input")
    _require_rank(op, kernel, nd + 2, "kernel")
    _require_rank(op, bias, 1, "bias")
    in_axis, out_axis = (0, 1) if transposed else (1, 0)
    if x.shape[1] != kernel.shape[in_axis]:
        raise ShapeError(
            f"{op}: input axis 1 has {x.shape[1]} channels, kernel axis {in_axis} expects {kernel.shape[in_axis]}"
        )
    if bias.shape[0] != kernel.shape[out_axis]:
        raise ShapeError(f"{op}: bias axis 0 has {bias.shape[0]}, kernel axis {out_axis} has {kernel.shape[out_axis]}")
    if not transposed:
        for axis in range(nd):
            if kernel.shape[2 + axis] > x.shape[2 + axis]:
                raise ShapeError(
                    f"{op}: kernel axis {2 + axis} ({kernel.shape[2 + axis]}) exceeds input axis {2 + axis} ({x.shape[2 + axis]})"
                )


def _bias_view(bias: np.ndarray, nd: int) -> np.ndarray:
    return bias.reshape((1, -1) + (1,) * nd)


def _conv(op: str, x: Tensor, kernel: Tensor, bias: Tensor, nd: int) -> Tensor:
    _check_conv(op, x, kernel, bias, nd, transposed=False)
    xd, wd = x.data, kernel.data
    out = _correlate(xd, wd) + _bias_view(bias.data, nd)
    sum_axes = (0, *_spatial_axes(nd))

    def rule(g: np.ndarray):
        return _full_correlate(g, wd), _kernel_grad(xd, g, wd.shape[2:]), g.sum(axis=sum_axes)

    return attach(op, (x, kernel, bias), out, rule)


def _deconv(op: str, x: Tensor, kernel: Tensor, bias: Tensor, nd: int) -> Tensor:
    """Transposed convolution; kernel layout [Cin, Cout, *k]."""
    _check_conv(op, x, kernel, bias, nd, transposed=True)
    xd, wd = x.data, kernel.data
    out = _full_correlate(xd, wd) + _bias_view(bias.data, nd)
    sum_axes = (0, *_spatial_axes(nd))

    def rule(g: np.ndarray):
        return _correlate(g, wd), _kernel_grad(g, xd, wd.shape[2:]), g.sum(axis=sum_axes)

    return attach(op, (x, kernel, bias), out, rule)


def conv3d(x: Tensor, kernel: Tensor, bias: Tensor) -> Tensor:
    """x [N,Cin,D,H,W], kernel [Cout,Cin,kd,kh,kw], bias [Cout]."""
    return _conv("conv3d", x, kernel, bias, 3)


def conv2d(x: Tensor, kernel: Tensor, bias: Tensor) -> Tensor:
    return _conv("conv2d", x, kernel, bias, 2)


def deconv3d(x: Tensor, kernel: Tensor, bias: Tensor) -> Tensor:
    """x [N,Cin,D,H,W], kernel [Cin,Cout,kd,kh,kw] -> [N,Cout,D+kd-1,H+kh-1,W+kw-1]."""
    return _deconv("deconv3d", x, kernel, bias, 3)


def deconv2d(x: Tensor, kernel: Tensor, bias: Tensor) -> Tensor:
    return _deconv("deconv2d", x, kernel, bias, 2)


# ---------------------------------------------------------------------------
# Normalization and pooling
# ---------------------------------------------------------------------------

@dataclass
class BatchNormStats:
    """Running per-channel statistics; updated in place by train-mode batchnorm."""
    mean: np.ndarray
    var: np.ndarray
    momentum: float = BATCHNORM_MOMENTUM
    eps: float = BATCHNORM_EPS

    @classmethod
    def fresh(cls, channels: int) -> "BatchNormStats":
        return cls(mean=np.zeros(channels), var=np.ones(channels))


def batchnorm(x: Tensor, gamma: Tensor, beta: Tensor, stats: BatchNormStats, training: bool) -> Tensor:
    """Per-channel standardization over every axis except axis 1, then gamma·x̂ + beta."""
    if x.ndim < 2:
        raise ShapeError(f"batchnorm: input needs a channel axis, got shape {x.shape}")
    channels = x.shape[1]
    for name, t in (("gamma", gamma), ("beta", beta)):
        _require_rank("batchnorm", t, 1, name)
        if t.shape[0] != channels:
            raise ShapeError(f"batchnorm: {name} axis 0 has {t.shape[0]}, input axis 1 has {channels}")

    axes = (0,) + tuple(range(2, x.ndim))
    view = (1, channels) + (1,) * (x.ndim - 2)
    xd = x.data
    g_ = gamma.data.reshape(view)

    if training:
        if x.shape[0] < 2:
            raise GradientError("batchnorm: batch size 1 in train mode leaves the variance undefined")
        count = xd.size // channels
        mean = xd.mean(axis=axes)
        var = xd.var(axis=axes)
        inv_std = 1.0 / np.sqrt(var + stats.eps)
        xhat = (xd - mean.reshape(view)) * inv_std.reshape(view)
        stats.mean = (1.0 - stats.momentum) * stats.mean + stats.momentum * mean
        unbiased = var * count / (count - 1)
        stats.var = (1.0 - stats.momentum) * stats.var + stats.momentum * unbiased

        def rule(g: np.ndarray):
            dxhat = g * g_
            dx = (inv_std.reshape(view) / count) * (
                count * dxhat
                - dxhat.sum(axis=axes).reshape(view)
                - xhat * (dxhat * xhat).sum(axis=axes).reshape(view)
            )
            return dx, (g * xhat).sum(axis=axes), g.sum(axis=axes)
    else:
        inv_std = 1.0 / np.sqrt(stats.var + stats.eps)
        xhat = (xd - stats.mean.reshape(view)) * inv_std.reshape(view)

        def rule(g: np.ndarray):
            return g * g_ * inv_std.reshape(view), (g * xhat).sum(axis=axes), g.sum(axis=axes)

    out = g_ * xhat + beta.data.reshape(view)
    return attach("batchnorm", (x, gamma, beta), out, rule)


def _pool_bounds(length: int, cells: int):
    return [((i * length) // cells, -((-(i + 1) * length) // cells)) for i in range(cells)]


def adaptive_avg_pool2d(x: Tensor, grid: int = POOL_GRID) -> Tensor:
    """Average each of grid×grid near-equal spatial cells independently: [N,C,H,W] -> [N,C,grid,grid]."""
    _require_rank("adaptive_avg_pool2d", x, 4, "input")
    xd = x.data
    rows = _pool_bounds(xd.shape[2], grid)
    cols = _pool_bounds(xd.shape[3], grid)
    out = np.empty(xd.shape[:2] + (grid, grid))
    for i, (r0, r1) in enumerate(rows):
        for j, (c0, c1) in enumerate(cols):
            out[:, :, i, j] = xd[:, :, r0:r1, c0:c1].mean(axis=(2, 3))

    def rule(g: np.ndarray):
        dx = np.zeros_like(xd)
        for i, (r0, r1) in enumerate(rows):
            for j, (c0, c1) in enumerate(cols):
                area = (r1 - r0) * (c1 - c0)
                dx[:, :, r0:r1, c0:c1] += g[:, :, i, j][:, :, None, None] / area
        return (dx,)

    return attach("adaptive_avg_pool2d", (x,), out, rule)


def constant(data) -> Tensor:
    """A tensor that never receives a gradient."""
    return Tensor(data, requires_grad=False)


__all__ = [
    "DIAGNOSTICS",
    "BatchNormStats",
    "add",
    "add_scalar",
    "adaptive_avg_pool2d",
    "batchnorm",
    "clamp",
    "concat_cols",
    "constant",
    "conv2d",
    "conv3d",
    "deconv2d",
    "deconv3d",
    "exp",
    "frobenius_sq_diff",
    "fully_connected",
    "l2_normalize_rows",
    "logsumexp_rows",
    "matmul",
    "mul",
    "relu",
    "reshape",
    "row_dot",
    "scale",
    "spmm",
    "square",
    "sub",
    "sum_all",
    "transpose",
]
