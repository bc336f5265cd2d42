"""
Hybrid 3-D/2-D convolutional VAE for pixel cubes.

Encoder: three Conv3D+BN+ReLU stages over (bands, window, window), a reshape that folds
the remaining depth into channels, Conv2D+BN+ReLU, 4×4 adaptive average pooling (the
exported pixel feature), FC+ReLU, and twin linear heads for μ and logσ².
Decoder: FC+ReLU ×2, reshape, DeConv2D+BN+ReLU, reshape, DeConv3D+BN+ReLU ×2 and a final
DeConv3D+BN without activation, mirroring the encoder shapes exactly.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, List, Sequence, Tuple

import numpy as np

from spgcc.config import (
    CONV2D_CHANNELS,
    DECODER_HIDDEN,
    ENCODER_CHANNELS,
    ENCODER_DEPTH_KERNELS,
    ENCODER_HIDDEN,
    LATENT_DIM,
    LOGVAR_CLAMP,
    POOL_GRID,
)
from spgcc.engine import ops
from spgcc.engine.ops import BatchNormStats
from spgcc.engine.tensor import Tensor, parameter
from spgcc.errors import DimensionMismatchError, ParameterError, ShapeError

SPATIAL_KERNEL = 3

Shape = Tuple[int, ...]


def _largest_odd_at_most(value: int) -> int:
    return value if value % 2 == 1 else value - 1


@dataclass
class VaeArchitecture:
    """Layer sizes derived from the reduced band count h and the window w by shape propagation."""
    bands: int
    window: int
    channels: Tuple[int, ...] = ENCODER_CHANNELS
    nominal_depth_kernels: Tuple[int, ...] = ENCODER_DEPTH_KERNELS
    conv2d_channels: int = CONV2D_CHANNELS
    pool_grid: int = POOL_GRID
    hidden: int = ENCODER_HIDDEN
    latent: int = LATENT_DIM
    decoder_hidden: int = DECODER_HIDDEN
    depth_kernels: Tuple[int, ...] = field(init=False)
    depths: Tuple[int, ...] = field(init=False)
    sizes: Tuple[int, ...] = field(init=False)

    def __post_init__(self) -> None:
        if self.bands < 1:
            raise ParameterError(f"band count must be at least 1, got {self.bands}")
        if len(self.channels) != len(self.nominal_depth_kernels):
            raise ParameterError("one nominal depth kernel is needed per Conv3D stage")
        min_window = 2 * (len(self.channels) + 1) + 1
        if self.window % 2 == 0 or self.window < min_window:
            raise ParameterError(f"window must be odd and at least {min_window}, got {self.window}")

        kernels, depths, sizes = [], [self.bands], [self.window]
        for nominal in self.nominal_depth_kernels:
            k = _largest_odd_at_most(min(nominal, depths[-1]))
            kernels.append(k)
            depths.append(depths[-1] - k + 1)
            sizes.append(sizes[-1] - SPATIAL_KERNEL + 1)
        sizes.append(sizes[-1] - SPATIAL_KERNEL + 1)
        self.depth_kernels = tuple(kernels)
        self.depths = tuple(depths)
        self.sizes = tuple(sizes)

    @property
    def folded_channels(self) -> int:
        """Channels after folding the last Conv3D depth into the channel axis."""
        return self.channels[-1] * self.depths[-1]

    @property
    def conv2d_size(self) -> int:
        return self.sizes[-1]

    @property
    def pooled_dim(self) -> int:
        return self.conv2d_channels * self.pool_grid * self.pool_grid

    @property
    def decoder_flat(self) -> int:
        return self.conv2d_channels * self.conv2d_size ** 2

    def input_shape(self, batch: int) -> Shape:
        return (batch, 1, self.bands, self.window, self.window)

    def stage_shapes(self, batch: int) -> List[Tuple[str, Shape]]:
        """Every stage's output shape, encoder then decoder."""
        shapes: List[Tuple[str, Shape]] = [("input", self.input_shape(batch))]
        for i, c in enumerate(self.channels):
            shapes.append((f"conv3d_{i + 1}", (batch, c, self.depths[i + 1], self.sizes[i + 1], self.sizes[i + 1])))
        s3 = self.sizes[len(self.channels)]
        s = self.conv2d_size
        shapes += [
            ("reshape", (batch, self.folded_channels, s3, s3)),
            ("conv2d", (batch, self.conv2d_channels, s, s)),
            ("pool", (batch, self.conv2d_channels, self.pool_grid, self.pool_grid)),
            ("flatten", (batch, self.pooled_dim)),
            ("fc", (batch, self.hidden)),
            ("mu", (batch, self.latent)),
            ("logvar", (batch, self.latent)),
            ("dec_fc1", (batch, self.decoder_hidden)),
            ("dec_fc2", (batch, self.decoder_flat)),
            ("dec_reshape", (batch, self.conv2d_channels, s, s)),
            ("deconv2d", (batch, self.folded_channels, s3, s3)),
            ("dec_unfold", (batch, self.channels[-1], self.depths[-1], s3, s3)),
        ]
        out_channels = (1,) + tuple(self.channels[:-1])
        for i in reversed(range(len(self.channels))):
            shapes.append(
                (f"deconv3d_{i + 1}", (batch, out_channels[i], self.depths[i], self.sizes[i], self.sizes[i]))
            )
        return shapes


# ---------------------------------------------------------------------------
# Network
# ---------------------------------------------------------------------------

class VaeNetwork:
    """Parameters and batchnorm statistics of the pre-training VAE."""

    def __init__(self, arch: VaeArchitecture, rng: np.random.Generator) -> None:
        self.arch = arch
        self.params: Dict[str, Tensor] = {}
        self.stats: Dict[str, BatchNormStats] = {}
        self._rng = rng

        inputs = (1,) + tuple(arch.channels[:-1])
        for i, (c_in, c_out, kd) in enumerate(zip(inputs, arch.channels, arch.depth_kernels), start=1):
            self._conv(f"enc.conv3d_{i}", (c_out, c_in, kd, SPATIAL_KERNEL, SPATIAL_KERNEL))
            self._norm(f"enc.bn3d_{i}", c_out)
        self._conv("enc.conv2d", (arch.conv2d_channels, arch.folded_channels, SPATIAL_KERNEL, SPATIAL_KERNEL))
        self._norm("enc.bn2d", arch.conv2d_channels)
        self._linear("enc.fc", arch.pooled_dim, arch.hidden)
        self._linear("enc.mu", arch.hidden, arch.latent)
        self._linear("enc.logvar", arch.hidden, arch.latent)

        self._linear("dec.fc1", arch.latent, arch.decoder_hidden)
        self._linear("dec.fc2", arch.decoder_hidden, arch.decoder_flat)
        self._deconv("dec.deconv2d", (arch.conv2d_channels, arch.folded_channels, SPATIAL_KERNEL, SPATIAL_KERNEL))
        self._norm("dec.bn2d", arch.folded_channels)
        for i in reversed(range(len(arch.channels))):
            c_in, c_out = arch.channels[i], inputs[i]
            self._deconv(f"dec.deconv3d_{i + 1}", (c_in, c_out, arch.depth_kernels[i], SPATIAL_KERNEL, SPATIAL_KERNEL))
            self._norm(f"dec.bn3d_{i + 1}", c_out)

    # --- construction -------------------------------------------------------

    def _uniform(self, shape: Shape, fan_in: int) -> np.ndarray:
        bound = np.sqrt(6.0 / fan_in)
        return self._rng.uniform(-bound, bound, size=shape)

    def _conv(self, name: str, shape: Shape) -> None:
        fan_in = shape[1] * int(np.prod(shape[2:]))
        self.params[f"{name}.weight"] = parameter(self._uniform(shape, fan_in), f"{name}.weight")
        self.params[f"{name}.bias"] = parameter(np.zeros(shape[0]), f"{name}.bias")

    def _deconv(self, name: str, shape: Shape) -> None:
        fan_in = shape[0] * int(np.prod(shape[2:]))
        self.params[f"{name}.weight"] = parameter(self._uniform(shape, fan_in), f"{name}.weight")
        self.params[f"{name}.bias"] = parameter(np.zeros(shape[1]), f"{name}.bias")

    def _linear(self, name: str, n_in: int, n_out: int) -> None:
        self.params[f"{name}.weight"] = parameter(self._uniform((n_in, n_out), n_in), f"{name}.weight")
        self.params[f"{name}.bias"] = parameter(np.zeros(n_out), f"{name}.bias")

    def _norm(self, name: str, channels: int) -> None:
        self.params[f"{name}.gamma"] = parameter(np.ones(channels), f"{name}.gamma")
        self.params[f"{name}.beta"] = parameter(np.zeros(channels), f"{name}.beta")
        self.stats[name] = BatchNormStats.fresh(channels)

    # --- layers ---------------------------------------------------------------

    def _bn(self, name: str, x: Tensor, training: bool) -> Tensor:
        p = self.params
        return ops.batchnorm(x, p[f"{name}.gamma"], p[f"{name}.beta"], self.stats[name], training)

    def _fc(self, name: str, x: Tensor) -> Tensor:
        return ops.fully_connected(x, self.params[f"{name}.weight"], self.params[f"{name}.bias"])

    def _weights(self, name: str) -> Tuple[Tensor, Tensor]:
        return self.params[f"{name}.weight"], self.params[f"{name}.bias"]

    def parameters(self) -> List[Tensor]:
        return list(self.params.values())

    def encode(self, x: Tensor, training: bool) -> Tuple[Tensor, Tensor, Tensor]:
        """Return (pooled features [B, pooled_dim], μ, clamped logσ²)."""
        arch = self.arch
        expected = arch.input_shape(x.shape[0])
        if x.shape != expected:
            raise ShapeError(f"encoder expects input {expected}, got {x.shape}")
        batch = x.shape[0]

        h = x
        for i in range(1, len(arch.channels) + 1):
            h = ops.conv3d(h, *self._weights(f"enc.conv3d_{i}"))
            h = ops.relu(self._bn(f"enc.bn3d_{i}", h, training))
        size = h.shape[-1]
        h = ops.reshape(h, (batch, arch.folded_channels, size, size))
        h = ops.relu(self._bn("enc.bn2d", ops.conv2d(h, *self._weights("enc.conv2d")), training))
        pooled = ops.reshape(ops.adaptive_avg_pool2d(h, arch.pool_grid), (batch, arch.pooled_dim))

        hidden = ops.relu(self._fc("enc.fc", pooled))
        mu = self._fc("enc.mu", hidden)
        logvar = ops.clamp(self._fc("enc.logvar", hidden), -LOGVAR_CLAMP, LOGVAR_CLAMP)
        return pooled, mu, logvar

    def decode(self, q: Tensor, training: bool) -> Tensor:
        arch = self.arch
        batch = q.shape[0]
        s = arch.conv2d_size
        h = ops.relu(self._fc("dec.fc1", q))
        h = ops.relu(self._fc("dec.fc2", h))
        h = ops.reshape(h, (batch, arch.conv2d_channels, s, s))
        h = ops.relu(self._bn("dec.bn2d", ops.deconv2d(h, *self._weights("dec.deconv2d")), training))
        size = h.shape[-1]
        h = ops.reshape(h, (batch, arch.channels[-1], arch.depths[-1], size, size))
        for i in reversed(range(1, len(arch.channels) + 1)):
            h = self._bn(f"dec.bn3d_{i}", ops.deconv3d(h, *self._weights(f"dec.deconv3d_{i}")), training)
            if i > 1:
                h = ops.relu(h)
        return h

    # --- persistence ----------------------------------------------------------

    def state_arrays(self) -> List[np.ndarray]:
        """Parameters in construction order, then (running mean, running var) per batchnorm."""
        arrays = [p.data for p in self.params.values()]
        for stats in self.stats.values():
            arrays += [stats.mean, stats.var]
        return arrays

    def load_state(self, arrays: Sequence[np.ndarray]) -> None:
        expected = len(self.params) + 2 * len(self.stats)
        if len(arrays) != expected:
            raise DimensionMismatchError(f"VAE checkpoint holds {len(arrays)} tensors, architecture needs {expected}")
        arrays = list(arrays)
        for (name, p), value in zip(self.params.items(), arrays):
            if p.shape != value.shape:
                raise DimensionMismatchError(f"VAE checkpoint tensor {name} is {value.shape}, expected {p.shape}")
            p.data = np.array(value, dtype=np.float64)
        rest = arrays[len(self.params):]
        for i, stats in enumerate(self.stats.values()):
            stats.mean = np.array(rest[2 * i], dtype=np.float64)
            stats.var = np.array(rest[2 * i + 1], dtype=np.float64)
