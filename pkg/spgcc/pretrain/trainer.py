from __future__ import annotations

import concurrent.futures
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import List, Optional, Tuple

import numpy as np

from spgcc.config import PRETRAIN_LOG_NAME
from spgcc.engine.optim import Adam
from spgcc.engine.tensor import Tape, Tensor, backward, no_grad
from spgcc.errors import ParameterError
from spgcc.hsi.formats import load_checkpoint, save_checkpoint
from spgcc.models import FeatureMatrix, PixelCubeBatch
from spgcc.pretrain.losses import loss_distribution, loss_reconstruction, reparameterize, total_loss
from spgcc.pretrain.network import VaeArchitecture, VaeNetwork
from spgcc.schemas import VaeSettings
from spgcc.utils import make_rng, setup_logging

# Seed streams
_INIT_STREAM = 0
_SHUFFLE_STREAM = 1
_NOISE_STREAM = 2
_SUBSET_STREAM = 3


@dataclass
class PretrainResult:
    network: VaeNetwork
    features: FeatureMatrix
    epoch_losses: List[float] = field(default_factory=list)


class VaePretrainer:
    """Trains the pixel-cube VAE with Adam on shuffled minibatches and exports pooled features."""

    def __init__(self, settings: VaeSettings, seed: int) -> None:
        self.settings = settings
        self.seed = seed
        self.logger: logging.Logger = setup_logging(PRETRAIN_LOG_NAME)

    def build(self, cubes: PixelCubeBatch) -> VaeNetwork:
        arch = VaeArchitecture(bands=cubes.bands, window=cubes.window)
        self.logger.info(
            f"VAE for h={arch.bands}, w={arch.window}: depth kernels {arch.depth_kernels}, "
            f"pooled dim {arch.pooled_dim}"
        )
        return VaeNetwork(arch, make_rng(self.seed, _INIT_STREAM))

    def _training_indices(self, total: int) -> np.ndarray:
        limit = self.settings.max_pixels
        if limit is None or limit >= total:
            return np.arange(total)
        chosen = make_rng(self.seed, _SUBSET_STREAM).choice(total, size=limit, replace=False)
        self.logger.info(f"Training on a seeded subset of {limit} of {total} pixel cubes")
        return np.sort(chosen)

    def train_step(self, network: VaeNetwork, optimizer: Adam, cubes: PixelCubeBatch,
                   indices: np.ndarray, noise_rng: np.random.Generator) -> Tuple[float, float]:
        """One Adam update on one minibatch; returns (distribution, reconstruction) losses."""
        with Tape():
            x = Tensor.wrap(cubes.batch(indices))
            _, mu, logvar = network.encode(x, training=True)
            q = reparameterize(mu, logvar, rng=noise_rng)
            reconstruction = network.decode(q, training=True)
            dist = loss_distribution(mu, logvar)
            recon = loss_reconstruction(x, reconstruction)
            loss = total_loss(dist, recon)
            optimizer.zero_grad()
            backward(loss)
        optimizer.step()
        return dist.item(), recon.item()

    def fit(self, cubes: PixelCubeBatch, network: Optional[VaeNetwork] = None) -> Tuple[VaeNetwork, List[float]]:
        settings = self.settings
        network = network or self.build(cubes)
        optimizer = Adam(network.parameters(), lr=settings.lr, weight_decay=settings.wd)
        shuffle_rng = make_rng(self.seed, _SHUFFLE_STREAM)
        noise_rng = make_rng(self.seed, _NOISE_STREAM)

        indices = self._training_indices(len(cubes))
        if len(indices) < 2:
            raise ParameterError(f"pre-training needs at least 2 pixel cubes, got {len(indices)}")
        # train-mode batchnorm needs at least 2 samples, so short remainders join a full batch
        num_batches = max(1, len(indices) // settings.batch)
        self.logger.info(
            f"Pre-training on {len(indices)} cubes: {settings.epochs} epochs, "
            f"{num_batches} batches/epoch, lr={settings.lr}, wd={settings.wd}"
        )

        epoch_losses: List[float] = []
        for epoch in range(1, settings.epochs + 1):
            order = shuffle_rng.permutation(indices)
            dist_sum = recon_sum = 0.0
            for batch in np.array_split(order, num_batches):
                dist, recon = self.train_step(network, optimizer, cubes, batch, noise_rng)
                dist_sum += dist * len(batch)
                recon_sum += recon * len(batch)
            dist_mean, recon_mean = dist_sum / len(indices), recon_sum / len(indices)
            epoch_losses.append(dist_mean + recon_mean)
            self.logger.info(
                f"Epoch {epoch}/{settings.epochs}: loss={dist_mean + recon_mean:.6f} "
                f"(distribution {dist_mean:.6f}, reconstruction {recon_mean:.6f})"
            )
        return network, epoch_losses

    def export_features(self, network: VaeNetwork, cubes: PixelCubeBatch) -> FeatureMatrix:
        """Eval-mode pooled features for every pixel, batches spread over a thread pool, rows in pixel order."""
        settings = self.settings
        batches = np.array_split(np.arange(len(cubes)), max(1, -(-len(cubes) // settings.export_batch)))
        rows: List[Optional[np.ndarray]] = [None] * len(batches)

        def encode(indices: np.ndarray) -> np.ndarray:
            with no_grad():
                pooled, _, _ = network.encode(Tensor.wrap(cubes.batch(indices)), training=False)
            return pooled.data

        with concurrent.futures.ThreadPoolExecutor(
            max_workers=min(len(batches), settings.max_workers)
        ) as executor:
            future_to_batch = {executor.submit(encode, idx): i for i, idx in enumerate(batches)}
            for future in concurrent.futures.as_completed(future_to_batch):
                rows[future_to_batch[future]] = future.result()

        features = FeatureMatrix(np.concatenate(rows, axis=0))
        self.logger.info(f"Exported {features.num_rows}×{features.dim} pixel features")
        return features


def pretrain(cubes: PixelCubeBatch, settings: VaeSettings, seed: int) -> PretrainResult:
    """Train the VAE and return it with the N×1024 eval-mode feature matrix X^p."""
    trainer = VaePretrainer(settings, seed)
    network, losses = trainer.fit(cubes)
    return PretrainResult(network=network, features=trainer.export_features(network, cubes), epoch_losses=losses)


def save_vae(path: Path, network: VaeNetwork) -> None:
    save_checkpoint(path, network.state_arrays())


def load_vae(path: Path, bands: int, window: int) -> VaeNetwork:
    network = VaeNetwork(VaeArchitecture(bands=bands, window=window), make_rng(0, _INIT_STREAM))
    network.load_state(load_checkpoint(path))
    return network
