"""Shared fixtures: seeded generators, small scenes, tiny network shapes and run directories."""

from pathlib import Path

import numpy as np
import pytest

from spgcc.hsi import generate_synthetic
from spgcc.models import HsiCube, LabelRaster
from spgcc.pretrain import VaeArchitecture
from spgcc.schemas import PipelineConfig, load_config


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(1234)


@pytest.fixture
def quadrant_scene():
    """16×16 image, four 8×8 quadrants with distinct 4-band spectra, classes 1..4, no noise."""
    spectra = np.array([
        [1.0, 0.0, 0.0, 0.0],
        [0.0, 1.0, 0.0, 0.0],
        [0.0, 0.0, 1.0, 0.0],
        [0.0, 0.0, 0.0, 1.0],
    ])
    labels = np.ones((16, 16), dtype=np.int64)
    labels[:8, 8:] = 2
    labels[8:, :8] = 3
    labels[8:, 8:] = 4
    return HsiCube(spectra[labels - 1] * 5.0), LabelRaster(labels=labels, num_classes=4)


@pytest.fixture
def small_scene():
    return generate_synthetic(12, 12, 4, 2, 0.05, seed=3, block_size=6)


@pytest.fixture
def tiny_arch() -> VaeArchitecture:
    """Smallest legal window with narrow layers, cheap enough for finite differences."""
    return VaeArchitecture(
        bands=4,
        window=9,
        channels=(2, 2, 2),
        conv2d_channels=2,
        pool_grid=2,
        hidden=6,
        latent=3,
        decoder_hidden=5,
    )


@pytest.fixture
def run_dir(tmp_path: Path) -> Path:
    out = tmp_path / "run"
    out.mkdir()
    return out


@pytest.fixture
def fast_config(run_dir: Path) -> PipelineConfig:
    """A reduced desk-scale pipeline: small scene, short VAE, narrow GCN."""
    return load_config(None, [
        f"output_dir='{run_dir.as_posix()}'",
        "seed=7",
        "num_classes=2",
        "pca_bands=4",
        "window=9",
        "num_superpixels=9",
        "synth.height=12",
        "synth.width=12",
        "synth.bands=4",
        "synth.block_size=6",
        "vae.epochs=1",
        "vae.batch=48",
        "gcn.hidden=16",
        "gcn.out=8",
        "train.epochs=3",
        "train.kmeans_interval=2",
    ])
