"""VAE architecture, objective and the pre-training loop."""

import numpy as np
import pytest

from spgcc.engine import Tape, Tensor, no_grad, ops
from spgcc.engine.gradcheck import gradcheck
from spgcc.errors import DimensionMismatchError, ParameterError, ShapeError
from spgcc.hsi import extract_pixel_cubes
from spgcc.pretrain import (
    VaeArchitecture,
    VaeNetwork,
    VaePretrainer,
    load_vae,
    loss_distribution,
    loss_reconstruction,
    pretrain,
    reparameterize,
    save_vae,
    total_loss,
)
from spgcc.schemas import VaeSettings

FULL_SIZE_SHAPES = [
    ("input", (2, 1, 30, 27, 27)),
    ("conv3d_1", (2, 8, 24, 25, 25)),
    ("conv3d_2", (2, 16, 20, 23, 23)),
    ("conv3d_3", (2, 32, 18, 21, 21)),
    ("reshape", (2, 576, 21, 21)),
    ("conv2d", (2, 64, 19, 19)),
    ("pool", (2, 64, 4, 4)),
    ("flatten", (2, 1024)),
    ("fc", (2, 512)),
    ("mu", (2, 128)),
    ("logvar", (2, 128)),
    ("dec_fc1", (2, 256)),
    ("dec_fc2", (2, 23104)),
    ("dec_reshape", (2, 64, 19, 19)),
    ("deconv2d", (2, 576, 21, 21)),
    ("dec_unfold", (2, 32, 18, 21, 21)),
    ("deconv3d_3", (2, 16, 20, 23, 23)),
    ("deconv3d_2", (2, 8, 24, 25, 25)),
    ("deconv3d_1", (2, 1, 30, 27, 27)),
]


class TestArchitecture:

    def test_full_size_stage_shapes(self):
        assert VaeArchitecture(bands=30, window=27).stage_shapes(2) == FULL_SIZE_SHAPES

    def test_full_size_encoder_forward(self, rng):
        network = VaeNetwork(VaeArchitecture(bands=30, window=27), rng)
        with no_grad():
            pooled, mu, logvar = network.encode(Tensor(rng.normal(size=(2, 1, 30, 27, 27))), training=False)
        assert pooled.shape == (2, 1024)
        assert mu.shape == (2, 128)
        assert logvar.shape == (2, 128)

    @pytest.mark.parametrize("bands, kernels, depths", [
        (30, (7, 5, 3), (30, 24, 20, 18)),
        (15, (7, 5, 3), (15, 9, 5, 3)),
        (8, (7, 1, 1), (8, 2, 2, 2)),
    ])
    def test_depth_kernels_shrink_with_bands(self, bands, kernels, depths):
        arch = VaeArchitecture(bands=bands, window=11)
        assert arch.depth_kernels == kernels
        assert arch.depths == depths

    def test_decoder_mirrors_encoder(self, tiny_arch, rng):
        network = VaeNetwork(tiny_arch, rng)
        x = Tensor(rng.normal(size=tiny_arch.input_shape(3)))
        with no_grad():
            pooled, mu, _ = network.encode(x, training=True)
            reconstruction = network.decode(mu, training=True)
        shapes = dict(tiny_arch.stage_shapes(3))
        assert pooled.shape == shapes["flatten"]
        assert reconstruction.shape == shapes["deconv3d_1"] == x.shape

    @pytest.mark.parametrize("window", [8, 7])
    def test_window_must_be_odd_and_large_enough(self, window):
        with pytest.raises(ParameterError):
            VaeArchitecture(bands=8, window=window)

    def test_wrong_input_shape(self, tiny_arch, rng):
        network = VaeNetwork(tiny_arch, rng)
        with pytest.raises(ShapeError):
            network.encode(Tensor(np.zeros((2, 1, 5, 9, 9))), training=False)

    def test_zero_input_gives_zero_mean(self, tiny_arch, rng):
        network = VaeNetwork(tiny_arch, rng)
        with no_grad():
            _, mu, _ = network.encode(Tensor(np.zeros(tiny_arch.input_shape(2))), training=False)
        np.testing.assert_array_equal(mu.data, 0.0)


class TestObjective:

    def test_zero_noise_returns_mean(self, rng):
        mu = Tensor(rng.normal(size=(2, 3)))
        q = reparameterize(mu, Tensor(rng.normal(size=(2, 3))), eps=np.zeros((2, 3)))
        np.testing.assert_array_equal(q.data, mu.data)

    def test_vanishing_variance_returns_mean(self, rng):
        mu = Tensor(rng.normal(size=(2, 3)))
        q = reparameterize(mu, Tensor(np.full((2, 3), -np.inf)), rng=rng)
        np.testing.assert_array_equal(q.data, mu.data)

    def test_distribution_loss_at_standard_normal(self):
        assert loss_distribution(Tensor(np.zeros((4, 3))), Tensor(np.zeros((4, 3)))).item() == 0.0

    def test_distribution_loss_unit_mean(self):
        assert loss_distribution(Tensor([[1.0]]), Tensor([[0.0]])).item() == pytest.approx(0.5)

    def test_reconstruction_loss(self):
        cubes = Tensor(np.zeros((1, 1, 2, 2, 2)))
        off = np.zeros((1, 1, 2, 2, 2))
        off[0, 0, 1, 0, 1] = 1.0
        assert loss_reconstruction(cubes, cubes).item() == 0.0
        assert loss_reconstruction(cubes, Tensor(off)).item() == pytest.approx(0.5)

    def test_composite_loss_gradients(self, tiny_arch):
        rng = np.random.default_rng(5)
        network = VaeNetwork(tiny_arch, rng)
        x = Tensor(rng.normal(size=tiny_arch.input_shape(4)))
        eps = rng.standard_normal((4, tiny_arch.latent))

        def fn():
            _, mu, logvar = network.encode(x, training=True)
            reconstruction = network.decode(reparameterize(mu, logvar, eps=eps), training=True)
            return total_loss(loss_distribution(mu, logvar), loss_reconstruction(x, reconstruction))

        p = network.params
        checked = [
            p["enc.conv3d_1.weight"],
            p["enc.bn2d.gamma"],
            p["enc.mu.weight"],
            p["enc.logvar.bias"],
            p["dec.fc2.weight"],
            p["dec.deconv3d_1.weight"],
        ]
        assert gradcheck(fn, checked)


class TestPretrainer:

    @pytest.fixture
    def cubes(self, small_scene):
        cube, _ = small_scene
        return extract_pixel_cubes(cube, 9)

    def test_export_has_one_row_per_pixel(self, cubes):
        result = pretrain(cubes, VaeSettings(epochs=1, batch=48), seed=3)
        assert result.features.values.shape == (144, 1024)
        assert len(result.epoch_losses) == 1
        assert np.isfinite(result.epoch_losses[0])

    def test_same_seed_same_features(self, cubes):
        settings = VaeSettings(epochs=1, batch=48)
        first = pretrain(cubes, settings, seed=3)
        second = pretrain(cubes, settings, seed=3)
        np.testing.assert_array_equal(first.features.values, second.features.values)

    def test_parallel_export_keeps_pixel_order(self, cubes):
        trainer = VaePretrainer(VaeSettings(epochs=0, export_batch=10, max_workers=3), seed=1)
        network = trainer.build(cubes)
        parallel = trainer.export_features(network, cubes)
        with no_grad():
            pooled, _, _ = network.encode(Tensor(cubes.batch(np.arange(len(cubes)))), training=False)
        np.testing.assert_allclose(parallel.values, pooled.data, rtol=0, atol=1e-12)

    def test_pixel_subset(self, cubes):
        trainer = VaePretrainer(VaeSettings(max_pixels=20), seed=1)
        indices = trainer._training_indices(len(cubes))
        assert len(indices) == 20
        assert np.all(np.diff(indices) > 0)

    def test_training_lowers_the_loss(self, cubes):
        result = pretrain(cubes, VaeSettings(epochs=4, batch=36, lr=1e-3), seed=2)
        assert result.epoch_losses[-1] < result.epoch_losses[0]

    def test_checkpoint_round_trip(self, tmp_path, cubes):
        trainer = VaePretrainer(VaeSettings(epochs=1, batch=72), seed=4)
        network, _ = trainer.fit(cubes)
        save_vae(tmp_path / "vae.spgw", network)
        restored = load_vae(tmp_path / "vae.spgw", bands=4, window=9)
        for a, b in zip(restored.state_arrays(), network.state_arrays()):
            np.testing.assert_array_equal(a, b)
        with pytest.raises(DimensionMismatchError):
            load_vae(tmp_path / "vae.spgw", bands=4, window=11)
