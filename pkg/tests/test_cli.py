"""Command-line surface: exit codes, overrides, artifacts and end-to-end runs."""

from pathlib import Path

import numpy as np
import pytest
from scipy.io import savemat

from spgcc.cli import main
from spgcc.errors import ConfigError
from spgcc.hsi import load_hsi, load_labels, save_labels
from spgcc.metrics import read_report
from spgcc.models import LabelRaster
from spgcc.schemas import load_config

CONFIGS = Path(__file__).resolve().parent.parent / "configs"

FAST_OVERRIDES = [
    "--num_classes=2",
    "--pca_bands=4",
    "--window=9",
    "--num_superpixels=9",
    "--synth.height=12",
    "--synth.width=12",
    "--synth.bands=4",
    "--synth.block_size=6",
    "--vae.epochs=1",
    "--vae.batch=48",
    "--gcn.hidden=16",
    "--gcn.out=8",
    "--train.epochs=3",
    "--train.kmeans_interval=2",
]


def _run(*argv) -> int:
    return main([str(a) for a in argv])


class TestExitCodes:

    def test_cluster_before_features(self, run_dir, capsys):
        assert _run("cluster", "--output-dir", run_dir) == 3
        err = capsys.readouterr().err
        assert "code=missing_artifact" in err
        assert "run features first" in err

    def test_evaluate_without_prediction(self, run_dir, capsys):
        assert _run("evaluate", "--output-dir", run_dir) == 3
        assert "run cluster first" in capsys.readouterr().err

    def test_unknown_config_key(self, run_dir, capsys):
        assert _run("synth", "--output-dir", run_dir, "--bogus=1") == 2
        assert "code=invalid_config" in capsys.readouterr().err

    def test_override_out_of_range(self, run_dir):
        assert _run("synth", "--output-dir", run_dir, "--num_classes=1") == 2

    def test_override_without_value(self, run_dir):
        assert _run("synth", "--output-dir", run_dir, "stray") == 2

    def test_missing_config_file(self, run_dir, tmp_path):
        assert _run("synth", "--output-dir", run_dir, "--config", tmp_path / "nope.toml") == 2


class TestConfigKeys:

    def test_symbol_keys_in_toml(self, tmp_path):
        path = tmp_path / "symbols.toml"
        path.write_text(
            'K = 3\nM = 50\nh = 6\nw = 13\n\n[gcn]\nL = 3\n\n[train]\neta = 1e-5\nlambda = 0.5\n"τ" = 0.2\n"α" = 0.3\n',
            encoding="utf-8",
        )
        config = load_config(path)
        assert (config.num_classes, config.num_superpixels, config.pca_bands, config.window) == (3, 50, 6, 13)
        assert config.gcn.layers == 3
        assert config.train.lr == pytest.approx(1e-5)
        assert config.train.lambda_ == pytest.approx(0.5)
        assert config.train.tau == pytest.approx(0.2)
        assert config.train.alpha == pytest.approx(0.3)

    def test_override_wins_whatever_the_spelling(self, tmp_path):
        long_form, short_form = tmp_path / "long.toml", tmp_path / "short.toml"
        long_form.write_text("num_classes = 4\n[train]\nlambda = 0.75\n")
        short_form.write_text("K = 4\n[train]\nlambda_ = 0.75\n")
        assert load_config(long_form, ["K=3", "train.λ=0.5"]).num_classes == 3
        assert load_config(short_form, ["num_classes=3"]).num_classes == 3
        assert load_config(long_form, ["train.λ=0.5"]).train.lambda_ == pytest.approx(0.5)
        assert load_config(short_form, ["train.lambda=0.5"]).train.lambda_ == pytest.approx(0.5)

    def test_key_given_twice(self, tmp_path):
        path = tmp_path / "twice.toml"
        path.write_text("K = 3\nnum_classes = 4\n")
        with pytest.raises(ConfigError):
            load_config(path)

    def test_symbol_overrides_on_the_command_line(self, run_dir):
        assert _run("synth", "--output-dir", run_dir, "--synth.height=10", "--synth.width=10",
                    "--synth.block_size=5", "--K=3", "--h=4", "--w=9") == 0
        assert set(np.unique(load_labels(run_dir / "labels.hsil").labels)) == {1, 2, 3}
        assert _run("synth", "--output-dir", run_dir, "--K=1") == 2


class TestSynth:

    def test_writes_cube_and_labels(self, run_dir, capsys):
        code = _run("synth", "--output-dir", run_dir, "--seed", 3, "--synth.height=10", "--synth.width=14",
                    "--synth.block_size=5")
        assert code == 0
        cube = load_hsi(run_dir / "cube.hsif")
        assert (cube.height, cube.width, cube.bands) == (10, 14, 8)
        assert load_labels(run_dir / "labels.hsil", 4).shape == (10, 14)
        assert "DONE stage=synth height=10 width=14 bands=8 classes=4" in capsys.readouterr().out

    def test_options_before_the_subcommand(self, run_dir):
        assert _run("--output-dir", run_dir, "--seed", 3, "synth", "--synth.height=10", "--synth.width=10",
                    "--synth.block_size=5") == 0
        assert (run_dir / "cube.hsif").is_file()

    def test_config_file(self, tmp_path):
        out = tmp_path / "from-file"
        assert _run("synth", "--config", CONFIGS / "synthetic.toml", "--output-dir", out) == 0
        assert load_hsi(out / "cube.hsif").values.shape == (48, 48, 8)

    def test_status_lists_artifacts(self, run_dir, capsys):
        _run("synth", "--output-dir", run_dir, "--synth.height=10", "--synth.width=10", "--synth.block_size=5")
        capsys.readouterr()
        assert _run("status", "--output-dir", run_dir) == 0
        out = capsys.readouterr().out
        assert "Artifacts present: 2" in out
        assert "synth" in out


class TestImportMat:

    def test_scene_lands_in_the_run_directory(self, run_dir, tmp_path, capsys):
        savemat(str(tmp_path / "scene.mat"), {"cube": np.ones((6, 5, 3))})
        savemat(str(tmp_path / "scene_gt.mat"), {"gt": np.full((6, 5), 2)})
        code = _run("import-mat", "--output-dir", run_dir, "--cube-mat", tmp_path / "scene.mat",
                    "--labels-mat", tmp_path / "scene_gt.mat")
        assert code == 0
        assert load_hsi(run_dir / "cube.hsif").values.shape == (6, 5, 3)
        assert load_labels(run_dir / "labels.hsil").labels.max() == 2
        assert "DONE stage=import-mat height=6 width=5 bands=3 classes=2" in capsys.readouterr().out

    def test_configured_cube_path_missing(self, run_dir, tmp_path, capsys):
        missing = (tmp_path / "nope.hsif").as_posix()
        code = _run("segment", "--output-dir", run_dir, f"--cube_path='{missing}'")
        assert code == 3
        assert "run import-mat first" in capsys.readouterr().err


class TestRenderMap:

    def test_single_class_map(self, run_dir, tmp_path):
        save_labels(tmp_path / "ones.hsil", LabelRaster(labels=np.ones((4, 6), dtype=np.int64)))
        out = tmp_path / "ones.ppm"
        code = _run("render-map", "--output-dir", run_dir, "--labels", tmp_path / "ones.hsil",
                    "--num-classes", 1, "--output", out)
        assert code == 0
        raw = out.read_bytes()
        header = b"P6\n6 4\n255\n"
        assert raw.startswith(header)
        assert len(raw) == len(header) + 3 * 6 * 4
        assert raw[len(header):] == bytes([242, 61, 61]) * 24

    def test_unlabeled_raster_is_black(self, run_dir, tmp_path):
        save_labels(tmp_path / "zeros.hsil", LabelRaster(labels=np.zeros((2, 3), dtype=np.int64)))
        out = tmp_path / "zeros.ppm"
        assert _run("render-map", "--output-dir", run_dir, "--labels", tmp_path / "zeros.hsil",
                    "--num-classes", 3, "--output", out) == 0
        assert set(out.read_bytes()[len(b"P6\n3 2\n255\n"):]) == {0}

    def test_label_above_palette(self, run_dir, tmp_path, capsys):
        save_labels(tmp_path / "big.hsil", LabelRaster(labels=np.array([[1, 3]])))
        code = _run("render-map", "--output-dir", run_dir, "--labels", tmp_path / "big.hsil",
                    "--num-classes", 2, "--output", tmp_path / "big.ppm")
        assert code == 2
        assert "code=label_range" in capsys.readouterr().err

    def test_default_needs_prediction(self, run_dir, capsys):
        assert _run("render-map", "--output-dir", run_dir) == 3
        assert "run cluster first" in capsys.readouterr().err


class TestRunAll:

    def test_reduced_pipeline(self, run_dir, capsys):
        assert _run("run-all", "--output-dir", run_dir, "--seed", 7, *FAST_OVERRIDES) == 0
        out = capsys.readouterr().out
        for stage in ("synth", "pretrain", "segment", "features", "cluster", "evaluate", "render-map"):
            assert f"DONE stage={stage}" in out
        for name in ("vae.spgw", "pixel_features.spgf", "segmentation.hsil", "superpixel_features.spgf",
                     "adjacency.txt", "gcn.spgw", "prediction.hsil", "prediction.ppm", "ground_truth.ppm"):
            assert (run_dir / name).is_file(), name
        assert len((run_dir / "train_log.tsv").read_text().splitlines()) == 3
        report = read_report(run_dir / "report.tsv")
        assert set(report) == {"OA", "AA", "Kappa", "NMI", "ARI", "F1", "Precision", "Recall", "Purity"}
        assert 0.0 <= report["OA"] <= 100.0

    def test_same_seed_same_artifacts(self, tmp_path):
        artifacts = ("report.tsv", "prediction.hsil", "prediction.ppm", "ground_truth.ppm",
                     "segmentation.hsil", "adjacency.txt", "gcn.spgw", "train_log.tsv")
        runs = []
        for run in ("a", "b"):
            out = tmp_path / run
            assert _run("run-all", "--output-dir", out, "--seed", 11, "--features_source=spectral",
                        *FAST_OVERRIDES) == 0
            runs.append({name: (out / name).read_bytes() for name in artifacts})
        for name in artifacts:
            assert runs[0][name] == runs[1][name], name

    @pytest.mark.slow
    def test_synthetic_scene_is_recovered(self, tmp_path):
        out = tmp_path / "synthetic"
        assert _run("run-all", "--config", CONFIGS / "synthetic.toml", "--output-dir", out) == 0
        report = read_report(out / "report.tsv")
        assert report["OA"] >= 90.0
        assert report["Kappa"] >= 85.0
