import itertools
import math

import numpy as np
import pytest

from spgcc.errors import LabelRangeError, ParameterError, ShapeError
from spgcc.metrics import compute_metrics, contingency, hungarian_match, matched_mass, read_report, write_report
from spgcc.models import LabelRaster, MetricReport
from spgcc.render import palette, render_map, save_map


def _raster(values) -> LabelRaster:
    return LabelRaster(labels=np.asarray(values, dtype=np.int64))


def _entropy(counts: np.ndarray) -> float:
    p = counts[counts > 0] / counts.sum()
    return float(-(p * np.log(p)).sum())


class TestHungarian:

    def test_swap_beats_identity(self):
        counts = np.array([[1, 2], [2, 1]])
        perm = hungarian_match(counts)
        np.testing.assert_array_equal(perm, [1, 0])
        assert matched_mass(counts, perm) == 4

    @pytest.mark.parametrize("seed", range(100))
    def test_matches_brute_force(self, seed):
        counts = np.random.default_rng(seed).integers(0, 20, size=(6, 6))
        best = max(sum(counts[i, p[i]] for i in range(6)) for p in itertools.permutations(range(6)))
        perm = hungarian_match(counts)
        assert sorted(perm.tolist()) == list(range(6))
        assert matched_mass(counts, perm) == best

    def test_more_clusters_than_classes(self):
        counts = np.array([[5, 0], [0, 3], [1, 1]])
        perm = hungarian_match(counts)
        assert matched_mass(counts, perm) == 8
        assert perm[2] >= 2

    def test_empty_table(self):
        with pytest.raises(ParameterError):
            hungarian_match(np.zeros((0, 0)))


class TestContingency:

    def test_counts_and_ids(self):
        table = contingency(np.array([3, 3, 7, 7, 7]), np.array([1, 2, 2, 2, 1]))
        np.testing.assert_array_equal(table.pred_ids, [3, 7])
        np.testing.assert_array_equal(table.true_ids, [1, 2])
        np.testing.assert_array_equal(table.counts, [[1, 1], [1, 2]])
        assert table.total == 5


class TestComputeMetrics:

    @pytest.mark.parametrize("seed", range(50))
    def test_nmi_and_ari_bounded_and_symmetric(self, seed):
        rng = np.random.default_rng(seed)
        a = _raster(rng.integers(1, 5, size=(1, 80)))
        b = _raster(rng.integers(1, 4, size=(1, 80)))
        forward, backward = compute_metrics(a, b), compute_metrics(b, a)
        assert 0.0 <= forward.NMI <= 100.0
        assert -100.0 <= forward.ARI <= 100.0
        assert forward.NMI == pytest.approx(backward.NMI, abs=1e-9)
        assert forward.ARI == pytest.approx(backward.ARI, abs=1e-9)

    def test_perfect_prediction(self):
        truth = _raster([[1, 1, 2], [2, 3, 3]])
        report = compute_metrics(truth, truth)
        for name, value in report.to_dict().items():
            assert value == pytest.approx(100.0), name

    def test_relabeled_prediction_is_still_perfect(self):
        truth = _raster([[1, 1, 2], [2, 3, 3]])
        pred = _raster([[3, 3, 1], [1, 2, 2]])
        report = compute_metrics(pred, truth)
        assert report.OA == 100.0
        assert report.Kappa == pytest.approx(100.0)
        assert report.ARI == pytest.approx(100.0)

    def test_single_cluster_over_two_balanced_classes(self):
        report = compute_metrics(_raster([[1, 1, 1, 1]]), _raster([[1, 1, 2, 2]]))
        assert report.OA == 50.0
        assert report.AA == 50.0
        assert report.Kappa == pytest.approx(0.0, abs=1e-12)
        assert report.ARI == pytest.approx(0.0, abs=1e-12)
        assert report.NMI == pytest.approx(0.0, abs=1e-12)
        assert report.Purity == 50.0
        # every pair shares the cluster, a third of them also share the class
        assert report.Precision == pytest.approx(100.0 / 3.0)
        assert report.Recall == 100.0

    def test_one_class_present(self):
        report = compute_metrics(_raster([[2, 2, 2]]), _raster([[1, 1, 1]]))
        assert report.OA == 100.0
        assert report.Kappa == 100.0

    def test_unlabeled_pixels_ignored(self):
        pred = _raster([[1, 2, 1, 2]])
        truth = _raster([[1, 0, 2, 0]])
        assert compute_metrics(pred, truth).OA == 50.0

    def test_agrees_with_direct_formulas(self, rng):
        t = rng.integers(1, 5, size=400)
        p = rng.integers(1, 4, size=400)
        report = compute_metrics(_raster(p[None, :]), _raster(t[None, :]))
        table = contingency(p, t).counts.astype(np.float64)
        n = table.sum()

        mutual = sum(
            table[i, j] / n * math.log(n * table[i, j] / (table[i].sum() * table[:, j].sum()))
            for i in range(table.shape[0])
            for j in range(table.shape[1])
            if table[i, j] > 0
        )
        nmi = mutual / ((_entropy(table.sum(axis=0)) + _entropy(table.sum(axis=1))) / 2.0)
        assert report.NMI == pytest.approx(100.0 * nmi, abs=1e-8)

        def pairs(x):
            return (x * (x - 1) / 2.0).sum()

        index = pairs(table)
        expected = pairs(table.sum(axis=1)) * pairs(table.sum(axis=0)) / pairs(np.array([n]))
        maximum = (pairs(table.sum(axis=1)) + pairs(table.sum(axis=0))) / 2.0
        assert report.ARI == pytest.approx(100.0 * (index - expected) / (maximum - expected), abs=1e-8)

        precision = index / pairs(table.sum(axis=1))
        recall = index / pairs(table.sum(axis=0))
        assert report.Precision == pytest.approx(100.0 * precision)
        assert report.Recall == pytest.approx(100.0 * recall)
        assert report.F1 == pytest.approx(100.0 * 2 * precision * recall / (precision + recall))
        assert report.Purity == pytest.approx(100.0 * table.max(axis=1).sum() / n)

    def test_oa_matches_best_permutation(self, rng):
        t = rng.integers(1, 4, size=60)
        p = rng.integers(1, 4, size=60)
        best = max(np.mean(np.array(perm)[p - 1] == t - 1) for perm in itertools.permutations(range(3)))
        assert compute_metrics(_raster(p[None, :]), _raster(t[None, :])).OA == pytest.approx(100.0 * best)

    def test_needs_labeled_pixels(self):
        with pytest.raises(ParameterError):
            compute_metrics(_raster([[1, 2]]), _raster([[0, 0]]))

    def test_shape_mismatch(self):
        with pytest.raises(ShapeError):
            compute_metrics(_raster([[1, 2]]), _raster([[1], [2]]))


class TestReport:

    def test_nine_lines_two_decimals(self, tmp_path):
        report = MetricReport(OA=91.234, AA=90.0, Kappa=88.5, NMI=80.0, ARI=75.25, F1=70.0,
                              Precision=65.0, Recall=60.0, Purity=92.0)
        write_report(tmp_path / "report.tsv", report)
        lines = (tmp_path / "report.tsv").read_text().splitlines()
        assert lines[0] == "OA\t91.23"
        assert [line.split("\t")[0] for line in lines] == MetricReport.get_headers()
        assert read_report(tmp_path / "report.tsv")["ARI"] == 75.25


class TestRender:

    def test_palette(self):
        colors = palette(4)
        assert colors.shape == (5, 3)
        np.testing.assert_array_equal(colors[0], [0, 0, 0])
        np.testing.assert_array_equal(colors[1], [242, 61, 61])
        assert len({tuple(c) for c in colors}) == 5

    def test_single_class_map(self, tmp_path):
        path = save_map(tmp_path / "map.ppm", _raster(np.ones((3, 5))), 1)
        raw = path.read_bytes()
        header = b"P6\n5 3\n255\n"
        assert raw.startswith(header)
        assert len(raw) == len(header) + 3 * 5 * 3
        assert raw[len(header):len(header) + 3] == bytes([242, 61, 61])

    def test_unlabeled_pixels_are_black(self):
        image = np.asarray(render_map(_raster(np.zeros((2, 2))), 3))
        np.testing.assert_array_equal(image, 0)

    def test_label_above_palette(self):
        with pytest.raises(LabelRangeError):
            render_map(_raster([[1, 4]]), 3)
