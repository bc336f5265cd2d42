import numpy as np
import pytest
from scipy import sparse

from spgcc.errors import DimensionMismatchError, ParameterError, ShapeError
from spgcc.graph import (
    build_adjacency,
    build_graph,
    load_edge_list,
    normalize_adjacency,
    save_edge_list,
    superpixel_features,
)
from spgcc.segmentation import build_segmentation

FOUR_BLOCKS = np.array([
    [0, 0, 1, 1],
    [0, 0, 1, 1],
    [2, 2, 3, 3],
    [2, 2, 3, 3],
])


def _dense_propagation(adjacency: np.ndarray) -> np.ndarray:
    looped = adjacency + np.eye(len(adjacency))
    scale = np.diag(1.0 / np.sqrt(looped.sum(axis=1)))
    return scale @ looped @ scale


def _edges_by_raster_id(raster: np.ndarray, connectivity: int) -> set:
    seg = build_segmentation(raster)
    raster_id = np.array([raster.reshape(-1)[members[0]] for members in seg.members])
    rows, cols = sparse.triu(build_adjacency(seg, connectivity=connectivity)).nonzero()
    return {
        (min(raster_id[i], raster_id[j]), max(raster_id[i], raster_id[j]))
        for i, j in zip(rows, cols)
    }


class TestSuperpixelFeatures:

    def test_singleton_keeps_pixel_feature(self, rng):
        seg = build_segmentation(np.arange(4).reshape(2, 2))
        x_p = rng.normal(size=(4, 3))
        np.testing.assert_allclose(superpixel_features(seg.normalized_map, x_p), x_p)

    def test_identical_pixels(self):
        seg = build_segmentation(np.zeros((1, 2), dtype=np.int64))
        out = superpixel_features(seg.normalized_map, np.array([[1.5, -2.0], [1.5, -2.0]]))
        np.testing.assert_allclose(out, [[1.5, -2.0]])

    def test_matches_averaging_loop(self, rng):
        seg = build_segmentation(rng.integers(0, 6, size=(5, 5)))
        x_p = rng.normal(size=(25, 4))
        expected = np.stack([x_p[members].mean(axis=0) for members in seg.members])
        np.testing.assert_allclose(superpixel_features(seg.normalized_map, x_p), expected, atol=1e-12)

    def test_row_count_mismatch(self, rng):
        seg = build_segmentation(np.zeros((2, 2), dtype=np.int64))
        with pytest.raises(ShapeError):
            superpixel_features(seg.normalized_map, rng.normal(size=(5, 2)))


class TestAdjacency:

    def test_two_superpixels_side_by_side(self):
        adjacency = build_adjacency(build_segmentation(np.array([[0, 1]])))
        np.testing.assert_array_equal(adjacency.toarray(), [[0, 1], [1, 0]])

    def test_four_blocks_all_touch_under_eight_connectivity(self):
        adjacency = build_adjacency(build_segmentation(FOUR_BLOCKS), connectivity=8).toarray()
        np.testing.assert_array_equal(adjacency, np.ones((4, 4)) - np.eye(4))

    def test_diagonal_blocks_apart_under_four_connectivity(self):
        adjacency = build_adjacency(build_segmentation(FOUR_BLOCKS), connectivity=4).toarray()
        assert adjacency[0, 3] == 0
        assert adjacency[1, 2] == 0
        assert adjacency[0, 1] == 1

    def test_single_superpixel(self):
        adjacency = build_adjacency(build_segmentation(np.zeros((3, 3), dtype=np.int64)))
        np.testing.assert_array_equal(adjacency.toarray(), [[0]])

    def test_binary_and_symmetric(self, rng):
        seg = build_segmentation(rng.integers(0, 8, size=(9, 9)))
        adjacency = build_adjacency(seg).toarray()
        assert set(np.unique(adjacency)) <= {0.0, 1.0}
        np.testing.assert_array_equal(adjacency, adjacency.T)
        assert np.all(np.diag(adjacency) == 0)

    @pytest.mark.parametrize("connectivity", [4, 8])
    @pytest.mark.parametrize("seed", range(20))
    def test_relabeling_superpixels_keeps_adjacency(self, seed, connectivity):
        rng = np.random.default_rng(seed)
        raster = rng.integers(0, 10, size=(9, 9))
        perm = rng.permutation(10)
        original = _edges_by_raster_id(raster, connectivity)
        inverse = np.argsort(perm)
        relabeled = {
            (min(inverse[a], inverse[b]), max(inverse[a], inverse[b]))
            for a, b in _edges_by_raster_id(perm[raster], connectivity)
        }
        assert relabeled == original

    def test_unknown_connectivity(self):
        with pytest.raises(ParameterError):
            build_adjacency(build_segmentation(FOUR_BLOCKS), connectivity=6)


class TestNormalization:

    def test_isolated_node(self):
        propagation, degrees = normalize_adjacency(sparse.csr_array((1, 1)))
        np.testing.assert_array_equal(propagation.toarray(), [[1.0]])
        np.testing.assert_array_equal(degrees, [1.0])

    def test_two_connected_nodes(self):
        propagation, _ = normalize_adjacency(sparse.csr_array(np.array([[0.0, 1.0], [1.0, 0.0]])))
        np.testing.assert_allclose(propagation.toarray(), [[0.5, 0.5], [0.5, 0.5]])

    def test_path_graph_matches_dense(self):
        adjacency = np.array([[0.0, 1.0, 0.0], [1.0, 0.0, 1.0], [0.0, 1.0, 0.0]])
        propagation, degrees = normalize_adjacency(sparse.csr_array(adjacency))
        dense = propagation.toarray()
        np.testing.assert_allclose(dense, _dense_propagation(adjacency), rtol=0, atol=1e-12)
        np.testing.assert_array_equal(dense, dense.T)
        np.testing.assert_array_equal(degrees, [2.0, 3.0, 2.0])

    @pytest.mark.parametrize("seed", range(20))
    def test_spectral_radius_at_most_one(self, seed):
        rng = np.random.default_rng(seed)
        seg = build_segmentation(rng.integers(0, 10, size=(9, 9)))
        propagation, _ = normalize_adjacency(build_adjacency(seg))
        v = rng.normal(size=seg.num_superpixels)
        for _ in range(200):
            w = propagation @ v
            assert np.linalg.norm(w) <= (1.0 + 1e-9) * np.linalg.norm(v)
            v = w / np.linalg.norm(w)
        assert np.max(np.abs(np.linalg.eigvalsh(propagation.toarray()))) <= 1.0 + 1e-9

    def test_build_graph(self, rng):
        seg = build_segmentation(FOUR_BLOCKS)
        graph = build_graph(seg, rng.normal(size=(4, 3)))
        assert graph.num_nodes == 4
        np.testing.assert_allclose(graph.propagation.toarray(), np.full((4, 4), 0.25))

    def test_build_graph_feature_rows(self, rng):
        with pytest.raises(ShapeError):
            build_graph(build_segmentation(FOUR_BLOCKS), rng.normal(size=(3, 3)))


class TestEdgeList:

    def test_each_edge_once_sorted(self, tmp_path):
        adjacency = build_adjacency(build_segmentation(FOUR_BLOCKS))
        count = save_edge_list(tmp_path / "a.txt", adjacency)
        assert count == 6
        lines = (tmp_path / "a.txt").read_text().splitlines()
        assert lines == ["0 1", "0 2", "0 3", "1 2", "1 3", "2 3"]

    def test_reload_restores_adjacency(self, tmp_path, rng):
        adjacency = build_adjacency(build_segmentation(rng.integers(0, 6, size=(8, 8))))
        save_edge_list(tmp_path / "a.txt", adjacency)
        loaded = load_edge_list(tmp_path / "a.txt", adjacency.shape[0])
        np.testing.assert_array_equal(loaded.toarray(), adjacency.toarray())

    def test_graph_without_edges(self, tmp_path):
        adjacency = build_adjacency(build_segmentation(np.zeros((2, 2), dtype=np.int64)))
        assert save_edge_list(tmp_path / "a.txt", adjacency) == 0
        np.testing.assert_array_equal(load_edge_list(tmp_path / "a.txt", 1).toarray(), [[0]])

    def test_node_outside_graph(self, tmp_path):
        (tmp_path / "a.txt").write_text("0 1\n1 4\n")
        with pytest.raises(DimensionMismatchError):
            load_edge_list(tmp_path / "a.txt", 4)
