"""
The pipeline as separate stages that communicate only through files in the run directory:

    synth → pretrain → segment → features → cluster → evaluate → render-map

Every stage returns a StageResult whose values end up on the CLI's DONE line.
"""

from __future__ import annotations

import logging
from pathlib import Path
from typing import List, Optional

import numpy as np

from spgcc.clustering import ContrastiveTrainer, save_gcn, write_train_log
from spgcc.config import PIPELINE_LOG_NAME
from spgcc.errors import DimensionMismatchError
from spgcc.graph import build_adjacency, load_edge_list, normalize_adjacency, save_edge_list, superpixel_features
from spgcc.hsi import (
    extract_pixel_cubes,
    generate_synthetic,
    import_mat,
    load_features,
    load_hsi,
    load_labels,
    pca_reduce,
)
from spgcc.hsi.formats import save_features, save_hsi, save_labels
from spgcc.metrics import compute_metrics, write_report
from spgcc.models import FeatureMatrix, HsiCube, LabelRaster, Segmentation, StageResult, SuperpixelGraph
from spgcc.pipeline.store import ArtifactStore
from spgcc.pretrain import pretrain, save_vae
from spgcc.render import save_map
from spgcc.schemas import PipelineConfig
from spgcc.segmentation import load_segmentation, make_segmenter, save_segmentation, sp_segmentation_accuracy
from spgcc.utils import setup_logging, timed


class Pipeline:
    """Runs stages of one configured experiment against an ArtifactStore."""

    def __init__(self, config: PipelineConfig, store: Optional[ArtifactStore] = None) -> None:
        self.config = config
        self.store = store or ArtifactStore(config.output_dir, config.cube_path, config.labels_path)
        self.logger: logging.Logger = setup_logging(PIPELINE_LOG_NAME)

    # ------------------------------------------------------------------
    # Shared loaders
    # ------------------------------------------------------------------

    def _cube(self) -> HsiCube:
        return load_hsi(self.store.require("cube"))

    def _reduced_cube(self) -> HsiCube:
        return pca_reduce(self._cube(), self.config.pca_bands)

    def _labels(self, shape) -> Optional[LabelRaster]:
        if not self.store.exists("labels"):
            return None
        return load_labels(self.store.path("labels"), self.config.num_classes, expected_shape=shape)

    def _segmentation(self) -> Segmentation:
        return load_segmentation(self.store.require("segmentation"))

    def _pixel_features(self, seg: Segmentation) -> np.ndarray:
        if self.config.features_source == "spectral":
            reduced = self._reduced_cube()
            if reduced.values.shape[:2] != seg.shape:
                raise DimensionMismatchError(f"cube is {reduced.values.shape[:2]}, segmentation is {seg.shape}")
            return reduced.spectra()
        return load_features(self.store.require("pixel_features"), expected_rows=seg.labels.size).values

    def _run(self, stage: str, fn) -> StageResult:
        self.logger.info(f"Stage {stage} started (output {self.store.output_dir})")
        with timed(self.logger, f"Stage {stage}") as clock:
            values = fn()
        return StageResult(stage=stage, values=values, seconds=clock["seconds"])

    # ------------------------------------------------------------------
    # Stages
    # ------------------------------------------------------------------

    def synth(self) -> StageResult:
        def run():
            s = self.config.synth
            cube, labels = generate_synthetic(
                s.height, s.width, s.bands, self.config.num_classes, s.noise, self.config.seed, s.block_size
            )
            save_hsi(self.store.local_path("cube"), cube)
            save_labels(self.store.local_path("labels"), labels)
            return {"height": cube.height, "width": cube.width, "bands": cube.bands, "classes": self.config.num_classes}

        return self._run("synth", run)

    def import_mat(
        self,
        cube_mat: Path,
        labels_mat: Optional[Path] = None,
        cube_key: Optional[str] = None,
        labels_key: Optional[str] = None,
    ) -> StageResult:
        """Stand-in for synth when the scene comes from a .mat file; honours cube_path / labels_path."""
        def run():
            cube, labels = import_mat(
                cube_mat,
                self.store.path("cube"),
                labels_mat,
                self.store.path("labels"),
                cube_key,
                labels_key,
            )
            self.store.written("cube")
            values = {"height": cube.height, "width": cube.width, "bands": cube.bands}
            if labels is not None:
                self.store.written("labels")
                values["classes"] = labels.num_classes
            return values

        return self._run("import-mat", run)

    def pretrain(self) -> StageResult:
        def run():
            cubes = extract_pixel_cubes(self._reduced_cube(), self.config.window)
            result = pretrain(cubes, self.config.vae, self.config.seed)
            save_vae(self.store.path("vae"), result.network)
            self.store.written("vae")
            save_features(self.store.path("pixel_features"), result.features)
            self.store.written("pixel_features")
            values = {"pixels": result.features.num_rows, "dim": result.features.dim, "epochs": self.config.vae.epochs}
            if result.epoch_losses:
                values["loss"] = float(result.epoch_losses[-1])
            return values

        return self._run("pretrain", run)

    def segment(self) -> StageResult:
        def run():
            reduced = self._reduced_cube()
            segmenter = make_segmenter(self.config.segmenter, self.config.compactness)
            seg = segmenter.segment(reduced, self.config.num_superpixels)
            save_segmentation(self.store.path("segmentation"), seg)
            self.store.written("segmentation")
            values = {"M": self.config.num_superpixels, "M_prime": seg.num_superpixels}
            labels = self._labels(seg.shape)
            if labels is not None:
                values["sp_accuracy"] = float(sp_segmentation_accuracy(seg, labels))
            return values

        return self._run("segment", run)

    def features(self) -> StageResult:
        def run():
            seg = self._segmentation()
            x_sp = superpixel_features(seg.normalized_map, self._pixel_features(seg))
            save_features(self.store.path("superpixel_features"), FeatureMatrix(x_sp))
            self.store.written("superpixel_features")
            edges = save_edge_list(self.store.path("adjacency"), build_adjacency(seg, self.config.connectivity))
            self.store.written("adjacency")
            return {"superpixels": seg.num_superpixels, "dim": x_sp.shape[1], "edges": edges,
                    "source": self.config.features_source}

        return self._run("features", run)

    def cluster(self) -> StageResult:
        def run():
            x_sp_path = self.store.require("superpixel_features")
            seg = self._segmentation()
            x_sp = load_features(x_sp_path, expected_rows=seg.num_superpixels).values
            adjacency = load_edge_list(self.store.require("adjacency"), seg.num_superpixels)
            propagation, degrees = normalize_adjacency(adjacency)
            graph = SuperpixelGraph(adjacency=adjacency, propagation=propagation, degrees=degrees, features=x_sp)
            x_p = self._pixel_features(seg)

            trainer = ContrastiveTrainer(self.config.train, self.config.gcn, self.config.num_classes, self.config.seed)
            result = trainer.train(graph, x_sp, x_p, seg)
            save_gcn(self.store.path("gcn"), result.params)
            self.store.written("gcn")
            write_train_log(self.store.path("train_log"), result.history)
            self.store.written("train_log")
            save_labels(self.store.path("prediction"), result.pixel_labels)
            self.store.written("prediction")

            values = {"epochs": self.config.train.epochs, "clusters": int(np.unique(result.superpixel_labels).size)}
            final = result.history["total"].iloc[-1]
            if not np.isnan(final):
                values["loss"] = float(final)
            return values

        return self._run("cluster", run)

    def evaluate(self) -> StageResult:
        def run():
            prediction = load_labels(self.store.require("prediction"))
            truth = load_labels(self.store.require("labels"), self.config.num_classes, expected_shape=prediction.shape)
            report = compute_metrics(prediction, truth)
            write_report(self.store.path("report"), report)
            self.store.written("report")
            return report.to_dict()

        return self._run("evaluate", run)

    def render_map(self, labels_path: Path, output: Path, num_classes: Optional[int] = None) -> StageResult:
        def run():
            raster = load_labels(Path(labels_path), num_classes or self.config.num_classes)
            save_map(output, raster, num_classes or self.config.num_classes)
            self.logger.info(f"Wrote map {output}")
            return {"height": raster.shape[0], "width": raster.shape[1], "output": str(output)}

        return self._run("render-map", run)

    def run_all(self) -> List[StageResult]:
        """Every stage in order; the synthetic scene is generated only when no cube exists yet."""
        results: List[StageResult] = []
        if not self.store.exists("cube"):
            results.append(self.synth())
        if self.config.features_source == "vae":
            results.append(self.pretrain())
        results += [self.segment(), self.features(), self.cluster()]
        if self.store.exists("labels"):
            results.append(self.evaluate())
            results.append(self.render_map(self.store.path("labels"), self.store.path("ground_truth_map")))
        results.append(self.render_map(self.store.path("prediction"), self.store.path("prediction_map")))
        return results
