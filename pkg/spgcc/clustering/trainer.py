from __future__ import annotations

import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Optional

import numpy as np
import pandas as pd

from spgcc.clustering.gcn import GcnParams, gcn_forward, init_gcn, sample_pixels
from spgcc.clustering.kmeans import confidence_select, kmeans, recompute_centers
from spgcc.clustering.losses import loss_clc, loss_sla, total_loss
from spgcc.config import TRAINER_LOG_NAME
from spgcc.engine.optim import Adam
from spgcc.engine.tensor import Tape, backward, no_grad
from spgcc.errors import ShapeError
from spgcc.models import ClusterState, EmbeddingViews, LabelRaster, Segmentation, SuperpixelGraph
from spgcc.schemas import GcnSettings, TrainSettings
from spgcc.utils import make_rng, setup_logging

# Seed streams
_INIT_STREAM = 10
_SAMPLE_STREAM = 11
_KMEANS_STREAM = 12

TRAIN_LOG_COLUMNS = ["epoch", "loss_sla", "loss_clc", "total"]


@dataclass
class TrainResult:
    params: GcnParams
    superpixel_labels: np.ndarray
    pixel_labels: LabelRaster
    history: pd.DataFrame
    state: ClusterState


class ContrastiveTrainer:
    """
    Alternates K-means refreshes with gradient steps on L_SLA + α·L_CLC.

    The K-means state (assignments, high-confidence sets) is refreshed every
    `kmeans_interval` epochs and reused in between; the centers themselves are rebuilt
    from the current embeddings every epoch so the contrast term stays differentiable.
    """

    def __init__(self, settings: TrainSettings, gcn: GcnSettings, num_classes: int, seed: int) -> None:
        self.settings = settings
        self.gcn = gcn
        self.num_classes = num_classes
        self.seed = seed
        self.logger: logging.Logger = setup_logging(TRAINER_LOG_NAME)

    # ------------------------------------------------------------------
    # Clustering refresh
    # ------------------------------------------------------------------

    def refresh(self, views: EmbeddingViews, epoch: int) -> ClusterState:
        embeddings = views.concatenated()
        result = kmeans(embeddings, self.num_classes, seed=int(make_rng(self.seed, _KMEANS_STREAM, epoch).integers(2 ** 32)))
        fraction = self.settings.lambda_ if self.settings.high_confidence else 1.0
        distances, confident = confidence_select(embeddings, result.assignments, result.centers, fraction)
        selected = sum(len(v) for v in confident.values())
        self.logger.info(
            f"Epoch {epoch}: k-means objective {result.objective:.6f} after {result.iterations} iterations, "
            f"{selected}/{len(embeddings)} high-confidence superpixels"
        )
        return ClusterState(
            assignments=result.assignments,
            centers=result.centers,
            distances=distances,
            confident=confident,
            objective=result.objective,
        )

    # ------------------------------------------------------------------
    # Training loop
    # ------------------------------------------------------------------

    def train(
        self,
        graph: SuperpixelGraph,
        superpixel_features: np.ndarray,
        pixel_features: np.ndarray,
        seg: Segmentation,
        params: Optional[GcnParams] = None,
    ) -> TrainResult:
        settings = self.settings
        if superpixel_features.shape[0] != graph.num_nodes:
            raise ShapeError(
                f"train: {superpixel_features.shape[0]} superpixel feature rows, graph has {graph.num_nodes} nodes"
            )
        params = params or init_gcn(
            superpixel_features.shape[1],
            self.gcn.hidden,
            self.gcn.out,
            self.gcn.layers,
            make_rng(self.seed, _INIT_STREAM),
            use_mwa=settings.use_mwa,
        )
        optimizer = Adam(params.parameters(), lr=settings.lr, weight_decay=settings.wd)
        sample_rng = make_rng(self.seed, _SAMPLE_STREAM)
        self.logger.info(
            f"Contrastive training: M={graph.num_nodes}, K={self.num_classes}, L={params.num_layers}, "
            f"epochs={settings.epochs}, lr={settings.lr}, alpha={settings.alpha}, lambda={settings.lambda_}, "
            f"tau={settings.tau}"
        )

        rows: List[Dict[str, float]] = []
        state: Optional[ClusterState] = None
        for epoch in range(1, settings.epochs + 1):
            sampled = sample_pixels(seg, pixel_features, sample_rng) if settings.use_psa else superpixel_features
            with Tape():
                views = gcn_forward(graph.propagation, superpixel_features, sampled, params)
                if state is None or (epoch - 1) % settings.kmeans_interval == 0:
                    state = self.refresh(views, epoch)

                sla = loss_sla(views) if settings.use_sla else None
                clc = None
                if settings.use_clc:
                    c1, c2, valid = recompute_centers(views.sp1, views.sp2, state.confident)
                    state.valid_classes = valid
                    if len(valid) >= 2:
                        clc = loss_clc(c1, c2, settings.tau)
                        state.view1_centers, state.view2_centers = c1.data, c2.data
                    else:
                        self.logger.warning(f"Epoch {epoch}: {len(valid)} valid center(s), center contrast skipped")
                loss = total_loss(sla, clc, settings.alpha)
                if loss is not None:
                    optimizer.zero_grad()
                    backward(loss)
            if loss is not None:
                optimizer.step()

            row = {
                "epoch": epoch,
                "loss_sla": sla.item() if sla is not None else np.nan,
                "loss_clc": clc.item() if clc is not None else np.nan,
                "total": loss.item() if loss is not None else np.nan,
            }
            rows.append(row)
            self.logger.info(
                f"Epoch {epoch}/{settings.epochs}: sla={row['loss_sla']:.6f} clc={row['loss_clc']:.6f} "
                f"total={row['total']:.6f}"
            )

        with no_grad():
            views = gcn_forward(graph.propagation, superpixel_features, superpixel_features, params)
        final = self.refresh(views, settings.epochs + 1)
        pixel_labels = LabelRaster(labels=final.assignments[seg.labels] + 1, num_classes=self.num_classes)
        return TrainResult(
            params=params,
            superpixel_labels=final.assignments,
            pixel_labels=pixel_labels,
            history=pd.DataFrame(rows, columns=TRAIN_LOG_COLUMNS),
            state=final,
        )


def write_train_log(path: Path, history: pd.DataFrame) -> None:
    """One tab-separated line per epoch: epoch, loss_sla, loss_clc, total (no header)."""
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    history.to_csv(path, sep="\t", header=False, index=False, float_format="%.6f", na_rep="nan")
