"""Superpixel graph contrastive clustering: dual-branch GCN, K-means refreshes, SLA + CLC."""

from spgcc.clustering.checkpoint import load_gcn, save_gcn
from spgcc.clustering.gcn import GcnParams, gcn_forward, init_gcn, sample_pixels
from spgcc.clustering.kmeans import KMeansResult, confidence_select, kmeans, recompute_centers
from spgcc.clustering.losses import loss_clc, loss_sla, total_loss
from spgcc.clustering.trainer import ContrastiveTrainer, TrainResult, write_train_log

__all__ = [
    "ContrastiveTrainer",
    "GcnParams",
    "KMeansResult",
    "TrainResult",
    "confidence_select",
    "gcn_forward",
    "init_gcn",
    "kmeans",
    "load_gcn",
    "loss_clc",
    "loss_sla",
    "recompute_centers",
    "sample_pixels",
    "save_gcn",
    "total_loss",
    "write_train_log",
]
