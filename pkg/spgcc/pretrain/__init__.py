"""Pixel-level VAE pre-training and pooled-feature export."""

from spgcc.pretrain.losses import loss_distribution, loss_reconstruction, reparameterize, total_loss
from spgcc.pretrain.network import VaeArchitecture, VaeNetwork
from spgcc.pretrain.trainer import PretrainResult, VaePretrainer, load_vae, pretrain, save_vae

__all__ = [
    "PretrainResult",
    "VaeArchitecture",
    "VaeNetwork",
    "VaePretrainer",
    "load_vae",
    "loss_distribution",
    "loss_reconstruction",
    "pretrain",
    "reparameterize",
    "save_vae",
    "total_loss",
]
