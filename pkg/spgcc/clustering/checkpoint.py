from pathlib import Path

from spgcc.clustering.gcn import GcnParams, params_from_arrays
from spgcc.hsi.formats import load_checkpoint, save_checkpoint


def save_gcn(path: Path, params: GcnParams) -> None:
    """Shared layers in order, then the two branch matrices (written twice when tied)."""
    save_checkpoint(path, params.state_arrays())


def load_gcn(path: Path, use_mwa: bool = True) -> GcnParams:
    return params_from_arrays(load_checkpoint(path), use_mwa=use_mwa)
