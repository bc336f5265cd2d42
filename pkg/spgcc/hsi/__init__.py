"""Hyperspectral cube I/O, band reduction, pixel-cube extraction and synthetic scenes."""

from spgcc.hsi.cubes import extract_pixel_cubes
from spgcc.hsi.formats import (
    load_checkpoint,
    load_features,
    load_hsi,
    load_labels,
    save_checkpoint,
    save_features,
    save_hsi,
    save_labels,
)
from spgcc.hsi.matfile import import_mat, load_mat_cube, load_mat_labels
from spgcc.hsi.pca import fit_pca, jacobi_eigh, pca_reduce
from spgcc.hsi.synth import generate_synthetic

__all__ = [
    "extract_pixel_cubes",
    "fit_pca",
    "generate_synthetic",
    "import_mat",
    "jacobi_eigh",
    "load_checkpoint",
    "load_features",
    "load_hsi",
    "load_labels",
    "load_mat_cube",
    "load_mat_labels",
    "pca_reduce",
    "save_checkpoint",
    "save_features",
    "save_hsi",
    "save_labels",
]
