import numpy as np

from spgcc.models import HsiCube
from spgcc.segmentation.base import Segmenter, grid_shape


class GridSegmenter(Segmenter):
    """Regular rectangular blocks; ignores the spectra entirely."""

    name = "grid"

    def assign(self, cube: HsiCube, num_superpixels: int) -> np.ndarray:
        rows, cols = grid_shape(cube.height, cube.width, num_superpixels)
        block_row = np.arange(cube.height) * rows // cube.height
        block_col = np.arange(cube.width) * cols // cube.width
        return block_row[:, None] * cols + block_col[None, :]
