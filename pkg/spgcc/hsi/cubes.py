from __future__ import annotations

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from spgcc.errors import ParameterError
from spgcc.models import HsiCube, PixelCubeBatch


def extract_pixel_cubes(cube: HsiCube, window: int) -> PixelCubeBatch:
    """One window×window×h neighbourhood per pixel; borders are mirror-padded (edge not repeated)."""
    if window < 1 or window % 2 == 0:
        raise ParameterError(f"window size must be a positive odd number, got {window}")
    pad = window // 2
    padded = np.pad(cube.values, ((pad, pad), (pad, pad), (0, 0)), mode="reflect")
    windows = sliding_window_view(padded, (window, window), axis=(0, 1))
    return PixelCubeBatch(windows=windows, window=window)
