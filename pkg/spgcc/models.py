from __future__ import annotations

from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple

import numpy as np
from scipy import sparse

from spgcc.engine.tensor import Tensor


@dataclass
class HsiCube:
    """H×W×C reflectance volume (raw or PCA-reduced)."""
    values: np.ndarray

    @property
    def height(self) -> int:
        return self.values.shape[0]

    @property
    def width(self) -> int:
        return self.values.shape[1]

    @property
    def bands(self) -> int:
        return self.values.shape[2]

    @property
    def num_pixels(self) -> int:
        return self.height * self.width

    def spectra(self) -> np.ndarray:
        """Pixel-major N×C view (row by row, column by column)."""
        return self.values.reshape(self.num_pixels, self.bands)


@dataclass
class LabelRaster:
    """H×W class ids; 0 marks unlabeled pixels."""
    labels: np.ndarray
    num_classes: Optional[int] = None

    @property
    def shape(self) -> Tuple[int, int]:
        return self.labels.shape

    def flat(self) -> np.ndarray:
        return self.labels.reshape(-1)


@dataclass
class PixelCubeBatch:
    """
    One w×w×h cube per pixel, centred on it.

    `windows` is a read-only view of shape (H, W, h, w, w) over the mirror-padded cube, so
    no per-pixel copy exists until a batch is materialized.
    """
    windows: np.ndarray
    window: int

    def __len__(self) -> int:
        return self.windows.shape[0] * self.windows.shape[1]

    @property
    def bands(self) -> int:
        return self.windows.shape[2]

    @property
    def coordinates(self) -> np.ndarray:
        rows, cols = np.divmod(np.arange(len(self)), self.windows.shape[1])
        return np.stack([rows, cols], axis=1)

    def cube(self, index: int) -> np.ndarray:
        """Cube of pixel `index` laid out w×w×h."""
        row, col = divmod(index, self.windows.shape[1])
        return np.transpose(self.windows[row, col], (1, 2, 0))

    def batch(self, indices: np.ndarray) -> np.ndarray:
        """Network input [B, 1, h, w, w] in float64."""
        rows, cols = np.divmod(np.asarray(indices), self.windows.shape[1])
        return self.windows[rows, cols][:, None].astype(np.float64)


@dataclass
class FeatureMatrix:
    """N×d feature rows, one per pixel (or per superpixel)."""
    values: np.ndarray

    @property
    def num_rows(self) -> int:
        return self.values.shape[0]

    @property
    def dim(self) -> int:
        return self.values.shape[1]


@dataclass
class Segmentation:
    """Superpixel partition of the image plane with its map matrices."""
    labels: np.ndarray
    num_superpixels: int
    members: List[np.ndarray]
    map_matrix: sparse.csr_array
    normalized_map: sparse.csr_array

    @property
    def shape(self) -> Tuple[int, int]:
        return self.labels.shape

    @property
    def sizes(self) -> np.ndarray:
        return np.array([len(m) for m in self.members])


@dataclass
class SuperpixelGraph:
    """Binary spatial adjacency, its renormalized propagation matrix and node features."""
    adjacency: sparse.csr_array
    propagation: sparse.csr_array
    degrees: np.ndarray
    features: Optional[np.ndarray] = None

    @property
    def num_nodes(self) -> int:
        return self.adjacency.shape[0]


@dataclass
class EmbeddingViews:
    """The four row-normalized encoder outputs."""
    sp1: Tensor
    sp2: Tensor
    p1: Tensor
    p2: Tensor

    def concatenated(self) -> np.ndarray:
        """Both superpixel views side by side as a plain array (K-means input)."""
        return np.concatenate([self.sp1.data, self.sp2.data], axis=1)


@dataclass
class ClusterState:
    """Result of one K-means refresh plus the high-confidence selection built on it."""
    assignments: np.ndarray
    centers: np.ndarray
    distances: np.ndarray
    confident: Dict[int, np.ndarray]
    view1_centers: Optional[np.ndarray] = None
    view2_centers: Optional[np.ndarray] = None
    valid_classes: List[int] = field(default_factory=list)
    objective: float = 0.0


@dataclass
class MetricReport:
    """Clustering metrics in percent."""
    OA: float
    AA: float
    Kappa: float
    NMI: float
    ARI: float
    F1: float
    Precision: float
    Recall: float
    Purity: float

    @classmethod
    def get_headers(cls) -> List[str]:
        return [f.name for f in fields(cls)]

    def to_dict(self) -> Dict[str, float]:
        return asdict(self)


@dataclass
class ArtifactInfo:
    """An artifact found in the run directory."""
    path: Path
    producer: str
    size_kb: float
    modified: str


@dataclass
class StageResult:
    """Summary of one pipeline stage, rendered as the DONE line."""
    stage: str
    values: Dict[str, Any] = field(default_factory=dict)
    seconds: float = 0.0

    def done_line(self) -> str:
        parts = [f"stage={self.stage}"]
        for key, value in self.values.items():
            parts.append(f"{key}={value:.6g}" if isinstance(value, float) else f"{key}={value}")
        parts.append(f"seconds={self.seconds:.2f}")
        return "DONE " + " ".join(parts)
