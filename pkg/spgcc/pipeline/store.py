import logging
from datetime import datetime
from pathlib import Path
from typing import Dict, NamedTuple, Optional

from spgcc.config import (
    ADJACENCY_FILE,
    CUBE_FILE,
    GCN_CHECKPOINT_FILE,
    GROUND_TRUTH_MAP_FILE,
    LABELS_FILE,
    OUTPUT_DIR,
    PIPELINE_LOG_NAME,
    PIXEL_FEATURES_FILE,
    PREDICTION_FILE,
    PREDICTION_MAP_FILE,
    REPORT_FILE,
    SEGMENTATION_FILE,
    SUPERPIXEL_FEATURES_FILE,
    TRAIN_LOG_FILE,
    VAE_CHECKPOINT_FILE,
)
from spgcc.errors import MissingArtifactError
from spgcc.models import ArtifactInfo
from spgcc.utils import setup_logging


class Artifact(NamedTuple):
    filename: str
    producer: str


ARTIFACTS: Dict[str, Artifact] = {
    "cube": Artifact(CUBE_FILE, "synth"),
    "labels": Artifact(LABELS_FILE, "synth"),
    "vae": Artifact(VAE_CHECKPOINT_FILE, "pretrain"),
    "pixel_features": Artifact(PIXEL_FEATURES_FILE, "pretrain"),
    "segmentation": Artifact(SEGMENTATION_FILE, "segment"),
    "superpixel_features": Artifact(SUPERPIXEL_FEATURES_FILE, "features"),
    "adjacency": Artifact(ADJACENCY_FILE, "features"),
    "gcn": Artifact(GCN_CHECKPOINT_FILE, "cluster"),
    "train_log": Artifact(TRAIN_LOG_FILE, "cluster"),
    "prediction": Artifact(PREDICTION_FILE, "cluster"),
    "report": Artifact(REPORT_FILE, "evaluate"),
    "prediction_map": Artifact(PREDICTION_MAP_FILE, "render-map"),
    "ground_truth_map": Artifact(GROUND_TRUTH_MAP_FILE, "render-map"),
}


class ArtifactStore:
    """Resolves artifact paths inside one run directory and checks stage prerequisites."""

    def __init__(
        self,
        output_dir: Path = OUTPUT_DIR,
        cube_path: Optional[Path] = None,
        labels_path: Optional[Path] = None,
    ) -> None:
        self.output_dir = Path(output_dir)
        self.output_dir.mkdir(parents=True, exist_ok=True)
        self.logger: logging.Logger = setup_logging(PIPELINE_LOG_NAME)
        # dataset files given explicitly replace the synthetic ones
        self._external: Dict[str, Path] = {}
        if cube_path is not None:
            self._external["cube"] = Path(cube_path)
        if labels_path is not None:
            self._external["labels"] = Path(labels_path)

    def local_path(self, key: str) -> Path:
        return self.output_dir / ARTIFACTS[key].filename

    def path(self, key: str) -> Path:
        if key in self._external:
            return self._external[key]
        return self.local_path(key)

    def exists(self, key: str) -> bool:
        return self.path(key).is_file()

    def require(self, key: str) -> Path:
        """Path of an upstream artifact; raises MissingArtifactError naming the producing command."""
        path = self.path(key)
        if not path.is_file():
            self.logger.error(f"Missing artifact {path}")
            if key in self._external:
                raise MissingArtifactError(str(path), "import-mat")
            raise MissingArtifactError(path.name, ARTIFACTS[key].producer)
        return path

    def written(self, key: str) -> Path:
        path = self.path(key)
        self.logger.info(f"Wrote {key}: {path} ({path.stat().st_size / 1024:.1f} KB)")
        return path

    def discover(self) -> Dict[str, ArtifactInfo]:
        """Every known artifact currently present."""
        found: Dict[str, ArtifactInfo] = {}
        for key, artifact in ARTIFACTS.items():
            path = self.path(key)
            if not path.is_file():
                continue
            stat = path.stat()
            found[key] = ArtifactInfo(
                path=path,
                producer=artifact.producer,
                size_kb=stat.st_size / 1024,
                modified=datetime.fromtimestamp(stat.st_mtime).strftime('%Y-%m-%d %H:%M:%S'),
            )
        self.logger.info(f"Discovered {len(found)} artifact(s) in {self.output_dir}")
        return found

    def get_stats(self) -> Dict:
        found = self.discover()
        return {
            'output_dir': str(self.output_dir),
            'total_artifacts': len(found),
            'total_size_kb': sum(info.size_kb for info in found.values()),
            'missing': sorted(set(ARTIFACTS) - set(found)),
            'artifacts': found,
        }
