from spgcc.pipeline.stages import Pipeline
from spgcc.pipeline.store import ARTIFACTS, ArtifactStore

__all__ = ["ARTIFACTS", "ArtifactStore", "Pipeline"]
