import os
import tempfile
from pathlib import Path

# --- Directory paths (all overridable via environment variables) ---
OUTPUT_DIR: Path = Path(os.environ.get("SPGCC_OUTPUT_DIR", "spgcc-run"))
LOG_DIR: Path = Path(os.environ.get("SPGCC_LOG_DIR", Path(tempfile.gettempdir()) / "spgcc" / "logs"))

# --- Logging ---
PRETRAIN_LOG_NAME: str = "pretrain"
TRAINER_LOG_NAME: str = "contrastive_trainer"
PIPELINE_LOG_NAME: str = "pipeline"

# --- Worker pool (feature export) ---
DEFAULT_MAX_WORKERS: int = int(os.environ.get("SPGCC_MAX_WORKERS", "4"))
DEFAULT_EXPORT_BATCH_SIZE: int = int(os.environ.get("SPGCC_EXPORT_BATCH_SIZE", "256"))

# --- Binary formats ---
HSI_MAGIC: bytes = b"HSIF"
LABEL_MAGIC: bytes = b"HSIL"
FEATURE_MAGIC: bytes = b"SPGF"
CHECKPOINT_MAGIC: bytes = b"SPGW"

# --- Artifact file names (inside the run's output directory) ---
CUBE_FILE: str = "cube.hsif"
LABELS_FILE: str = "labels.hsil"
VAE_CHECKPOINT_FILE: str = "vae.spgw"
PIXEL_FEATURES_FILE: str = "pixel_features.spgf"
SEGMENTATION_FILE: str = "segmentation.hsil"
SUPERPIXEL_FEATURES_FILE: str = "superpixel_features.spgf"
ADJACENCY_FILE: str = "adjacency.txt"
GCN_CHECKPOINT_FILE: str = "gcn.spgw"
TRAIN_LOG_FILE: str = "train_log.tsv"
PREDICTION_FILE: str = "prediction.hsil"
REPORT_FILE: str = "report.tsv"
PREDICTION_MAP_FILE: str = "prediction.ppm"
GROUND_TRUTH_MAP_FILE: str = "ground_truth.ppm"

# --- Tensor engine ---
BATCHNORM_EPS: float = 1e-5
BATCHNORM_MOMENTUM: float = 0.1
ADAM_BETA1: float = 0.9
ADAM_BETA2: float = 0.999
ADAM_EPS: float = 1e-8
GRADCHECK_STEP: float = 1e-5
GRADCHECK_TOLERANCE: float = 1e-4

# --- PCA (cyclic Jacobi) ---
JACOBI_TOLERANCE: float = 1e-12
JACOBI_MAX_SWEEPS: int = 100
# beyond this |theta| the small-angle form 1/(2·theta) replaces the exact rotation
JACOBI_THETA_LIMIT: float = 1e150

# --- Segmentation ---
SLIC_ITERATIONS: int = 10
DEFAULT_COMPACTNESS: float = 1.0

# --- Pre-training network ---
ENCODER_CHANNELS: tuple = (8, 16, 32)
ENCODER_DEPTH_KERNELS: tuple = (7, 5, 3)
CONV2D_CHANNELS: int = 64
POOL_GRID: int = 4
ENCODER_HIDDEN: int = 512
LATENT_DIM: int = 128
DECODER_HIDDEN: int = 256
LOGVAR_CLAMP: float = 10.0

# --- Contrastive clustering ---
KMEANS_MAX_ITER: int = 300
DEFAULT_WEIGHT_DECAY: float = 5e-4

# --- Rendering ---
MAP_SATURATION: int = 75
MAP_VALUE: int = 95
