"""Privacy-preserving video synthesis from ultra-low-resolution thermal heatmaps.

The pipeline turns a stream of tiny thermal-sensor heatmaps plus a single
appearance code (inverted from one pre-taken, privacy-free photo) into a live
RGB video feed: heatmaps carry pose and position, the code carries appearance
and background, and a conditional generator fuses the two at 8x the heatmap
resolution.
"""

from .config import (
    RGB_TO_HEATMAP_SCALE,
    DataConfig,
    ExperimentConfig,
    LossConfig,
    ModelConfig,
    ServiceConfig,
    TrainConfig,
)
from .errors import (
    BundleError,
    ConfigError,
    DatasetError,
    DetectorUnavailableError,
    DimensionError,
    NumericalError,
    ServiceError,
    ThermalGenError,
    TrainingDivergedError,
)

__version__ = "0.1.0"

__all__ = [
    "RGB_TO_HEATMAP_SCALE",
    "DataConfig",
    "ExperimentConfig",
    "LossConfig",
    "ModelConfig",
    "ServiceConfig",
    "TrainConfig",
    "BundleError",
    "ConfigError",
    "DatasetError",
    "DetectorUnavailableError",
    "DimensionError",
    "NumericalError",
    "ServiceError",
    "ThermalGenError",
    "TrainingDivergedError",
    "__version__",
]
