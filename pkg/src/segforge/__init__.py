"""segforge: deterministic object-segment composition into annotated scenes."""

from . import kernels
from .config import Mode, PipelineConfig, load_config
from .errors import (
    BackendError,
    CompositeError,
    ConfigError,
    GenerationAborted,
    LayoutError,
    ManifestError,
    SegforgeError,
    SegmentDataError,
)
from .pipeline import derive_image_seed, generate_dataset

__version__ = "0.1.0"

__all__ = [
    "kernels",
    "Mode",
    "PipelineConfig",
    "load_config",
    "generate_dataset",
    "derive_image_seed",
    "SegforgeError",
    "ConfigError",
    "ManifestError",
    "SegmentDataError",
    "LayoutError",
    "CompositeError",
    "BackendError",
    "GenerationAborted",
    "__version__",
]
