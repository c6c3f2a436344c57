"""Exception hierarchy for the pipeline."""


class SegforgeError(Exception):
    """Base class for all pipeline errors."""


class ConfigError(SegforgeError):
    """Invalid configuration file or parameter combination."""


class ManifestError(SegforgeError):
    """Unreadable, empty, or inconsistent segment manifest / scores file."""


class SegmentDataError(SegforgeError):
    """Segment raster or mask fails to load or violates its metadata."""


class LayoutError(SegforgeError):
    """Layout cannot be sampled: infeasible size bin, bad histogram, or a
    missing annotation file for the COCO-prior strategy."""


class CompositeError(SegforgeError):
    """Scene rasterization failure (off-canvas segment, unknown id)."""


class BackendError(SegforgeError):
    """Relighting or expression backend unreachable or contract-violating."""


class GenerationAborted(SegforgeError):
    """Per-image failure rate exceeded the configured threshold."""

    def __init__(self, message: str, backend_related: bool = False):
        super().__init__(message)
        self.backend_related = backend_related
