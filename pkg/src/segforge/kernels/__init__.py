"""Hot-loop kernels with a compiled core and a numpy fallback.

The compiled extension is preferred when importable; set
``SEGFORGE_KERNELS=numpy`` or ``SEGFORGE_KERNELS=compiled`` to force a
backend (the latter raises if the extension was not built).
"""

import os

from . import fallback

_requested = os.environ.get("SEGFORGE_KERNELS", "auto")
if _requested not in ("auto", "compiled", "numpy"):
    raise ValueError(f"SEGFORGE_KERNELS must be auto|compiled|numpy, got {_requested!r}")

_impl = None
if _requested in ("auto", "compiled"):
    try:
        from . import _ckernels as _impl  # type: ignore[attr-defined]
    except ImportError:
        if _requested == "compiled":
            raise
        _impl = None

if _impl is None:
    _impl = fallback
    BACKEND = "numpy"
else:
    BACKEND = "compiled"

resolve_owner = _impl.resolve_owner
rle_encode = _impl.rle_encode
rle_decode = _impl.rle_decode
srgb_to_lab = _impl.srgb_to_lab
lab_to_srgb = _impl.lab_to_srgb
blend_images = _impl.blend_images


def get_backend() -> str:
    """Name of the kernel backend selected at import: compiled or numpy."""
    return BACKEND
