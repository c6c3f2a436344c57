"""sRGB <-> CIELAB conversion (D65 white point).

Array entry points delegate to the kernel backend; the scalar LabPixel
helpers wrap the same code path so there is exactly one set of constants.
"""

from dataclasses import dataclass

import numpy as np

from . import kernels


@dataclass(frozen=True)
class LabPixel:
    """One CIELAB value; L in [0, 100] for in-gamut sRGB inputs."""

    L: float
    a: float
    b: float


def srgb_array_to_lab(rgb: np.ndarray) -> np.ndarray:
    """Convert an (..., 3) uint8/float sRGB array to float64 Lab."""
    arr = np.asarray(rgb, dtype=np.float64)
    flat = np.ascontiguousarray(arr.reshape(-1, 3))
    return kernels.srgb_to_lab(flat).reshape(arr.shape)


def lab_array_to_srgb(lab: np.ndarray) -> np.ndarray:
    """Convert an (..., 3) float Lab array to uint8 sRGB, gamut-clipped."""
    arr = np.asarray(lab, dtype=np.float64)
    flat = np.ascontiguousarray(arr.reshape(-1, 3))
    return kernels.lab_to_srgb(flat).reshape(arr.shape)


def srgb_to_lab(rgb) -> LabPixel:
    """Convert one 8-bit (r, g, b) triple to a LabPixel."""
    lab = srgb_array_to_lab(np.array([rgb], dtype=np.float64))[0]
    return LabPixel(float(lab[0]), float(lab[1]), float(lab[2]))


def lab_to_srgb(pixel: LabPixel) -> tuple[int, int, int]:
    """Convert a LabPixel back to an 8-bit (r, g, b) triple."""
    rgb = lab_array_to_srgb(np.array([[pixel.L, pixel.a, pixel.b]]))[0]
    return int(rgb[0]), int(rgb[1]), int(rgb[2])
