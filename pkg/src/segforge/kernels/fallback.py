"""Pure-numpy implementations of the hot per-pixel kernels.

Used when the compiled extension is unavailable (or forced via
SEGFORGE_KERNELS=numpy). Must stay semantically interchangeable with
``_ckernels``: integer outputs agree exactly, float outputs to rounding.
"""

import numpy as np

# sRGB <-> CIELAB, D65 reference white, 2-degree observer.
_M_FWD = np.array(
    [
        [0.4124564, 0.3575761, 0.1804375],
        [0.2126729, 0.7151522, 0.0721750],
        [0.0193339, 0.1191920, 0.9503041],
    ]
)
_M_INV = np.array(
    [
        [3.2404542, -1.5371385, -0.4985314],
        [-0.9692660, 1.8760108, 0.0415560],
        [0.0556434, -0.2040259, 1.0572252],
    ]
)
_WHITE_X = 0.95047
_WHITE_Z = 1.08883
_DELTA = 6.0 / 29.0
_EPS = _DELTA**3
_F_SCALE = 1.0 / (3.0 * _DELTA * _DELTA)
_F_OFFSET = 4.0 / 29.0


def resolve_owner(masks):
    """Topmost-owner map for a stack of binary masks.

    masks: uint8 array (N, H, W); higher index is pasted later (on top).
    Returns int32 (H, W) with the owning instance index, -1 where uncovered.
    """
    n, h, w = masks.shape
    owner = np.full((h, w), -1, dtype=np.int32)
    for i in range(n):
        owner[masks[i] != 0] = i
    return owner


def rle_encode(mask):
    """Column-major run-length counts, alternating bg/fg starting with bg."""
    flat = np.ascontiguousarray(mask, dtype=np.uint8).flatten(order="F")
    flat = (flat != 0).astype(np.int8)
    boundaries = np.flatnonzero(np.diff(flat)) + 1
    edges = np.concatenate(([0], boundaries, [flat.size]))
    runs = np.diff(edges).astype(np.int64)
    if flat.size and flat[0] == 1:
        runs = np.concatenate(([0], runs))
    return runs


def rle_decode(counts, height, width):
    counts = np.asarray(counts, dtype=np.int64)
    if counts.sum() != height * width:
        raise ValueError(
            f"RLE counts sum {counts.sum()} != {height}x{width}={height * width}"
        )
    values = np.zeros(len(counts), dtype=np.uint8)
    values[1::2] = 1
    flat = np.repeat(values, counts)
    return flat.reshape((height, width), order="F")


def srgb_to_lab(rgb):
    """rgb: float64 (M, 3) with channels in [0, 255]. Returns Lab (M, 3)."""
    u = np.asarray(rgb, dtype=np.float64) / 255.0
    lin = np.where(u <= 0.04045, u / 12.92, ((u + 0.055) / 1.055) ** 2.4)
    xyz = lin @ _M_FWD.T
    xyz[:, 0] /= _WHITE_X
    xyz[:, 2] /= _WHITE_Z
    f = np.where(xyz > _EPS, np.cbrt(xyz), xyz * _F_SCALE + _F_OFFSET)
    lab = np.empty_like(f)
    lab[:, 0] = 116.0 * f[:, 1] - 16.0
    lab[:, 1] = 500.0 * (f[:, 0] - f[:, 1])
    lab[:, 2] = 200.0 * (f[:, 1] - f[:, 2])
    return lab


def lab_to_srgb(lab):
    """lab: float64 (M, 3). Returns uint8 (M, 3), gamut-clipped."""
    lab = np.asarray(lab, dtype=np.float64)
    fy = (lab[:, 0] + 16.0) / 116.0
    fx = fy + lab[:, 1] / 500.0
    fz = fy - lab[:, 2] / 200.0
    f = np.stack([fx, fy, fz], axis=1)
    xyz = np.where(f > _DELTA, f**3, 3.0 * _DELTA * _DELTA * (f - _F_OFFSET))
    xyz[:, 0] *= _WHITE_X
    xyz[:, 2] *= _WHITE_Z
    lin = np.clip(xyz @ _M_INV.T, 0.0, 1.0)
    s = np.where(lin <= 0.0031308, 12.92 * lin, 1.055 * lin ** (1.0 / 2.4) - 0.055)
    return np.clip(np.floor(255.0 * s + 0.5), 0.0, 255.0).astype(np.uint8)


def blend_images(naive, relit, owner, alphas, beta):
    """Mask-area-weighted CIELAB blend of naive composite and relit image.

    Pixels owned by instance i (owner == i) mix lightness by alphas[i] toward
    the naive composite and chroma by beta toward the relit image; unowned
    pixels copy the relit image verbatim.
    """
    out = relit.copy()
    sel = owner >= 0
    if not sel.any():
        return out
    n_lab = srgb_to_lab(naive[sel].astype(np.float64))
    r_lab = srgb_to_lab(relit[sel].astype(np.float64))
    a = alphas[owner[sel]]
    blended = np.empty_like(n_lab)
    blended[:, 0] = a * n_lab[:, 0] + (1.0 - a) * r_lab[:, 0]
    blended[:, 1] = (1.0 - beta) * n_lab[:, 1] + beta * r_lab[:, 1]
    blended[:, 2] = (1.0 - beta) * n_lab[:, 2] + beta * r_lab[:, 2]
    out[sel] = lab_to_srgb(blended)
    return out
