"""Scene rasterization: paste segments in z-order, resolve visible masks.

Geometry rules shared with the layout engine live here (mask scaling and
paste-window arithmetic) so the overlap constraint is checked against the
exact pixels the compositor will produce.
"""

from dataclasses import dataclass, field

import numpy as np
from PIL import Image

from . import kernels
from .annotations import bbox_from_mask
from .errors import CompositeError
from .library import CategoryIndex, load_segment_raster

DEFAULT_BACKGROUND = (128, 128, 128)


@dataclass
class CanvasConfig:
    width: int
    height: int
    background: str = "solid"  # solid | image
    background_rgb: tuple[int, int, int] = DEFAULT_BACKGROUND
    background_path: str | None = None


@dataclass
class Canvas:
    width: int
    height: int
    pixels: np.ndarray  # uint8 (H, W, 3)


@dataclass
class StackEntry:
    """One pasted instance: metadata plus its original mask at canvas resolution."""

    segment_id: str
    category: str
    attributes: tuple[str, ...]
    prompt: str
    original_mask: np.ndarray  # bool (H, W)
    bbox: tuple[int, int, int, int]
    z: int
    constraint_violated: bool = False


@dataclass
class InstanceStack:
    entries: list[StackEntry] = field(default_factory=list)

    def __len__(self):
        return len(self.entries)

    def __iter__(self):
        return iter(self.entries)


@dataclass
class VisibleMask:
    mask: np.ndarray  # bool (H, W)
    visible_area_px: int


def scaled_size(height: int, width: int, scale: float) -> tuple[int, int]:
    """Target dims after scaling; at least 1x1."""
    return max(1, int(round(height * scale))), max(1, int(round(width * scale)))


def scale_mask_nearest(mask: np.ndarray, target_h: int, target_w: int) -> np.ndarray:
    """Nearest-neighbor mask resize (keeps the mask strictly binary)."""
    h, w = mask.shape
    rows = np.minimum(((np.arange(target_h) + 0.5) * h / target_h).astype(np.intp), h - 1)
    cols = np.minimum(((np.arange(target_w) + 0.5) * w / target_w).astype(np.intp), w - 1)
    return mask[np.ix_(rows, cols)]


def scale_raster_bilinear(raster: np.ndarray, target_h: int, target_w: int) -> np.ndarray:
    im = Image.fromarray(raster).resize((target_w, target_h), Image.BILINEAR)
    return np.asarray(im)


def paste_window(scaled_h: int, scaled_w: int, center_x: int, center_y: int,
                 canvas_w: int, canvas_h: int):
    """Destination/source slices for pasting; None if fully off-canvas.

    The segment's top-left lands at (center - size // 2), so integer centers
    give reproducible windows.
    """
    x0 = center_x - scaled_w // 2
    y0 = center_y - scaled_h // 2
    dx0, dy0 = max(0, x0), max(0, y0)
    dx1, dy1 = min(canvas_w, x0 + scaled_w), min(canvas_h, y0 + scaled_h)
    if dx0 >= dx1 or dy0 >= dy1:
        return None
    dst = (slice(dy0, dy1), slice(dx0, dx1))
    src = (slice(dy0 - y0, dy1 - y0), slice(dx0 - x0, dx1 - x0))
    return dst, src


def make_background(config: CanvasConfig) -> np.ndarray:
    if config.background == "solid":
        pixels = np.empty((config.height, config.width, 3), dtype=np.uint8)
        pixels[:] = np.array(config.background_rgb, dtype=np.uint8)
        return pixels
    if config.background == "image":
        if not config.background_path:
            raise CompositeError("background type 'image' requires background_path")
        try:
            with Image.open(config.background_path) as im:
                rgb = im.convert("RGB")
                if rgb.size != (config.width, config.height):
                    rgb = rgb.resize((config.width, config.height), Image.BILINEAR)
                return np.asarray(rgb).copy()
        except OSError as exc:
            raise CompositeError(f"cannot load background image: {exc}") from exc
    raise CompositeError(f"unknown background type {config.background!r}")


def rasterize_placement(placement, raster: np.ndarray, mask: np.ndarray,
                        canvas_pixels: np.ndarray) -> np.ndarray:
    """Paste one scaled segment onto the canvas (in place).

    Mask is resized nearest-neighbor, raster bilinear; returns the pasted
    instance's original mask at canvas resolution.
    """
    if placement.scale <= 0:
        raise CompositeError(f"placement {placement.segment_id}: scale must be > 0")
    canvas_h, canvas_w = canvas_pixels.shape[:2]
    sh, sw = scaled_size(mask.shape[0], mask.shape[1], placement.scale)
    scaled_mask = scale_mask_nearest(mask, sh, sw)
    window = paste_window(sh, sw, placement.center_x, placement.center_y, canvas_w, canvas_h)
    if window is None:
        raise CompositeError(
            f"placement {placement.segment_id}: scaled segment has zero on-canvas foreground pixels"
        )
    dst, src = window
    patch = scaled_mask[src]
    if not patch.any():
        raise CompositeError(
            f"placement {placement.segment_id}: scaled segment has zero on-canvas foreground pixels"
        )
    scaled_raster = scale_raster_bilinear(raster, sh, sw)
    region = canvas_pixels[dst]
    region[patch] = scaled_raster[src][patch]
    original = np.zeros((canvas_h, canvas_w), dtype=bool)
    original[dst][patch] = True
    return original


def resolve_visible_masks(stack: InstanceStack) -> list[VisibleMask]:
    """Visible mask per instance: original minus pixels of higher-z originals.

    Computed through the kernel owner map, so visible masks are pairwise
    disjoint by construction and the topmost equals its original.
    """
    if not len(stack):
        raise ValueError("resolve_visible_masks: empty stack")
    masks = np.ascontiguousarray(
        np.stack([e.original_mask for e in stack]).astype(np.uint8)
    )
    owner = kernels.resolve_owner(masks)
    out = []
    for i in range(len(stack)):
        visible = owner == i
        out.append(VisibleMask(mask=visible, visible_area_px=int(visible.sum())))
    return out


def composite_scene(layout, library: CategoryIndex, canvas_config: CanvasConfig,
                    assets=None) -> tuple[Canvas, InstanceStack]:
    """Rasterize a layout in ascending z and drop fully occluded instances.

    ``assets`` may hold preloaded {segment_id: (raster, mask)} pairs to skip
    repeated PNG decodes; anything missing is loaded from the library.
    """
    pixels = make_background(canvas_config)
    entries = []
    for placement in layout.placements:
        record = library.records.get(placement.segment_id)
        if record is None:
            raise CompositeError(f"unknown segment id {placement.segment_id!r}")
        if assets is not None and placement.segment_id in assets:
            raster, mask = assets[placement.segment_id]
        else:
            raster, mask = load_segment_raster(record)
        original = rasterize_placement(placement, raster, mask, pixels)
        entries.append(StackEntry(
            segment_id=record.id,
            category=record.category,
            attributes=record.attributes,
            prompt=record.prompt,
            original_mask=original,
            bbox=bbox_from_mask(original),
            z=placement.z,
            constraint_violated=placement.constraint_violated,
        ))
    stack = InstanceStack(entries=entries)
    visible = resolve_visible_masks(stack)
    survivors = [e for e, v in zip(entries, visible) if v.visible_area_px > 0]
    canvas = Canvas(width=canvas_config.width, height=canvas_config.height, pixels=pixels)
    return canvas, InstanceStack(entries=survivors)
