"""Scene layout sampling: object counts, size bins, placement under the
overlap constraint, plus the random / COCO-prior ablation strategies."""

import json
import logging
import math
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path

import numpy as np

from .compositor import paste_window, scale_mask_nearest, scaled_size
from .errors import LayoutError
from .library import SegmentRecord, load_segment_mask

logger = logging.getLogger(__name__)

# COCO size-bin thresholds (area in pixels).
SMALL_MAX_AREA = 32 * 32
MEDIUM_MAX_AREA = 96 * 96


class SizeBin(str, Enum):
    SMALL = "small"
    MEDIUM = "medium"
    LARGE = "large"


class Strategy(str, Enum):
    RANDOM = "random"
    COCO_PRIOR = "coco_prior"
    OURS = "ours"


def bin_for_area(area_px: float) -> SizeBin:
    if area_px < SMALL_MAX_AREA:
        return SizeBin.SMALL
    if area_px < MEDIUM_MAX_AREA:
        return SizeBin.MEDIUM
    return SizeBin.LARGE


@dataclass
class LayoutConfig:
    count_min: int = 5
    count_max: int = 20
    bin_proportions: tuple[float, float, float] = (0.40, 0.35, 0.25)
    max_occlusion: float = 0.70
    canvas_w: int = 512
    canvas_h: int = 512
    strategy: Strategy = Strategy.OURS
    max_rejection_attempts: int = 100
    count_histogram: dict[int, float] | None = None
    coco_annotations: str | None = None

    def validate(self):
        if not 1 <= self.count_min <= self.count_max:
            raise LayoutError(f"need 1 <= count_min <= count_max, got [{self.count_min}, {self.count_max}]")
        if any(p < 0 for p in self.bin_proportions) or abs(sum(self.bin_proportions) - 1.0) > 1e-9:
            raise LayoutError(f"bin_proportions must be >= 0 and sum to 1, got {self.bin_proportions}")
        if not 0.0 <= self.max_occlusion < 1.0:
            raise LayoutError(f"max_occlusion must be in [0, 1), got {self.max_occlusion}")
        if self.canvas_w < 1 or self.canvas_h < 1:
            raise LayoutError("canvas dimensions must be positive")
        if self.max_rejection_attempts < 1:
            raise LayoutError("max_rejection_attempts must be >= 1")
        if self.count_histogram is not None:
            _normalize_histogram(self.count_histogram, self.count_min, self.count_max)


@dataclass
class Placement:
    segment_id: str
    center_x: int
    center_y: int
    scale: float
    target_bin: SizeBin
    z: int
    constraint_violated: bool = False


@dataclass
class LayoutSpec:
    placements: list[Placement]
    canvas_w: int
    canvas_h: int
    seed: int | None = None
    warnings: list[str] = field(default_factory=list)


@dataclass
class CocoPrior:
    """Normalized centers and area fractions harvested from real boxes."""

    centers_x: np.ndarray
    centers_y: np.ndarray
    area_fracs: np.ndarray

    def __len__(self):
        return len(self.area_fracs)


def _normalize_histogram(histogram: dict[int, float], count_min: int, count_max: int) -> tuple[list[int], np.ndarray]:
    values = sorted(histogram)
    if not values:
        raise LayoutError("count histogram is empty")
    bad = [v for v in values if not count_min <= v <= count_max]
    if bad:
        raise LayoutError(f"count histogram support {bad} outside [{count_min}, {count_max}]")
    probs = np.array([histogram[v] for v in values], dtype=np.float64)
    if (probs < 0).any() or probs.sum() <= 0:
        raise LayoutError("count histogram weights must be non-negative with positive sum")
    return values, probs / probs.sum()


def sample_object_count(config: LayoutConfig, rng: np.random.Generator) -> int:
    """Per-image object count: uniform over the configured range unless an
    empirical histogram was supplied."""
    if config.count_histogram is not None:
        values, probs = _normalize_histogram(config.count_histogram, config.count_min, config.count_max)
        return int(rng.choice(values, p=probs))
    return int(rng.integers(config.count_min, config.count_max + 1))


def assign_size_bins(count: int, config: LayoutConfig, rng: np.random.Generator) -> list[SizeBin]:
    """Multinomial bin counts at the configured proportions, order shuffled."""
    if count < 1:
        raise ValueError(f"count must be >= 1, got {count}")
    n_small, n_medium, n_large = rng.multinomial(count, list(config.bin_proportions))
    bins = [SizeBin.SMALL] * n_small + [SizeBin.MEDIUM] * n_medium + [SizeBin.LARGE] * n_large
    order = rng.permutation(count)
    return [bins[i] for i in order]


def _bin_target_range(size_bin: SizeBin, canvas_area: int) -> tuple[float, float]:
    """Inclusive [lo, hi] target-area range for a bin on this canvas."""
    if size_bin == SizeBin.SMALL:
        lo, hi = 1, min(SMALL_MAX_AREA - 1, canvas_area)
    elif size_bin == SizeBin.MEDIUM:
        lo, hi = SMALL_MAX_AREA, min(MEDIUM_MAX_AREA - 1, canvas_area)
    else:
        lo, hi = MEDIUM_MAX_AREA, canvas_area // 4  # large capped at 1/4 canvas
    if hi < lo:
        raise LayoutError(
            f"size bin {size_bin.value} infeasible on canvas of {canvas_area} px "
            f"(needs area in [{lo}, ...])"
        )
    return float(lo), float(hi)


def scale_for_bin(segment_area_px: int, size_bin: SizeBin, config: LayoutConfig,
                  rng: np.random.Generator) -> float:
    """Scale factor so the scaled area lands uniformly inside the bin's range."""
    if segment_area_px < 1:
        raise ValueError(f"segment_area_px must be >= 1, got {segment_area_px}")
    lo, hi = _bin_target_range(size_bin, config.canvas_w * config.canvas_h)
    target = lo if hi == lo else float(rng.uniform(lo, hi))
    return math.sqrt(target / segment_area_px)


def estimate_count_histogram(coco_file, count_min: int, count_max: int) -> dict[int, float]:
    """Empirical per-image object-count histogram from a COCO annotation file,
    clamped into [count_min, count_max]."""
    doc = _load_coco_json(coco_file)
    per_image: dict[int, int] = {im["id"]: 0 for im in doc.get("images", [])}
    for ann in doc.get("annotations", []):
        per_image[ann["image_id"]] = per_image.get(ann["image_id"], 0) + 1
    counts: dict[int, float] = {}
    for c in per_image.values():
        c = min(max(c, count_min), count_max)
        counts[c] = counts.get(c, 0.0) + 1.0
    if not counts:
        raise LayoutError(f"no images in annotation file {coco_file}")
    total = sum(counts.values())
    return {k: v / total for k, v in counts.items()}


def _load_coco_json(coco_file) -> dict:
    path = Path(coco_file)
    try:
        with path.open("r", encoding="utf-8") as fh:
            return json.load(fh)
    except (OSError, ValueError) as exc:
        raise LayoutError(f"cannot read annotation file {path}: {exc}") from exc


def load_coco_prior(coco_file) -> CocoPrior:
    """Harvest normalized box centers and area fractions for the COCO-prior
    strategy (reads images[].width/height and annotations[].bbox/area only)."""
    doc = _load_coco_json(coco_file)
    dims = {im["id"]: (im["width"], im["height"]) for im in doc.get("images", [])}
    cxs, cys, fracs = [], [], []
    for ann in doc.get("annotations", []):
        if ann["image_id"] not in dims:
            continue
        w_img, h_img = dims[ann["image_id"]]
        x, y, w, h = ann["bbox"]
        area = float(ann.get("area", w * h))
        if w <= 0 or h <= 0 or area <= 0 or w_img <= 0 or h_img <= 0:
            continue
        cxs.append((x + w / 2.0) / w_img)
        cys.append((y + h / 2.0) / h_img)
        fracs.append(area / (w_img * h_img))
    if not fracs:
        raise LayoutError(f"annotation file {coco_file} contains no usable boxes")
    return CocoPrior(np.array(cxs), np.array(cys), np.array(fracs))


class _OcclusionTracker:
    """Incremental owner-map bookkeeping for the overlap constraint.

    Mirrors the compositor's geometry: the fraction checked is (occluded
    on-canvas foreground) / (on-canvas foreground) per placed instance.
    """

    def __init__(self, canvas_w: int, canvas_h: int):
        self.owner = np.full((canvas_h, canvas_w), -1, dtype=np.int32)
        self.on_canvas: list[int] = []
        self.visible: list[int] = []

    def losses_for(self, dst, patch: np.ndarray) -> np.ndarray:
        """Visible-pixel losses per existing instance if `patch` is pasted."""
        covered = self.owner[dst][patch]
        covered = covered[covered >= 0]
        return np.bincount(covered, minlength=len(self.visible))

    def fractions_after(self, losses: np.ndarray) -> np.ndarray:
        on = np.array(self.on_canvas, dtype=np.float64)
        vis = np.array(self.visible, dtype=np.float64) - losses
        return (on - vis) / on

    def commit(self, dst, patch: np.ndarray, losses: np.ndarray):
        for j, loss in enumerate(losses):
            self.visible[j] -= int(loss)
        idx = len(self.visible)
        region = self.owner[dst]
        region[patch] = idx
        count = int(patch.sum())
        self.on_canvas.append(count)
        self.visible.append(count)

    def final_fractions(self) -> np.ndarray:
        on = np.array(self.on_canvas, dtype=np.float64)
        vis = np.array(self.visible, dtype=np.float64)
        return (on - vis) / on


def build_layout(segments: list[SegmentRecord], config: LayoutConfig, rng: np.random.Generator,
                 coco_prior: CocoPrior | None = None, masks: dict[str, np.ndarray] | None = None,
                 seed: int | None = None) -> LayoutSpec:
    """Sample a full scene layout for the given segments.

    Strategy OURS assigns size bins, scales into them, samples centers
    uniformly, and rejection-resamples centers that would push any earlier
    placement past max_occlusion (accept-with-warning once the budget runs
    out). RANDOM keeps scale 1 with uniform centers; COCO_PRIOR draws
    centers and areas from a real annotation file. z equals sampling order.
    """
    config.validate()
    n = len(segments)
    if not config.count_min <= n <= config.count_max:
        raise LayoutError(f"{n} segments outside [{config.count_min}, {config.count_max}]")
    if config.strategy == Strategy.COCO_PRIOR and coco_prior is None:
        if config.coco_annotations is None:
            raise LayoutError("strategy coco_prior requires an annotation file")
        coco_prior = load_coco_prior(config.coco_annotations)

    W, H = config.canvas_w, config.canvas_h
    bins = assign_size_bins(n, config, rng) if config.strategy == Strategy.OURS else None
    tracker = _OcclusionTracker(W, H)
    placements: list[Placement] = []
    warnings: list[str] = []

    for i, seg in enumerate(segments):
        mask = masks[seg.id] if masks is not None and seg.id in masks else load_segment_mask(seg)
        accepted = None
        if config.strategy == Strategy.OURS:
            target_bin = bins[i]
            scale = scale_for_bin(seg.area_px, target_bin, config, rng)
            sh, sw = scaled_size(mask.shape[0], mask.shape[1], scale)
            scaled = scale_mask_nearest(mask, sh, sw)
            last_valid = None
            for _ in range(config.max_rejection_attempts):
                cx, cy = int(rng.integers(W)), int(rng.integers(H))
                window = paste_window(sh, sw, cx, cy, W, H)
                if window is None:
                    continue
                dst, src = window
                patch = scaled[src]
                if not patch.any():
                    continue
                losses = tracker.losses_for(dst, patch)
                last_valid = (cx, cy, dst, patch, losses)
                if (tracker.fractions_after(losses) <= config.max_occlusion).all():
                    accepted = last_valid
                    break
            if accepted is None:
                if last_valid is None:
                    raise LayoutError(
                        f"segment {seg.id}: no on-canvas placement found in "
                        f"{config.max_rejection_attempts} attempts"
                    )
                accepted = last_valid
                warnings.append(
                    f"placement {i} ({seg.id}): overlap constraint unsatisfied after "
                    f"{config.max_rejection_attempts} attempts, accepted anyway"
                )
        else:
            if config.strategy == Strategy.RANDOM:
                scale = 1.0
                target_bin = bin_for_area(seg.area_px)
                sh, sw = scaled_size(mask.shape[0], mask.shape[1], scale)
                scaled = scale_mask_nearest(mask, sh, sw)
            for _ in range(config.max_rejection_attempts):
                if config.strategy == Strategy.COCO_PRIOR:
                    k = int(rng.integers(len(coco_prior)))
                    cx = min(W - 1, max(0, int(coco_prior.centers_x[k] * W)))
                    cy = min(H - 1, max(0, int(coco_prior.centers_y[k] * H)))
                    target_area = max(1.0, float(coco_prior.area_fracs[k]) * W * H)
                    scale = math.sqrt(target_area / seg.area_px)
                    target_bin = bin_for_area(target_area)
                    sh, sw = scaled_size(mask.shape[0], mask.shape[1], scale)
                    scaled = scale_mask_nearest(mask, sh, sw)
                else:
                    cx, cy = int(rng.integers(W)), int(rng.integers(H))
                window = paste_window(sh, sw, cx, cy, W, H)
                if window is None:
                    continue
                dst, src = window
                patch = scaled[src]
                if not patch.any():
                    continue
                accepted = (cx, cy, dst, patch, tracker.losses_for(dst, patch))
                break
            if accepted is None:
                raise LayoutError(
                    f"segment {seg.id}: no on-canvas placement found in "
                    f"{config.max_rejection_attempts} attempts"
                )
        cx, cy, dst, patch, losses = accepted
        tracker.commit(dst, patch, losses)
        placements.append(Placement(
            segment_id=seg.id, center_x=cx, center_y=cy, scale=scale,
            target_bin=target_bin, z=i,
        ))

    for j, frac in enumerate(tracker.final_fractions()):
        if frac > config.max_occlusion:
            placements[j].constraint_violated = True
            if config.strategy != Strategy.OURS:
                warnings.append(
                    f"placement {j} ({placements[j].segment_id}): occluded fraction "
                    f"{frac:.3f} exceeds {config.max_occlusion}"
                )
    return LayoutSpec(placements=placements, canvas_w=W, canvas_h=H, seed=seed, warnings=warnings)
