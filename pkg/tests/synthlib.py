"""Builders for synthetic segment libraries and COCO files used by tests."""

import json
from pathlib import Path

import numpy as np
from PIL import Image

from segforge.library import CategoryIndex, SegmentRecord

COLOR_RGB = {
    "red": (220, 40, 40),
    "blue": (40, 80, 220),
    "green": (40, 180, 60),
    "yellow": (230, 210, 40),
    "purple": (160, 60, 200),
    "orange": (240, 140, 30),
}
COLORS = list(COLOR_RGB)

CATEGORIES = [
    "apple", "cup", "dog", "car", "book", "lamp", "chair", "ball",
    "hat", "shoe", "vase", "clock", "kite", "mug", "plant", "radio",
]


def disk_mask(h: int, w: int) -> np.ndarray:
    yy, xx = np.mgrid[0:h, 0:w]
    cy, cx = (h - 1) / 2.0, (w - 1) / 2.0
    r = min(h, w) / 2.0 - 0.5
    return ((yy - cy) ** 2 + (xx - cx) ** 2) <= r * r


def square_mask(h: int, w: int) -> np.ndarray:
    return np.ones((h, w), dtype=bool)


def write_segment(root: Path, seg_id: str, rgb, h: int, w: int, shape="disk") -> tuple[str, str, int]:
    """Write raster+mask PNGs; returns (raster_path, mask_path, area_px)."""
    mask = disk_mask(h, w) if shape == "disk" else square_mask(h, w)
    raster = np.zeros((h, w, 3), dtype=np.uint8)
    raster[:] = rgb
    # mild vertical shading so rasters aren't constant
    shade = np.linspace(0.85, 1.0, h)[:, None, None]
    raster = np.clip(raster * shade, 0, 255).astype(np.uint8)
    raster_path = root / f"{seg_id}.png"
    mask_path = root / f"{seg_id}_mask.png"
    Image.fromarray(raster).save(raster_path)
    Image.fromarray((mask * np.uint8(255))).save(mask_path)
    return str(raster_path), str(mask_path), int(mask.sum())


def make_record(root: Path, seg_id: str, category: str, color: str, h: int, w: int,
                shape="disk", source="synthetic") -> dict:
    raster_path, mask_path, area = write_segment(root, seg_id, COLOR_RGB[color], h, w, shape)
    return {
        "id": seg_id,
        "category": category,
        "prompt": f"a {color} {category} on a white background",
        "attributes": [color],
        "raster_path": raster_path,
        "mask_path": mask_path,
        "area_px": area,
        "source": source,
    }


def write_manifest(path: Path, records: list[dict]) -> Path:
    with Path(path).open("w", encoding="utf-8") as fh:
        for rec in records:
            fh.write(json.dumps(rec) + "\n")
    return Path(path)


def build_library(root: Path, categories=None, per_category: int = 3,
                  sizes=(20, 28, 36), source="synthetic", prefix="") -> Path:
    """Standard test library: per category, segments with distinct colors."""
    root = Path(root)
    root.mkdir(parents=True, exist_ok=True)
    categories = categories if categories is not None else CATEGORIES
    records = []
    for ci, category in enumerate(categories):
        for i in range(per_category):
            color = COLORS[(ci + i) % len(COLORS)]
            size = sizes[i % len(sizes)]
            seg_id = f"{prefix}{category}_{i:03d}"
            records.append(make_record(root, seg_id, category, color, size, size, source=source))
    return write_manifest(root / "manifest.jsonl", records)


def make_index(spec: dict[str, int], area_px: int = 100, prefix: str = "seg") -> CategoryIndex:
    """In-memory index (no files) for sampling-only tests: category -> count."""
    records = {}
    by_category = {}
    for category, n in spec.items():
        ids = []
        for i in range(n):
            sid = f"{prefix}_{category}_{i:04d}"
            records[sid] = SegmentRecord(
                id=sid, category=category, prompt=f"a {category}",
                attributes=(), raster_path=f"{sid}.png", mask_path=f"{sid}_mask.png",
                area_px=area_px, source="synthetic",
            )
            ids.append(sid)
        by_category[category] = ids
    return CategoryIndex(records=records, by_category=by_category)


def write_coco_file(path: Path, images: list[tuple[int, int, int]],
                    annotations: list[tuple[int, float, float, float, float]]) -> Path:
    """Minimal COCO JSON: images (id, w, h); annotations (image_id, x, y, w, h)."""
    doc = {
        "images": [{"id": i, "width": w, "height": h} for i, w, h in images],
        "annotations": [
            {"id": k + 1, "image_id": img, "bbox": [x, y, w, h], "area": w * h}
            for k, (img, x, y, w, h) in enumerate(annotations)
        ],
        "categories": [],
    }
    path = Path(path)
    with path.open("w", encoding="utf-8") as fh:
        json.dump(doc, fh)
    return path
