"""COCO-style annotation derivation, emission, and validation.

Masks are stored as uncompressed column-major RLE counts (plain integers
in JSON) so the interchange is bit-exact without a compression library.
"""

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import kernels


@dataclass(frozen=True)
class RleMask:
    counts: tuple[int, ...]
    size: tuple[int, int]  # (height, width)


@dataclass
class InstanceAnnotation:
    ann_id: int
    image_id: int
    category: str
    bbox: tuple[int, int, int, int]  # x, y, w, h (top-left)
    segmentation: RleMask
    area: int
    iscrowd: int = 0
    label_text: str = ""
    attributes: tuple[str, ...] = ()


@dataclass
class ImageEntry:
    image_id: int
    width: int
    height: int
    file_name: str


def bbox_from_mask(mask: np.ndarray) -> tuple[int, int, int, int]:
    """Tight axis-aligned [x, y, w, h] hull of a binary mask."""
    rows = np.flatnonzero(mask.any(axis=1))
    cols = np.flatnonzero(mask.any(axis=0))
    if rows.size == 0:
        raise ValueError("bbox_from_mask: empty mask")
    y0, y1 = int(rows[0]), int(rows[-1])
    x0, x1 = int(cols[0]), int(cols[-1])
    return (x0, y0, x1 - x0 + 1, y1 - y0 + 1)


def encode_rle(mask: np.ndarray) -> RleMask:
    """Column-major RLE; runs alternate bg/fg starting with background."""
    counts = kernels.rle_encode(np.ascontiguousarray(mask, dtype=np.uint8))
    return RleMask(counts=tuple(int(c) for c in counts), size=(mask.shape[0], mask.shape[1]))


def decode_rle(rle: RleMask) -> np.ndarray:
    """Inverse of encode_rle; raises ValueError when counts don't sum to h*w."""
    h, w = rle.size
    return kernels.rle_decode(np.asarray(rle.counts, dtype=np.int64), h, w).astype(bool)


def annotation_for_instance(ann_id: int, image_id: int, category: str,
                            visible_mask: np.ndarray, label_text: str = "") -> InstanceAnnotation:
    rle = encode_rle(visible_mask)
    return InstanceAnnotation(
        ann_id=ann_id,
        image_id=image_id,
        category=category,
        bbox=bbox_from_mask(visible_mask),
        segmentation=rle,
        area=int(visible_mask.sum()),
        label_text=label_text,
    )


def emit_coco(images: list[ImageEntry], annotations: list[InstanceAnnotation], out_path) -> Path:
    """Write a deterministic COCO JSON: images/annotations sorted by id,
    category ids dense from 1 in order of first appearance."""
    category_ids: dict[str, int] = {}
    for ann in annotations:
        if ann.category not in category_ids:
            category_ids[ann.category] = len(category_ids) + 1
    ann_ids = [a.ann_id for a in annotations]
    if len(set(ann_ids)) != len(ann_ids):
        raise ValueError("emit_coco: duplicate annotation ids")
    image_ids = [im.image_id for im in images]
    if len(set(image_ids)) != len(image_ids):
        raise ValueError("emit_coco: duplicate image ids")
    doc = {
        "images": [
            {"id": im.image_id, "width": im.width, "height": im.height, "file_name": im.file_name}
            for im in sorted(images, key=lambda im: im.image_id)
        ],
        "annotations": [
            {
                "id": a.ann_id,
                "image_id": a.image_id,
                "category_id": category_ids[a.category],
                "bbox": list(a.bbox),
                "segmentation": {"counts": list(a.segmentation.counts),
                                 "size": list(a.segmentation.size)},
                "area": a.area,
                "iscrowd": a.iscrowd,
                "label_text": a.label_text,
                "attributes": list(a.attributes),
            }
            for a in sorted(annotations, key=lambda a: a.ann_id)
        ],
        "categories": [
            {"id": cid, "name": name} for name, cid in sorted(category_ids.items(), key=lambda kv: kv[1])
        ],
    }
    out_path = Path(out_path)
    out_path.parent.mkdir(parents=True, exist_ok=True)
    tmp = out_path.with_name(out_path.name + ".tmp")
    with tmp.open("w", encoding="utf-8") as fh:
        json.dump(doc, fh, separators=(",", ":"))
    tmp.replace(out_path)
    return out_path


@dataclass
class ValidationReport:
    images_checked: int = 0
    annotations_checked: int = 0
    expressions_checked: int = 0
    violations: list[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations

    def add(self, message: str):
        self.violations.append(message)

    def summary(self) -> str:
        status = "OK" if self.ok else f"{len(self.violations)} violation(s)"
        return (f"checked {self.images_checked} images, {self.annotations_checked} annotations, "
                f"{self.expressions_checked} expressions: {status}")


def validate_annotations(dataset_dir) -> ValidationReport:
    """Re-check every emitted invariant: RLE/area agreement, bbox tightness,
    id resolution, and per-image visible-mask disjointness."""
    dataset_dir = Path(dataset_dir)
    report = ValidationReport()
    with (dataset_dir / "annotations.json").open("r", encoding="utf-8") as fh:
        doc = json.load(fh)
    images = {im["id"]: im for im in doc.get("images", [])}
    categories = {c["id"] for c in doc.get("categories", [])}
    report.images_checked = len(images)
    by_image: dict[int, list[dict]] = {}
    for ann in doc.get("annotations", []):
        report.annotations_checked += 1
        aid = ann.get("id")
        if ann.get("image_id") not in images:
            report.add(f"annotation {aid}: unresolved image_id {ann.get('image_id')}")
            continue
        if ann.get("category_id") not in categories:
            report.add(f"annotation {aid}: unresolved category_id {ann.get('category_id')}")
        if ann.get("iscrowd", 0) != 0:
            report.add(f"annotation {aid}: iscrowd must be 0")
        seg = ann.get("segmentation", {})
        h, w = seg.get("size", (0, 0))
        im = images[ann["image_id"]]
        if (h, w) != (im["height"], im["width"]):
            report.add(f"annotation {aid}: RLE size {(h, w)} != image size")
            continue
        try:
            mask = decode_rle(RleMask(counts=tuple(seg["counts"]), size=(h, w)))
        except (ValueError, KeyError) as exc:
            report.add(f"annotation {aid}: undecodable RLE ({exc})")
            continue
        area = int(mask.sum())
        if area != ann.get("area"):
            report.add(f"annotation {aid}: area {ann.get('area')} != decoded {area}")
        if area == 0:
            report.add(f"annotation {aid}: empty visible mask")
            continue
        bbox = bbox_from_mask(mask)
        if list(bbox) != list(ann.get("bbox", [])):
            report.add(f"annotation {aid}: bbox {ann.get('bbox')} not tight (expected {list(bbox)})")
        by_image.setdefault(ann["image_id"], []).append({"id": aid, "mask": mask})
    for image_id, anns in by_image.items():
        union = np.zeros(anns[0]["mask"].shape, dtype=bool)
        for entry in anns:
            overlap = union & entry["mask"]
            if overlap.any():
                report.add(f"image {image_id}: annotation {entry['id']} overlaps earlier masks "
                           f"({int(overlap.sum())} px)")
            union |= entry["mask"]
    expr_path = dataset_dir / "expressions.jsonl"
    if expr_path.exists():
        ann_ids = {ann["id"] for ann in doc.get("annotations", [])}
        with expr_path.open("r", encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, start=1):
                line = line.strip()
                if not line:
                    continue
                report.expressions_checked += 1
                try:
                    obj = json.loads(line)
                except ValueError:
                    report.add(f"expressions line {lineno}: invalid JSON")
                    continue
                if obj.get("image_id") not in images:
                    report.add(f"expressions line {lineno}: unresolved image_id")
                if obj.get("ann_id") not in ann_ids:
                    report.add(f"expressions line {lineno}: unresolved ann_id")
                if not obj.get("text"):
                    report.add(f"expressions line {lineno}: empty text")
    return report
