"""Segment library: manifest ingestion, quality filtering, balanced sampling.

The on-disk library is a line-delimited JSON manifest (one segment per
line) so multi-million-segment libraries can be streamed. The in-memory
index is immutable after ingestion and safe to share across workers.
"""

import json
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from PIL import Image

from .errors import ManifestError, SegmentDataError

logger = logging.getLogger(__name__)

MANIFEST_KEYS = ("id", "category", "prompt", "attributes", "raster_path", "mask_path", "area_px", "source")
SOURCES = ("synthetic", "real")

# Pool kinds for CategoryIndex.pool
POOL_ALL = "all"
POOL_FREQUENT = "frequent"
POOL_GENERAL = "general"
POOL_CUSTOM = "custom"

MASK_THRESHOLD = 128  # single-channel mask pixels >= this are foreground


@dataclass(frozen=True)
class SegmentRecord:
    """One cut-out object: raster + binary mask on disk, plus metadata."""

    id: str
    category: str
    prompt: str
    attributes: tuple[str, ...]
    raster_path: str
    mask_path: str
    area_px: int
    source: str


@dataclass(frozen=True)
class QualityScores:
    integrity: float
    is_object: float
    mask_quality: float

    def __post_init__(self):
        for name in ("integrity", "is_object", "mask_quality"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"score {name}={v} outside [0, 1]")

    @property
    def mean(self) -> float:
        return (self.integrity + self.is_object + self.mask_quality) / 3.0


@dataclass
class CategoryIndex:
    """Immutable index over segment records, grouped by category.

    ``by_category`` preserves manifest order within a category; the sorted
    category tuple gives sampling a stable total order.
    """

    records: dict[str, SegmentRecord]
    by_category: dict[str, list[str]]
    pool: str = POOL_ALL
    pool_categories: tuple[str, ...] | None = None
    skipped_lines: list[tuple[int, str]] = field(default_factory=list)

    def __post_init__(self):
        self._categories = tuple(sorted(self.by_category))

    @property
    def categories(self) -> tuple[str, ...]:
        return self._categories

    def __len__(self) -> int:
        return len(self.records)

    def __contains__(self, segment_id: str) -> bool:
        return segment_id in self.records


def _parse_record(obj: dict) -> SegmentRecord:
    missing = [k for k in MANIFEST_KEYS if k not in obj]
    if missing:
        raise ValueError(f"missing keys {missing}")
    if not isinstance(obj["id"], str) or not obj["id"]:
        raise ValueError("id must be a non-empty string")
    if not isinstance(obj["category"], str) or not obj["category"]:
        raise ValueError("category must be a non-empty string")
    if not isinstance(obj["prompt"], str):
        raise ValueError("prompt must be a string")
    attrs = obj["attributes"]
    if not isinstance(attrs, list) or not all(isinstance(a, str) for a in attrs):
        raise ValueError("attributes must be a list of strings")
    if not isinstance(obj["area_px"], int) or obj["area_px"] < 1:
        raise ValueError("area_px must be an integer >= 1")
    if obj["source"] not in SOURCES:
        raise ValueError(f"source must be one of {SOURCES}")
    return SegmentRecord(
        id=obj["id"],
        category=obj["category"],
        prompt=obj["prompt"],
        attributes=tuple(attrs),
        raster_path=str(obj["raster_path"]),
        mask_path=str(obj["mask_path"]),
        area_px=obj["area_px"],
        source=obj["source"],
    )


def ingest_manifest(manifest_file) -> CategoryIndex:
    """Stream a line-delimited JSON manifest into a CategoryIndex.

    Lines that fail the schema are skipped and reported (with their line
    number) on the returned index; duplicate ids and an empty result are
    hard errors.
    """
    path = Path(manifest_file)
    records: dict[str, SegmentRecord] = {}
    by_category: dict[str, list[str]] = {}
    skipped: list[tuple[int, str]] = []
    try:
        fh = path.open("r", encoding="utf-8")
    except OSError as exc:
        raise ManifestError(f"cannot read manifest {path}: {exc}") from exc
    with fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
                if not isinstance(obj, dict):
                    raise ValueError("record is not a JSON object")
                rec = _parse_record(obj)
            except ValueError as exc:
                skipped.append((lineno, str(exc)))
                logger.warning("manifest %s line %d skipped: %s", path, lineno, exc)
                continue
            if rec.id in records:
                raise ManifestError(f"duplicate segment id {rec.id!r} at line {lineno}")
            records[rec.id] = rec
            by_category.setdefault(rec.category, []).append(rec.id)
    if not records:
        raise ManifestError(f"zero valid records in manifest {path}")
    return CategoryIndex(records=records, by_category=by_category, skipped_lines=skipped)


def load_scores(scores_file) -> dict[str, QualityScores]:
    """Read a line-delimited scores file: {id, integrity, is_object, mask_quality}."""
    path = Path(scores_file)
    scores: dict[str, QualityScores] = {}
    try:
        fh = path.open("r", encoding="utf-8")
    except OSError as exc:
        raise ManifestError(f"cannot read scores file {path}: {exc}") from exc
    with fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
                scores[obj["id"]] = QualityScores(
                    integrity=float(obj["integrity"]),
                    is_object=float(obj["is_object"]),
                    mask_quality=float(obj["mask_quality"]),
                )
            except (KeyError, TypeError, ValueError) as exc:
                raise ManifestError(f"scores file {path} line {lineno}: {exc}") from exc
    return scores


def filter_by_scores(index: CategoryIndex, scores: dict[str, QualityScores], retain_fraction: float) -> CategoryIndex:
    """Keep the top ``retain_fraction`` of segments by mean quality score.

    Ranking is global (not per-category) on the unweighted mean of the
    three scores; ties break toward the lexicographically smaller id.
    Categories left empty are dropped.
    """
    if not 0.0 < retain_fraction <= 1.0:
        raise ValueError(f"retain_fraction must be in (0, 1], got {retain_fraction}")
    missing = [sid for sid in index.records if sid not in scores]
    if missing:
        raise ManifestError(f"missing score entries for ids: {sorted(missing)[:5]}"
                            + ("..." if len(missing) > 5 else ""))
    ranked = sorted(index.records, key=lambda sid: (-scores[sid].mean, sid))
    keep_n = max(1, int(math.floor(len(ranked) * retain_fraction + 1e-9)))
    keep = set(ranked[:keep_n])
    records = {sid: rec for sid, rec in index.records.items() if sid in keep}
    by_category: dict[str, list[str]] = {}
    for cat, ids in index.by_category.items():
        kept = [sid for sid in ids if sid in keep]
        if kept:
            by_category[cat] = kept
    return CategoryIndex(records=records, by_category=by_category,
                         pool=index.pool, pool_categories=index.pool_categories)


def restrict_to_categories(index: CategoryIndex, categories, pool_kind: str = POOL_CUSTOM) -> CategoryIndex:
    """Sub-index containing only the given categories (for FC/GC pools)."""
    wanted = [c for c in categories if c in index.by_category]
    if not wanted:
        raise ManifestError(f"category pool {pool_kind!r} matches no indexed category")
    records = {}
    by_category = {}
    for cat in wanted:
        ids = index.by_category[cat]
        by_category[cat] = list(ids)
        for sid in ids:
            records[sid] = index.records[sid]
    return CategoryIndex(records=records, by_category=by_category,
                         pool=pool_kind, pool_categories=tuple(sorted(wanted)))


def sample_segments(index: CategoryIndex, k: int, rng: np.random.Generator) -> list[SegmentRecord]:
    """Two-stage balanced sampling: uniform category, then uniform segment.

    Draws are independent, so repeats are allowed; the marginal category
    probability is 1/|categories| regardless of per-category counts.
    """
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    cats = index.categories
    if not cats:
        raise ValueError("cannot sample from an empty index")
    out = []
    for _ in range(k):
        cat = cats[int(rng.integers(len(cats)))]
        ids = index.by_category[cat]
        out.append(index.records[ids[int(rng.integers(len(ids)))]])
    return out


def sample_within_category(index: CategoryIndex, category: str, k: int, rng: np.random.Generator) -> list[SegmentRecord]:
    """Uniform draws of k segments from one category (repeats allowed)."""
    ids = index.by_category[category]
    return [index.records[ids[int(rng.integers(len(ids)))]] for _ in range(k)]


def load_segment_mask(record: SegmentRecord) -> np.ndarray:
    """Load the binary mask only; validates area_px against the file."""
    try:
        with Image.open(record.mask_path) as im:
            mask = np.asarray(im.convert("L"))
    except OSError as exc:
        raise SegmentDataError(f"segment {record.id}: cannot decode mask {record.mask_path}: {exc}") from exc
    binary = mask >= MASK_THRESHOLD
    actual = int(binary.sum())
    if actual != record.area_px:
        raise SegmentDataError(
            f"segment {record.id}: area_px={record.area_px} but mask has {actual} foreground pixels"
        )
    return binary


def load_segment_raster(record: SegmentRecord) -> tuple[np.ndarray, np.ndarray]:
    """Load (raster RGB uint8, binary mask) and check their consistency."""
    try:
        with Image.open(record.raster_path) as im:
            raster = np.asarray(im.convert("RGB"))
    except OSError as exc:
        raise SegmentDataError(f"segment {record.id}: cannot decode raster {record.raster_path}: {exc}") from exc
    mask = load_segment_mask(record)
    if raster.shape[:2] != mask.shape:
        raise SegmentDataError(
            f"segment {record.id}: raster {raster.shape[:2]} and mask {mask.shape} dimensions differ"
        )
    return raster, mask
