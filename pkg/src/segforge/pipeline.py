"""Orchestration: dataset modes, per-image seeding, parallel generation.

Every image is a pure function of (config, global_seed, image_index), so
output bytes are identical for any worker count. Workers own one image at
a time; the only serialized step is the final merge in image-index order.
"""

import json
import logging
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from PIL import Image

from . import kernels
from .annotations import ImageEntry, InstanceAnnotation, RleMask, bbox_from_mask, emit_coco, encode_rle
from .compositor import CanvasConfig, composite_scene, resolve_visible_masks
from .config import Mode, PipelineConfig, load_category_pool
from .errors import BackendError, GenerationAborted, ManifestError, SegforgeError
from .layout import Strategy, build_layout, load_coco_prior, sample_object_count
from .library import (
    POOL_FREQUENT,
    POOL_GENERAL,
    CategoryIndex,
    filter_by_scores,
    ingest_manifest,
    load_scores,
    load_segment_raster,
    restrict_to_categories,
    sample_segments,
    sample_within_category,
)
from .refexpr import SceneInstance, create_expression_backend, extract_attributes
from .relight import RelightRequest, blend_composite, create_relight_backend
from .seeding import derive_seed

logger = logging.getLogger(__name__)

ATTRIBUTE_DIVERSITY_ATTEMPTS = 20


def derive_image_seed(global_seed: int, image_index: int) -> int:
    """Stable 64-bit per-image seed: one SplitMix64 step over the global
    seed advanced by (index + 1) odd increments, so distinct indices always
    give distinct seeds."""
    if image_index < 0:
        raise ValueError(f"image_index must be >= 0, got {image_index}")
    return derive_seed(global_seed, image_index)


@dataclass
class _WorkerState:
    config: PipelineConfig
    index: CategoryIndex | None
    real_index: CategoryIndex | None
    synth_index: CategoryIndex | None
    coco_prior: object
    relight_backend: object
    expr_backend: object
    canvas_config: CanvasConfig
    category_signatures: dict[str, int] = field(default_factory=dict)


@dataclass
class ImageResult:
    index: int
    image_id: int
    seed: int
    file_name: str | None = None
    annotations: list[dict] = field(default_factory=list)
    expressions: list[dict] = field(default_factory=list)
    warnings: list[str] = field(default_factory=list)
    assigned_bins: dict[str, int] = field(default_factory=dict)
    n_constraint_violations: int = 0
    error: str | None = None
    backend_error: bool = False


def _prepare_index(config: PipelineConfig) -> CategoryIndex:
    index = ingest_manifest(config.library.manifest)
    if config.library.scores:
        scores = load_scores(config.library.scores)
        retain = config.library.retain_fraction or 0.3
        index = filter_by_scores(index, scores, retain)
    pool_value, pool_kind = None, None
    if config.mode in (Mode.FC, Mode.SFC):
        pool_value, pool_kind = config.library.frequent_categories, POOL_FREQUENT
    elif config.mode in (Mode.GC, Mode.SGC):
        pool_value, pool_kind = config.library.general_categories, POOL_GENERAL
    pool = load_category_pool(pool_value)
    if pool is not None:
        index = restrict_to_categories(index, pool, pool_kind)
    return index


def build_worker_state(config: PipelineConfig) -> _WorkerState:
    index = real_index = synth_index = None
    if config.mode == Mode.MIX:
        real_index = ingest_manifest(config.mix.real_manifest)
        synth_index = ingest_manifest(config.mix.synth_manifest)
        shared = set(real_index.records) & set(synth_index.records)
        if shared:
            raise ManifestError(f"mix manifests share segment ids: {sorted(shared)[:5]}")
    else:
        index = _prepare_index(config)
    coco_prior = None
    if config.layout.strategy == Strategy.COCO_PRIOR and config.layout.coco_annotations:
        coco_prior = load_coco_prior(config.layout.coco_annotations)
    signatures = {}
    if index is not None and config.mode in (Mode.SFC, Mode.SGC):
        for cat in index.categories:
            sigs = {index.records[sid].attributes for sid in index.by_category[cat]}
            signatures[cat] = len(sigs)
    b = config.backends
    return _WorkerState(
        config=config,
        index=index,
        real_index=real_index,
        synth_index=synth_index,
        coco_prior=coco_prior,
        relight_backend=create_relight_backend(
            b.relight, endpoint=b.relight_endpoint, timeout=b.relight_timeout,
            seed=b.relight_seed, identity=b.relight_identity),
        expr_backend=create_expression_backend(
            b.expr, endpoint=b.expr_endpoint, timeout=b.expr_timeout),
        canvas_config=CanvasConfig(
            width=config.layout.canvas_w, height=config.layout.canvas_h,
            background=config.background.type,
            background_rgb=tuple(config.background.rgb),
            background_path=config.background.path),
        category_signatures=signatures,
    )


def _sample_for_mode(state: _WorkerState, count: int, rng: np.random.Generator):
    """Mode-aware segment selection; returns (records, warnings)."""
    config = state.config
    warnings: list[str] = []
    if config.mode in (Mode.FC, Mode.GC):
        return sample_segments(state.index, count, rng), warnings
    if config.mode in (Mode.SFC, Mode.SGC):
        cats = state.index.categories
        category = cats[int(rng.integers(len(cats)))]
        records = sample_within_category(state.index, category, count, rng)
        if state.category_signatures.get(category, 0) < 2:
            warnings.append(f"category {category!r} has a single attribute signature")
            return records, warnings
        for _ in range(ATTRIBUTE_DIVERSITY_ATTEMPTS):
            if len({r.attributes for r in records}) >= 2:
                break
            records = sample_within_category(state.index, category, count, rng)
        else:
            warnings.append(f"category {category!r}: attribute diversity not reached")
        return records, warnings
    if config.mode == Mode.MIX:
        records = []
        for _ in range(count):
            source = state.real_index if rng.random() < config.mix.real_fraction else state.synth_index
            records.extend(sample_segments(source, 1, rng))
        return records, warnings
    raise SegforgeError(f"unhandled mode {config.mode}")


def _label_text(entry, rng: np.random.Generator, category_prob: float) -> str:
    if rng.random() < category_prob or not entry.attributes:
        return entry.category
    return "the " + " ".join([*entry.attributes, entry.category])


def _generate_image(state: _WorkerState, image_index: int) -> ImageResult:
    config = state.config
    seed = derive_image_seed(config.global_seed, image_index)
    image_id = image_index + 1
    result = ImageResult(index=image_index, image_id=image_id, seed=seed)
    rng = np.random.default_rng(seed)

    count = sample_object_count(config.layout, rng)
    records, warnings = _sample_for_mode(state, count, rng)
    result.warnings.extend(warnings)

    assets = {}
    for rec in records:
        if rec.id not in assets:
            assets[rec.id] = load_segment_raster(rec)
    masks = {rid: mask for rid, (_, mask) in assets.items()}
    layout = build_layout(records, config.layout, rng, coco_prior=state.coco_prior,
                          masks=masks, seed=seed)
    result.warnings.extend(layout.warnings)
    result.n_constraint_violations = sum(p.constraint_violated for p in layout.placements)
    bins: dict[str, int] = {}
    for p in layout.placements:
        bins[p.target_bin.value] = bins.get(p.target_bin.value, 0) + 1
    result.assigned_bins = bins

    lookup = CategoryIndex(records={r.id: r for r in records}, by_category={})
    canvas, stack = composite_scene(layout, lookup, state.canvas_config, assets=assets)
    visible = resolve_visible_masks(stack) if len(stack) else []

    union = np.zeros((canvas.height, canvas.width), dtype=bool)
    for v in visible:
        union |= v.mask
    relit = state.relight_backend.relight(RelightRequest(
        composite=canvas.pixels, foreground_mask=union,
        prompt=config.backends.relight_prompt, seed=seed))
    blended = blend_composite(canvas.pixels, relit.image, stack, config.blend, visible=visible)

    # The min-visible-area knob gates annotation only; sub-threshold
    # instances stay in the stack so occlusion and blending remain truthful.
    annotated = [(entry, vis) for entry, vis in zip(stack, visible)
                 if vis.visible_area_px >= config.min_visible_area]
    for entry, vis in annotated:
        rle = encode_rle(vis.mask)
        result.annotations.append({
            "category": entry.category,
            "bbox": list(bbox_from_mask(vis.mask)),
            "counts": list(rle.counts),
            "size": list(rle.size),
            "area": vis.visible_area_px,
            "label_text": _label_text(entry, rng, config.label_text_mix[0]),
            "attributes": list(extract_attributes(entry)),
        })

    if annotated:
        scene = [
            SceneInstance(uid=i, category=entry.category,
                          attributes=tuple(result.annotations[i]["attributes"]),
                          bbox=tuple(result.annotations[i]["bbox"]),
                          area=vis.visible_area_px)
            for i, (entry, vis) in enumerate(annotated)
        ]
        expressions, expr_warnings = state.expr_backend.generate(
            scene, canvas.width, canvas.height, rng)
        result.warnings.extend(expr_warnings)
        for expr in expressions:
            result.expressions.append({
                "target_local": expr.target_uid,
                "text": expr.text,
                "type": expr.type.value,
                "predicate": expr.predicate,
                "distractor_count": expr.distractor_count,
            })

    file_name = f"{image_id:012d}.png"
    images_dir = Path(config.output_dir) / "images"
    tmp = images_dir / f".tmp-{image_id:012d}.png"
    Image.fromarray(blended).save(tmp, format="PNG")
    tmp.replace(images_dir / file_name)
    result.file_name = file_name
    return result


def _safe_generate(state: _WorkerState, image_index: int) -> ImageResult:
    try:
        return _generate_image(state, image_index)
    except SegforgeError as exc:
        seed = derive_image_seed(state.config.global_seed, image_index)
        logger.warning("image %d failed: %s", image_index, exc)
        return ImageResult(index=image_index, image_id=image_index + 1, seed=seed,
                           error=str(exc), backend_error=isinstance(exc, BackendError))


_POOL_STATE: _WorkerState | None = None


def _init_pool_worker(config: PipelineConfig):
    global _POOL_STATE
    _POOL_STATE = build_worker_state(config)


def _pool_generate(image_index: int) -> ImageResult:
    return _safe_generate(_POOL_STATE, image_index)


def generate_dataset(config: PipelineConfig) -> dict:
    """Run the full pipeline and write images/, annotations.json,
    expressions.jsonl, and run_manifest.json; returns the run manifest."""
    config.validate()
    out_dir = Path(config.output_dir)
    (out_dir / "images").mkdir(parents=True, exist_ok=True)

    t0 = time.perf_counter()
    results: list[ImageResult] = []
    failures = 0
    backend_failures = 0
    allowed = config.failure_abort_rate * config.num_images

    def _check(res: ImageResult):
        nonlocal failures, backend_failures
        results.append(res)
        if res.error is not None:
            failures += 1
            backend_failures += res.backend_error
            if failures > allowed:
                raise GenerationAborted(
                    f"{failures} image failure(s) exceeded the abort threshold "
                    f"({config.failure_abort_rate:.2%} of {config.num_images}); "
                    f"last error: {res.error}",
                    backend_related=backend_failures == failures,
                )

    if config.workers == 1:
        state = build_worker_state(config)
        for idx in range(config.num_images):
            _check(_safe_generate(state, idx))
    else:
        chunksize = max(1, config.num_images // (config.workers * 4))
        with ProcessPoolExecutor(max_workers=config.workers,
                                 initializer=_init_pool_worker,
                                 initargs=(config,)) as executor:
            try:
                for res in executor.map(_pool_generate, range(config.num_images),
                                        chunksize=chunksize):
                    _check(res)
            except GenerationAborted:
                executor.shutdown(cancel_futures=True)
                raise
    elapsed = time.perf_counter() - t0

    images: list[ImageEntry] = []
    annotations: list[InstanceAnnotation] = []
    expression_rows: list[dict] = []
    ann_counter = 1
    for res in sorted(results, key=lambda r: r.index):
        if res.error is not None:
            continue
        images.append(ImageEntry(image_id=res.image_id, width=config.layout.canvas_w,
                                 height=config.layout.canvas_h, file_name=res.file_name))
        local_to_ann = {}
        for local, ann in enumerate(res.annotations):
            local_to_ann[local] = ann_counter
            annotations.append(InstanceAnnotation(
                ann_id=ann_counter, image_id=res.image_id, category=ann["category"],
                bbox=tuple(ann["bbox"]),
                segmentation=RleMask(counts=tuple(ann["counts"]), size=tuple(ann["size"])),
                area=ann["area"], label_text=ann["label_text"],
                attributes=tuple(ann["attributes"]),
            ))
            ann_counter += 1
        for expr in res.expressions:
            expression_rows.append({
                "image_id": res.image_id,
                "ann_id": local_to_ann[expr["target_local"]],
                "text": expr["text"],
                "type": expr["type"],
                "predicate": expr["predicate"],
                "distractor_count": expr["distractor_count"],
            })

    emit_coco(images, annotations, out_dir / "annotations.json")
    expr_tmp = out_dir / "expressions.jsonl.tmp"
    with expr_tmp.open("w", encoding="utf-8") as fh:
        for row in expression_rows:
            fh.write(json.dumps(row, separators=(",", ":")) + "\n")
    expr_tmp.replace(out_dir / "expressions.jsonl")

    manifest = {
        "config": config.snapshot(),
        "kernel_backend": kernels.BACKEND,
        "num_images": config.num_images,
        "generated": len(images),
        "failures": failures,
        "wall_clock_s": elapsed,
        "images_per_s": len(images) / elapsed if elapsed > 0 else None,
        "images": [
            {
                "index": r.index, "image_id": r.image_id, "seed": r.seed,
                "n_instances": len(r.annotations), "assigned_bins": r.assigned_bins,
                "n_constraint_violations": r.n_constraint_violations,
                "warnings": r.warnings, "error": r.error,
            }
            for r in sorted(results, key=lambda r: r.index)
        ],
    }
    manifest_tmp = out_dir / "run_manifest.json.tmp"
    with manifest_tmp.open("w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2)
    manifest_tmp.replace(out_dir / "run_manifest.json")
    return manifest
