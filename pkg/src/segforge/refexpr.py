"""Referring expression generation from ground-truth geometry.

Every expression carries a structured predicate next to its text, so
uniqueness of the referent is machine-checkable without any NLP. The
default backend is the deterministic template generator; an HTTP backend
can delegate to a language model, whose output is validated against the
same predicate semantics and dropped when it fails.
"""

import json
from dataclasses import dataclass
from enum import Enum

import numpy as np
import requests

from .errors import BackendError


class SpatialRelation(str, Enum):
    LEFT_OF = "left_of"
    RIGHT_OF = "right_of"
    ABOVE = "above"
    BELOW = "below"
    LEFTMOST = "leftmost"
    RIGHTMOST = "rightmost"
    TOPMOST = "topmost"
    BOTTOMMOST = "bottommost"
    LARGEST = "largest"
    SMALLEST = "smallest"
    FRAME_LEFT = "frame_left"
    FRAME_RIGHT = "frame_right"
    FRAME_TOP = "frame_top"
    FRAME_BOTTOM = "frame_bottom"
    FRAME_CENTER = "frame_center"


PAIRWISE = (SpatialRelation.LEFT_OF, SpatialRelation.RIGHT_OF,
            SpatialRelation.ABOVE, SpatialRelation.BELOW)
SUPERLATIVES = (SpatialRelation.LEFTMOST, SpatialRelation.RIGHTMOST,
                SpatialRelation.TOPMOST, SpatialRelation.BOTTOMMOST,
                SpatialRelation.LARGEST, SpatialRelation.SMALLEST)
FRAMES = (SpatialRelation.FRAME_LEFT, SpatialRelation.FRAME_RIGHT,
          SpatialRelation.FRAME_TOP, SpatialRelation.FRAME_BOTTOM,
          SpatialRelation.FRAME_CENTER)

# Minimum center gap for a pairwise relation, as a fraction of canvas size.
MIN_CENTER_GAP = 0.10


class ExprType(str, Enum):
    ATTRIBUTE = "attribute"
    SPATIAL = "spatial"
    MIXED = "mixed"


@dataclass(frozen=True)
class SceneInstance:
    """The slice of an annotated instance the generator needs."""

    uid: int
    category: str
    attributes: tuple[str, ...]
    bbox: tuple[int, int, int, int]
    area: int


@dataclass
class Expression:
    text: str
    type: ExprType
    target_uid: int
    distractor_count: int
    predicate: dict


STOP_WORDS = frozenset({
    "a", "an", "the", "of", "on", "in", "at", "by", "for", "with", "and",
    "or", "to", "from", "over", "under", "is", "are", "was", "its",
    "photo", "image", "picture", "background", "closeup", "view",
})


def _tokenize(text: str) -> list[str]:
    out = []
    for raw in text.lower().split():
        token = raw.strip(".,;:!?()[]\"'")
        if token:
            out.append(token)
    return out


def extract_attributes(record) -> tuple[str, ...]:
    """Attribute tags for a segment; falls back to adjective tokens that
    directly precede the category head-noun in the prompt."""
    if record.attributes:
        seen = []
        for tag in record.attributes:
            if tag not in seen:
                seen.append(tag)
        return tuple(seen)
    tokens = _tokenize(record.prompt)
    category_tokens = _tokenize(record.category)
    if not tokens or not category_tokens:
        return ()
    head = category_tokens[-1]
    try:
        pos = tokens.index(head)
    except ValueError:
        return ()
    attrs: list[str] = []
    for tok in reversed(tokens[:pos]):
        if tok in category_tokens:
            continue
        if tok in STOP_WORDS:
            break
        attrs.append(tok)
    attrs.reverse()
    return tuple(attrs)


def _center(bbox) -> tuple[float, float]:
    x, y, w, h = bbox
    return x + w / 2.0, y + h / 2.0


def spatial_relation(box_a, box_b, canvas_w: int, canvas_h: int) -> SpatialRelation | None:
    """Pairwise relation of A relative to B, or None when ambiguous.

    The dominant center axis decides left/right vs above/below (ties go
    horizontal), and the center gap must reach 10% of the canvas extent.
    """
    ax, ay = _center(box_a)
    bx, by = _center(box_b)
    dx, dy = bx - ax, by - ay
    if abs(dx) >= abs(dy):
        if dx >= MIN_CENTER_GAP * canvas_w:
            return SpatialRelation.LEFT_OF
        if -dx >= MIN_CENTER_GAP * canvas_w:
            return SpatialRelation.RIGHT_OF
    else:
        if dy >= MIN_CENTER_GAP * canvas_h:
            return SpatialRelation.ABOVE
        if -dy >= MIN_CENTER_GAP * canvas_h:
            return SpatialRelation.BELOW
    return None


def _frame_relations(bbox, canvas_w: int, canvas_h: int) -> list[SpatialRelation]:
    cx, cy = _center(bbox)
    out = []
    if cx < canvas_w / 3.0:
        out.append(SpatialRelation.FRAME_LEFT)
    if cx > 2.0 * canvas_w / 3.0:
        out.append(SpatialRelation.FRAME_RIGHT)
    if cy < canvas_h / 3.0:
        out.append(SpatialRelation.FRAME_TOP)
    if cy > 2.0 * canvas_h / 3.0:
        out.append(SpatialRelation.FRAME_BOTTOM)
    if (canvas_w / 3.0 <= cx <= 2.0 * canvas_w / 3.0
            and canvas_h / 3.0 <= cy <= 2.0 * canvas_h / 3.0):
        out.append(SpatialRelation.FRAME_CENTER)
    return out


_SUPERLATIVE_KEY = {
    SpatialRelation.LEFTMOST: lambda inst: _center(inst.bbox)[0],
    SpatialRelation.RIGHTMOST: lambda inst: -_center(inst.bbox)[0],
    SpatialRelation.TOPMOST: lambda inst: _center(inst.bbox)[1],
    SpatialRelation.BOTTOMMOST: lambda inst: -_center(inst.bbox)[1],
    SpatialRelation.LARGEST: lambda inst: -inst.area,
    SpatialRelation.SMALLEST: lambda inst: inst.area,
}


def evaluate_predicate(predicate: dict, instances, canvas_w: int, canvas_h: int) -> set[int]:
    """Instance uids matched by a structured predicate.

    Superlatives apply within the category/attribute-filtered set; a
    pairwise relation holds when some other instance of the reference
    category stands in that relation.
    """
    category = predicate.get("category")
    attrs = set(predicate.get("attributes", ()))
    base = [inst for inst in instances
            if (category is None or inst.category == category)
            and attrs <= set(inst.attributes)]
    relation = predicate.get("relation")
    if relation is None:
        return {inst.uid for inst in base}
    kind = SpatialRelation(relation["kind"])
    if kind in PAIRWISE:
        ref = relation["ref_category"]
        matched = set()
        for inst in base:
            for other in instances:
                if other.uid == inst.uid or other.category != ref:
                    continue
                if spatial_relation(inst.bbox, other.bbox, canvas_w, canvas_h) == kind:
                    matched.add(inst.uid)
                    break
        return matched
    if kind in SUPERLATIVES:
        if not base:
            return set()
        key = _SUPERLATIVE_KEY[kind]
        best = min(key(inst) for inst in base)
        return {inst.uid for inst in base if key(inst) == best}
    if kind in FRAMES:
        return {inst.uid for inst in base if kind in _frame_relations(inst.bbox, canvas_w, canvas_h)}
    raise ValueError(f"unknown relation kind {kind}")


def _noun_phrase(attributes: tuple[str, ...], category: str) -> str:
    return " ".join([*attributes, category])


_PAIRWISE_TEXT = {
    SpatialRelation.LEFT_OF: "to the left of",
    SpatialRelation.RIGHT_OF: "to the right of",
    SpatialRelation.ABOVE: "above",
    SpatialRelation.BELOW: "below",
}
_FRAME_TEXT = {
    SpatialRelation.FRAME_LEFT: "on the left side of the image",
    SpatialRelation.FRAME_RIGHT: "on the right side of the image",
    SpatialRelation.FRAME_TOP: "at the top of the image",
    SpatialRelation.FRAME_BOTTOM: "at the bottom of the image",
    SpatialRelation.FRAME_CENTER: "in the center of the image",
}


def _relation_text(np_text: str, relation: dict) -> str:
    kind = SpatialRelation(relation["kind"])
    if kind in PAIRWISE:
        return f"the {np_text} {_PAIRWISE_TEXT[kind]} the {relation['ref_category']}"
    if kind in SUPERLATIVES:
        return f"the {kind.value} {np_text}"
    return f"the {np_text} {_FRAME_TEXT[kind]}"


def _attr_variants(inst: SceneInstance) -> list[tuple[str, ...]]:
    variants: list[tuple[str, ...]] = [()]
    for a in inst.attributes:
        variants.append((a,))
    if len(inst.attributes) > 1:
        variants.append(tuple(inst.attributes))
    return variants


def _candidate_expressions(instances, canvas_w, canvas_h, expr_type: ExprType):
    """Deterministic enumeration of candidate (text, predicate, target)."""
    candidates = []
    for inst in instances:
        if expr_type == ExprType.ATTRIBUTE:
            for attrs in _attr_variants(inst):
                predicate = {"category": inst.category, "attributes": list(attrs), "relation": None}
                candidates.append((f"the {_noun_phrase(attrs, inst.category)}", predicate, inst.uid))
            continue
        attr_choices = [()] if expr_type == ExprType.SPATIAL else \
            [v for v in _attr_variants(inst) if v]
        relations: list[dict] = []
        for other in instances:
            if other.uid == inst.uid:
                continue
            rel = spatial_relation(inst.bbox, other.bbox, canvas_w, canvas_h)
            if rel is not None:
                relations.append({"kind": rel.value, "ref_category": other.category})
        relations.extend({"kind": kind.value} for kind in SUPERLATIVES)
        relations.extend({"kind": kind.value}
                         for kind in _frame_relations(inst.bbox, canvas_w, canvas_h))
        for attrs in attr_choices:
            for relation in relations:
                predicate = {"category": inst.category, "attributes": list(attrs),
                             "relation": dict(relation)}
                text = _relation_text(_noun_phrase(attrs, inst.category), relation)
                candidates.append((text, predicate, inst.uid))
    return candidates


def generate_expressions(instances, canvas_w: int, canvas_h: int, rng: np.random.Generator,
                         per_type_min: int = 3, per_type_max: int = 6):
    """Sample 3-6 unique-resolving expressions per type for one image.

    Candidates whose predicate does not resolve to exactly their target are
    discarded; a type with fewer than per_type_min survivors emits what it
    has and adds a warning. Returns (expressions, warnings).
    """
    if not instances:
        raise ValueError("generate_expressions: need at least one instance")
    instances = sorted(instances, key=lambda inst: inst.uid)
    category_counts: dict[str, int] = {}
    for inst in instances:
        category_counts[inst.category] = category_counts.get(inst.category, 0) + 1
    expressions: list[Expression] = []
    warnings: list[str] = []
    for expr_type in (ExprType.ATTRIBUTE, ExprType.SPATIAL, ExprType.MIXED):
        valid: list[Expression] = []
        seen_texts = set()
        for text, predicate, target in _candidate_expressions(instances, canvas_w, canvas_h, expr_type):
            if text in seen_texts:
                continue
            if evaluate_predicate(predicate, instances, canvas_w, canvas_h) != {target}:
                continue
            seen_texts.add(text)
            target_inst = next(i for i in instances if i.uid == target)
            valid.append(Expression(
                text=text, type=expr_type, target_uid=target,
                distractor_count=category_counts[target_inst.category] - 1,
                predicate=predicate,
            ))
        want = int(rng.integers(per_type_min, per_type_max + 1))
        order = rng.permutation(len(valid))
        chosen = [valid[i] for i in order[:want]]
        if len(chosen) < per_type_min:
            warnings.append(
                f"type {expr_type.value}: only {len(chosen)} unique-resolving expression(s)"
            )
        expressions.extend(chosen)
    return expressions, warnings


class TemplateExpressionBackend:
    """Default backend: the deterministic template generator above."""

    name = "template"

    def generate(self, instances, canvas_w, canvas_h, rng):
        return generate_expressions(instances, canvas_w, canvas_h, rng)


LLM_INSTRUCTION = (
    "Generate referring expressions for the objects in this scene. For each "
    "expression return JSON with keys text, type (attribute|spatial|mixed), "
    "target_uid, and a structured predicate with keys category, attributes, "
    "relation. Every expression must uniquely identify its target."
)


class HttpExpressionBackend:
    """POSTs the instruction plus structured ground truth to an endpoint and
    validates every returned expression against the predicate semantics."""

    name = "http"

    def __init__(self, endpoint: str, timeout: float = 60.0):
        if not endpoint:
            raise BackendError("http expression backend requires an endpoint")
        self.endpoint = endpoint
        self.timeout = timeout

    def generate(self, instances, canvas_w, canvas_h, rng):
        payload = {
            "prompt": LLM_INSTRUCTION,
            "ground_truth": {
                "canvas": [canvas_w, canvas_h],
                "instances": [
                    {"uid": inst.uid, "category": inst.category,
                     "attributes": list(inst.attributes), "bbox": list(inst.bbox),
                     "area": inst.area}
                    for inst in instances
                ],
            },
        }
        try:
            resp = requests.post(self.endpoint, json=payload, timeout=self.timeout)
        except requests.RequestException as exc:
            raise BackendError(f"expression endpoint {self.endpoint} unreachable: {exc}") from exc
        if resp.status_code != 200:
            raise BackendError(f"expression endpoint returned HTTP {resp.status_code}")
        try:
            items = resp.json()
        except json.JSONDecodeError as exc:
            raise BackendError(f"expression endpoint returned invalid JSON: {exc}") from exc
        uids = {inst.uid for inst in instances}
        category_counts: dict[str, int] = {}
        for inst in instances:
            category_counts[inst.category] = category_counts.get(inst.category, 0) + 1
        by_uid = {inst.uid: inst for inst in instances}
        expressions, warnings = [], []
        for item in items:
            target = item.get("target_uid")
            if target not in uids:
                warnings.append(f"backend expression dropped: unknown target {target!r}")
                continue
            predicate = item.get("predicate")
            if not isinstance(predicate, dict):
                warnings.append(f"backend expression dropped: missing predicate for target {target}")
                continue
            try:
                matched = evaluate_predicate(predicate, instances, canvas_w, canvas_h)
            except (KeyError, ValueError) as exc:
                warnings.append(f"backend expression dropped: bad predicate ({exc})")
                continue
            if matched != {target}:
                warnings.append(
                    f"backend expression dropped: predicate resolves to {sorted(matched)}, "
                    f"expected {{{target}}}"
                )
                continue
            text = item.get("text", "")
            if not text:
                warnings.append(f"backend expression dropped: empty text for target {target}")
                continue
            try:
                expr_type = ExprType(item.get("type", "attribute"))
            except ValueError:
                warnings.append(f"backend expression dropped: bad type {item.get('type')!r}")
                continue
            expressions.append(Expression(
                text=text, type=expr_type, target_uid=target,
                distractor_count=category_counts[by_uid[target].category] - 1,
                predicate=predicate,
            ))
        return expressions, warnings


def create_expression_backend(kind: str, endpoint: str | None = None, timeout: float = 60.0):
    if kind == "template":
        return TemplateExpressionBackend()
    if kind == "http":
        return HttpExpressionBackend(endpoint=endpoint or "", timeout=timeout)
    raise BackendError(f"unknown expression backend {kind!r}")
