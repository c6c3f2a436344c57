"""Brute-force reference implementations used by tests and `validate`.

Deliberately naive (per-pixel Python scans, no shared code with the
production paths) so failures here and in the optimized pipeline stay
uncorrelated. Keep canvases small when calling these.
"""

import numpy as np


def brute_force_visible_masks(masks) -> list[np.ndarray]:
    """Per-pixel topmost-owner scan over a stack of binary masks.

    masks: iterable of (H, W) binary arrays, ascending z (last is topmost).
    Returns boolean visible masks, one per input.
    """
    grids = [np.asarray(m).astype(int).tolist() for m in masks]
    n = len(grids)
    if n == 0:
        return []
    h = len(grids[0])
    w = len(grids[0][0]) if h else 0
    out = [[[False] * w for _ in range(h)] for _ in range(n)]
    for y in range(h):
        for x in range(w):
            for i in range(n - 1, -1, -1):
                if grids[i][y][x]:
                    out[i][y][x] = True
                    break
    return [np.array(o, dtype=bool) for o in out]


def _naive_scale_nearest(grid, target_h, target_w):
    h = len(grid)
    w = len(grid[0])
    scaled = [[0] * target_w for _ in range(target_h)]
    for yy in range(target_h):
        sy = int((yy + 0.5) * h / target_h)
        if sy > h - 1:
            sy = h - 1
        row = grid[sy]
        for xx in range(target_w):
            sx = int((xx + 0.5) * w / target_w)
            if sx > w - 1:
                sx = w - 1
            scaled[yy][xx] = 1 if row[sx] else 0
    return scaled


def _stamp(grid, center_x, center_y, canvas_w, canvas_h):
    sh = len(grid)
    sw = len(grid[0])
    x0 = center_x - sw // 2
    y0 = center_y - sh // 2
    canvas = [[0] * canvas_w for _ in range(canvas_h)]
    for yy in range(sh):
        y = y0 + yy
        if y < 0 or y >= canvas_h:
            continue
        for xx in range(sw):
            x = x0 + xx
            if 0 <= x < canvas_w and grid[yy][xx]:
                canvas[y][x] = 1
    return canvas


def check_overlap_constraint(layout, masks_by_id, max_occlusion: float):
    """Exact per-instance occluded fractions for a layout.

    masks_by_id: {segment_id: binary mask at native resolution}. Fractions
    are occluded on-canvas foreground over total on-canvas foreground.
    Returns (fractions, violated_flags).
    """
    w, h = layout.canvas_w, layout.canvas_h
    stamped = []
    for placement in layout.placements:
        native = np.asarray(masks_by_id[placement.segment_id]).astype(int).tolist()
        th = max(1, int(round(len(native) * placement.scale)))
        tw = max(1, int(round(len(native[0]) * placement.scale)))
        scaled = _naive_scale_nearest(native, th, tw)
        stamped.append(_stamp(scaled, placement.center_x, placement.center_y, w, h))
    n = len(stamped)
    on_canvas = [0] * n
    visible = [0] * n
    for y in range(h):
        for x in range(w):
            top = -1
            for i in range(n - 1, -1, -1):
                if stamped[i][y][x]:
                    if top < 0:
                        top = i
                    on_canvas[i] += 1
            if top >= 0:
                visible[top] += 1
    fractions = []
    for i in range(n):
        if on_canvas[i] == 0:
            fractions.append(1.0)
        else:
            fractions.append((on_canvas[i] - visible[i]) / on_canvas[i])
    return fractions, [f > max_occlusion for f in fractions]


def relation_oracle(predicate: dict, instances, canvas_w: int, canvas_h: int) -> set[int]:
    """Exhaustive independent evaluation of a structured expression predicate."""
    category = predicate.get("category")
    wanted_attrs = list(predicate.get("attributes") or [])
    candidates = []
    for inst in instances:
        if category is not None and inst.category != category:
            continue
        ok = True
        for attr in wanted_attrs:
            if attr not in inst.attributes:
                ok = False
        if ok:
            candidates.append(inst)
    relation = predicate.get("relation")
    if relation is None:
        return {inst.uid for inst in candidates}
    kind = relation["kind"]
    if kind in ("left_of", "right_of", "above", "below"):
        matched = set()
        for inst in candidates:
            for other in instances:
                if other.uid == inst.uid:
                    continue
                if other.category != relation["ref_category"]:
                    continue
                if _pairwise_holds(kind, inst.bbox, other.bbox, canvas_w, canvas_h):
                    matched.add(inst.uid)
        return matched
    if kind in ("leftmost", "rightmost", "topmost", "bottommost", "largest", "smallest"):
        if not candidates:
            return set()
        scores = []
        for inst in candidates:
            cx = inst.bbox[0] + inst.bbox[2] / 2.0
            cy = inst.bbox[1] + inst.bbox[3] / 2.0
            value = {"leftmost": cx, "rightmost": -cx, "topmost": cy,
                     "bottommost": -cy, "largest": -inst.area, "smallest": inst.area}[kind]
            scores.append((value, inst.uid))
        best = min(v for v, _ in scores)
        return {uid for v, uid in scores if v == best}
    if kind in ("frame_left", "frame_right", "frame_top", "frame_bottom", "frame_center"):
        matched = set()
        for inst in candidates:
            cx = inst.bbox[0] + inst.bbox[2] / 2.0
            cy = inst.bbox[1] + inst.bbox[3] / 2.0
            third_w = canvas_w / 3.0
            third_h = canvas_h / 3.0
            holds = {
                "frame_left": cx < third_w,
                "frame_right": cx > 2.0 * third_w,
                "frame_top": cy < third_h,
                "frame_bottom": cy > 2.0 * third_h,
                "frame_center": third_w <= cx <= 2.0 * third_w and third_h <= cy <= 2.0 * third_h,
            }[kind]
            if holds:
                matched.add(inst.uid)
        return matched
    raise ValueError(f"unknown relation kind {kind!r}")


def _pairwise_holds(kind: str, box_a, box_b, canvas_w: int, canvas_h: int) -> bool:
    ax = box_a[0] + box_a[2] / 2.0
    ay = box_a[1] + box_a[3] / 2.0
    bx = box_b[0] + box_b[2] / 2.0
    by = box_b[1] + box_b[3] / 2.0
    dx = bx - ax
    dy = by - ay
    if abs(dx) >= abs(dy):
        if kind == "left_of":
            return dx >= 0.10 * canvas_w
        if kind == "right_of":
            return -dx >= 0.10 * canvas_w
        return False
    if kind == "above":
        return dy >= 0.10 * canvas_h
    if kind == "below":
        return -dy >= 0.10 * canvas_h
    return False
