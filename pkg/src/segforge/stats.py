"""Dataset statistics: distributional summaries of a generated dataset."""

import json
from pathlib import Path

from .layout import bin_for_area


def compute_stats(dataset_dir) -> dict:
    """Summarize a dataset directory.

    Reports the per-image object-count histogram, size-bin proportions by
    visible area (and by assigned bin when the run manifest is present), the
    category histogram with its max deviation from uniform, overlap-constraint
    violation counts, and expression counts per type.
    """
    dataset_dir = Path(dataset_dir)
    with (dataset_dir / "annotations.json").open("r", encoding="utf-8") as fh:
        doc = json.load(fh)
    categories = {c["id"]: c["name"] for c in doc.get("categories", [])}

    per_image_counts = {im["id"]: 0 for im in doc.get("images", [])}
    bin_counts = {"small": 0, "medium": 0, "large": 0}
    category_hist: dict[str, int] = {}
    for ann in doc.get("annotations", []):
        per_image_counts[ann["image_id"]] = per_image_counts.get(ann["image_id"], 0) + 1
        bin_counts[bin_for_area(ann["area"]).value] += 1
        name = categories.get(ann["category_id"], str(ann["category_id"]))
        category_hist[name] = category_hist.get(name, 0) + 1

    count_hist: dict[int, int] = {}
    for c in per_image_counts.values():
        count_hist[c] = count_hist.get(c, 0) + 1
    n_annotations = sum(bin_counts.values())
    bin_props = {k: (v / n_annotations if n_annotations else 0.0) for k, v in bin_counts.items()}

    total_cat = sum(category_hist.values())
    max_dev = 0.0
    if category_hist and total_cat:
        uniform = 1.0 / len(category_hist)
        max_dev = max(abs(v / total_cat - uniform) for v in category_hist.values())

    expr_counts: dict[str, int] = {}
    expr_per_image: dict[int, int] = {}
    expr_path = dataset_dir / "expressions.jsonl"
    if expr_path.exists():
        with expr_path.open("r", encoding="utf-8") as fh:
            for line in fh:
                line = line.strip()
                if not line:
                    continue
                obj = json.loads(line)
                expr_counts[obj.get("type", "?")] = expr_counts.get(obj.get("type", "?"), 0) + 1
                expr_per_image[obj["image_id"]] = expr_per_image.get(obj["image_id"], 0) + 1

    report = {
        "num_images": len(per_image_counts),
        "num_annotations": n_annotations,
        "object_count_histogram": {str(k): v for k, v in sorted(count_hist.items())},
        "object_count_min": min(per_image_counts.values()) if per_image_counts else 0,
        "object_count_max": max(per_image_counts.values()) if per_image_counts else 0,
        "size_bin_proportions_visible": bin_props,
        "category_histogram": dict(sorted(category_hist.items())),
        "category_max_uniform_deviation": max_dev,
        "expression_counts_by_type": dict(sorted(expr_counts.items())),
        "expressions_per_image_min": min(expr_per_image.values()) if expr_per_image else 0,
    }

    manifest_path = dataset_dir / "run_manifest.json"
    if manifest_path.exists():
        with manifest_path.open("r", encoding="utf-8") as fh:
            manifest = json.load(fh)
        assigned = {"small": 0, "medium": 0, "large": 0}
        violations = 0
        per_image_cats: list[int] = []
        for entry in manifest.get("images", []):
            for k, v in entry.get("assigned_bins", {}).items():
                assigned[k] = assigned.get(k, 0) + v
            violations += entry.get("n_constraint_violations", 0)
        total_assigned = sum(assigned.values())
        report["size_bin_proportions_assigned"] = {
            k: (v / total_assigned if total_assigned else 0.0) for k, v in assigned.items()
        }
        report["overlap_constraint_violations"] = violations
        report["images_per_s"] = manifest.get("images_per_s")
    per_image_category_counts = {}
    by_image_cats: dict[int, set] = {}
    for ann in doc.get("annotations", []):
        name = categories.get(ann["category_id"], str(ann["category_id"]))
        by_image_cats.setdefault(ann["image_id"], set()).add(name)
    if by_image_cats:
        per_image_category_counts = {
            "min": min(len(s) for s in by_image_cats.values()),
            "max": max(len(s) for s in by_image_cats.values()),
        }
    report["categories_per_image"] = per_image_category_counts
    return report


def format_stats(report: dict) -> str:
    lines = [
        f"images:               {report['num_images']}",
        f"annotations:          {report['num_annotations']}",
        f"object count range:   [{report['object_count_min']}, {report['object_count_max']}]",
        "size bins (visible):  "
        + ", ".join(f"{k}={v:.3f}" for k, v in report["size_bin_proportions_visible"].items()),
    ]
    if "size_bin_proportions_assigned" in report:
        lines.append("size bins (assigned): "
                     + ", ".join(f"{k}={v:.3f}" for k, v in report["size_bin_proportions_assigned"].items()))
        lines.append(f"overlap violations:   {report['overlap_constraint_violations']}")
    lines.append(f"categories:           {len(report['category_histogram'])} "
                 f"(max uniform deviation {report['category_max_uniform_deviation']:.4f})")
    if report["expression_counts_by_type"]:
        lines.append("expressions:          "
                     + ", ".join(f"{k}={v}" for k, v in report["expression_counts_by_type"].items())
                     + f" (min per image {report['expressions_per_image_min']})")
    return "\n".join(lines)
