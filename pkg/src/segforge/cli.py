"""Command-line surface.

Exit codes: 0 success, 1 validation failure, 2 config error, 3 backend
failure.
"""

import json
import logging
import sys

import click

from .annotations import validate_annotations
from .config import load_config
from .errors import BackendError, ConfigError, GenerationAborted, SegforgeError
from .library import filter_by_scores, ingest_manifest, load_scores
from .pipeline import generate_dataset
from .stats import compute_stats, format_stats

EXIT_VALIDATION = 1
EXIT_CONFIG = 2
EXIT_BACKEND = 3


def _fail(message: str, code: int):
    click.echo(f"error: {message}", err=True)
    sys.exit(code)


@click.group()
@click.option("-v", "--verbose", is_flag=True, help="Enable debug logging.")
def main(verbose):
    """segforge: compose object segments into annotated synthetic scenes."""
    logging.basicConfig(level=logging.DEBUG if verbose else logging.INFO,
                        format="%(levelname)s %(name)s: %(message)s")


@main.command()
@click.argument("manifest", type=click.Path())
def ingest(manifest):
    """Validate a segment manifest and print an index summary."""
    try:
        index = ingest_manifest(manifest)
    except SegforgeError as exc:
        _fail(str(exc), EXIT_VALIDATION)
    click.echo(f"{len(index)} segments in {len(index.categories)} categories")
    for lineno, reason in index.skipped_lines:
        click.echo(f"line {lineno} skipped: {reason}", err=True)
    if index.skipped_lines:
        click.echo(f"{len(index.skipped_lines)} line(s) skipped", err=True)


@main.command("filter")
@click.argument("manifest", type=click.Path())
@click.option("--scores", "scores_file", required=True, type=click.Path(), help="Line-delimited quality scores keyed by id.")
@click.option("--retain", default=0.3, show_default=True, help="Fraction of segments to keep.")
@click.option("--output", "output_file", required=True, type=click.Path(), help="Filtered manifest destination.")
def filter_cmd(manifest, scores_file, retain, output_file):
    """Keep the top --retain fraction of segments by mean quality score."""
    try:
        index = ingest_manifest(manifest)
        scores = load_scores(scores_file)
        filtered = filter_by_scores(index, scores, retain)
    except (SegforgeError, ValueError) as exc:
        _fail(str(exc), EXIT_VALIDATION)
    with open(output_file, "w", encoding="utf-8") as fh:
        for cat in filtered.categories:
            for sid in filtered.by_category[cat]:
                rec = filtered.records[sid]
                fh.write(json.dumps({
                    "id": rec.id, "category": rec.category, "prompt": rec.prompt,
                    "attributes": list(rec.attributes), "raster_path": rec.raster_path,
                    "mask_path": rec.mask_path, "area_px": rec.area_px, "source": rec.source,
                }) + "\n")
    click.echo(f"kept {len(filtered)} of {len(index)} segments -> {output_file}")


@main.command()
@click.option("--config", "config_file", required=True, type=click.Path(), help="Pipeline config JSON.")
@click.option("--num-images", type=int, default=None, help="Override config num_images.")
@click.option("--output-dir", type=click.Path(), default=None, help="Override config output_dir.")
@click.option("--workers", type=int, default=None, help="Override config workers.")
def generate(config_file, num_images, output_dir, workers):
    """Generate a dataset from a config file."""
    try:
        config = load_config(config_file)
        if num_images is not None:
            config.num_images = num_images
        if output_dir is not None:
            config.output_dir = output_dir
        if workers is not None:
            config.workers = workers
        config.validate()
        manifest = generate_dataset(config)
    except ConfigError as exc:
        _fail(str(exc), EXIT_CONFIG)
    except BackendError as exc:
        _fail(str(exc), EXIT_BACKEND)
    except GenerationAborted as exc:
        _fail(str(exc), EXIT_BACKEND if exc.backend_related else EXIT_VALIDATION)
    except SegforgeError as exc:
        _fail(str(exc), EXIT_VALIDATION)
    click.echo(f"generated {manifest['generated']}/{manifest['num_images']} images "
               f"({manifest['images_per_s']:.2f} img/s) -> {config.output_dir}")


@main.command()
@click.argument("dataset_dir", type=click.Path())
@click.option("--json", "as_json", is_flag=True, help="Emit the report as JSON.")
def stats(dataset_dir, as_json):
    """Distributional statistics for a generated dataset."""
    try:
        report = compute_stats(dataset_dir)
    except (OSError, ValueError, KeyError) as exc:
        _fail(f"cannot read dataset: {exc}", EXIT_VALIDATION)
    if as_json:
        click.echo(json.dumps(report, indent=2))
    else:
        click.echo(format_stats(report))


@main.command()
@click.argument("dataset_dir", type=click.Path())
def validate(dataset_dir):
    """Re-check every annotation invariant of a generated dataset."""
    try:
        report = validate_annotations(dataset_dir)
    except (OSError, ValueError) as exc:
        _fail(f"cannot read dataset: {exc}", EXIT_VALIDATION)
    click.echo(report.summary())
    for violation in report.violations[:50]:
        click.echo(f"  {violation}", err=True)
    if len(report.violations) > 50:
        click.echo(f"  ... and {len(report.violations) - 50} more", err=True)
    if not report.ok:
        sys.exit(EXIT_VALIDATION)


if __name__ == "__main__":
    main()
