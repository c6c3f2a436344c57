"""Layout engine: counts, size bins, scaling, and placement strategies."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from synthlib import write_coco_file

from segforge.errors import LayoutError
from segforge.layout import (
    LayoutConfig,
    SizeBin,
    Strategy,
    assign_size_bins,
    bin_for_area,
    build_layout,
    estimate_count_histogram,
    load_coco_prior,
    sample_object_count,
    scale_for_bin,
)
from segforge.library import load_segment_mask, sample_segments
from segforge.oracle import check_overlap_constraint

TEST_CANVAS = dict(canvas_w=256, canvas_h=256)


class TestObjectCount:
    def test_degenerate_range(self, rng):
        config = LayoutConfig(count_min=7, count_max=7, **TEST_CANVAS)
        assert all(sample_object_count(config, rng) == 7 for _ in range(50))

    def test_default_range_covered(self, rng):
        config = LayoutConfig(**TEST_CANVAS)
        counts = [sample_object_count(config, rng) for _ in range(10000)]
        assert min(counts) == 5
        assert max(counts) == 20
        assert set(counts) == set(range(5, 21))

    def test_point_mass_histogram(self, rng):
        config = LayoutConfig(count_histogram={5: 1.0}, **TEST_CANVAS)
        assert all(sample_object_count(config, rng) == 5 for _ in range(20))

    def test_histogram_support_outside_range(self, rng):
        config = LayoutConfig(count_histogram={3: 1.0}, **TEST_CANVAS)
        with pytest.raises(LayoutError, match="support"):
            sample_object_count(config, rng)

    def test_estimated_histogram(self, tmp_path, rng):
        coco = write_coco_file(tmp_path / "coco.json",
                               images=[(1, 100, 100), (2, 100, 100)],
                               annotations=[(1, 0, 0, 10, 10)] * 6 + [(2, 0, 0, 10, 10)] * 9)
        hist = estimate_count_histogram(coco, 5, 20)
        assert hist == {6: 0.5, 9: 0.5}


class TestSizeBins:
    def test_proportions_converge(self, rng):
        config = LayoutConfig(**TEST_CANVAS)
        totals = {b: 0 for b in SizeBin}
        n_images, per_image = 10000, 12
        for _ in range(n_images):
            for b in assign_size_bins(per_image, config, rng):
                totals[b] += 1
        n = n_images * per_image
        assert abs(totals[SizeBin.SMALL] / n - 0.40) < 0.02
        assert abs(totals[SizeBin.MEDIUM] / n - 0.35) < 0.02
        assert abs(totals[SizeBin.LARGE] / n - 0.25) < 0.02

    def test_point_mass(self, rng):
        config = LayoutConfig(bin_proportions=(1.0, 0.0, 0.0), **TEST_CANVAS)
        assert assign_size_bins(10, config, rng) == [SizeBin.SMALL] * 10

    def test_single_count(self, rng):
        config = LayoutConfig(**TEST_CANVAS)
        bins = assign_size_bins(1, config, rng)
        assert len(bins) == 1 and bins[0] in SizeBin


class _MidpointRng:
    def uniform(self, lo, hi):
        return (lo + hi) / 2.0


class TestScaleForBin:
    def test_small_target_shrinks_1024(self, rng):
        config = LayoutConfig(**TEST_CANVAS)
        for _ in range(20):
            s = scale_for_bin(1024, SizeBin.SMALL, config, rng)
            assert s < 1.0
            assert s * s * 1024 < 1024

    def test_medium_midpoint(self):
        config = LayoutConfig(**TEST_CANVAS)
        s = scale_for_bin(1024, SizeBin.MEDIUM, config, _MidpointRng())
        expected = math.sqrt(((1024 + 9215) / 2.0) / 1024)
        assert s == pytest.approx(expected, abs=1e-12)
        assert s == pytest.approx(2.236, abs=1e-3)
        assert s * s * 1024 == pytest.approx(5120, abs=1)

    def test_infeasible_bin_on_tiny_canvas(self, rng):
        config = LayoutConfig(canvas_w=16, canvas_h=16)
        with pytest.raises(LayoutError, match="infeasible"):
            scale_for_bin(100, SizeBin.MEDIUM, config, rng)

    def test_large_cap_respects_quarter_canvas(self, rng):
        config = LayoutConfig(canvas_w=512, canvas_h=512)
        for _ in range(50):
            s = scale_for_bin(500, SizeBin.LARGE, config, rng)
            assert 96 * 96 <= s * s * 500 <= 512 * 512 / 4 + 1

    @given(st.integers(1, 5000), st.sampled_from(list(SizeBin)), st.integers(0, 2**31 - 1))
    @settings(max_examples=150, deadline=None)
    def test_scaled_area_lands_in_bin(self, area, size_bin, seed):
        config = LayoutConfig(canvas_w=512, canvas_h=512)
        s = scale_for_bin(area, size_bin, config, np.random.default_rng(seed))
        assert bin_for_area(round(s * s * area)) == size_bin


def _layout_config(**kw):
    base = dict(TEST_CANVAS)
    base.update(kw)
    return LayoutConfig(**base)


class TestBuildLayout:
    def test_ours_respects_overlap_bound(self, std_index, rng):
        segments = sample_segments(std_index, 5, rng)
        config = _layout_config()
        layout = build_layout(segments, config, np.random.default_rng(77))
        assert len(layout.placements) == 5
        assert sorted(p.z for p in layout.placements) == [0, 1, 2, 3, 4]
        masks = {r.id: load_segment_mask(r) for r in segments}
        fractions, violated = check_overlap_constraint(layout, masks, config.max_occlusion)
        for placement, frac, bad in zip(layout.placements, fractions, violated):
            assert frac <= config.max_occlusion or placement.constraint_violated
            assert placement.constraint_violated == bad

    def test_single_segment_never_occluded(self, std_index, rng):
        segments = sample_segments(std_index, 1, rng)
        config = _layout_config(count_min=1, count_max=1)
        layout = build_layout(segments, config, np.random.default_rng(5))
        masks = {segments[0].id: load_segment_mask(segments[0])}
        fractions, _ = check_overlap_constraint(layout, masks, config.max_occlusion)
        assert fractions == [0.0]
        assert not layout.placements[0].constraint_violated

    def test_random_strategy_keeps_original_scale(self, std_index, rng):
        segments = sample_segments(std_index, 6, rng)
        config = _layout_config(strategy=Strategy.RANDOM)
        layout = build_layout(segments, config, np.random.default_rng(3))
        assert all(p.scale == 1.0 for p in layout.placements)

    def test_coco_prior_requires_annotation_file(self, std_index, rng):
        segments = sample_segments(std_index, 5, rng)
        config = _layout_config(strategy=Strategy.COCO_PRIOR)
        with pytest.raises(LayoutError, match="annotation file"):
            build_layout(segments, config, np.random.default_rng(3))

    def test_coco_prior_draws_from_boxes(self, std_index, rng, tmp_path):
        coco = write_coco_file(tmp_path / "coco.json",
                               images=[(1, 100, 100)],
                               annotations=[(1, 10, 10, 20, 20), (1, 60, 60, 30, 20)])
        prior = load_coco_prior(coco)
        assert len(prior) == 2
        segments = sample_segments(std_index, 5, rng)
        config = _layout_config(strategy=Strategy.COCO_PRIOR)
        layout = build_layout(segments, config, np.random.default_rng(3), coco_prior=prior)
        expected_centers = {(int(0.20 * 256), int(0.20 * 256)), (int(0.75 * 256), int(0.70 * 256))}
        for p in layout.placements:
            assert (p.center_x, p.center_y) in expected_centers
            assert p.scale > 0

    def test_pure_function_of_seed(self, std_index, rng):
        segments = sample_segments(std_index, 5, rng)
        config = _layout_config()
        a = build_layout(segments, config, np.random.default_rng(123), seed=123)
        b = build_layout(segments, config, np.random.default_rng(123), seed=123)
        assert a.placements == b.placements
        assert a.seed == 123

    def test_count_out_of_range_rejected(self, std_index, rng):
        segments = sample_segments(std_index, 3, rng)
        with pytest.raises(LayoutError, match="outside"):
            build_layout(segments, _layout_config(), np.random.default_rng(0))


def test_bin_for_area_thresholds():
    assert bin_for_area(32 * 32 - 1) == SizeBin.SMALL
    assert bin_for_area(32 * 32) == SizeBin.MEDIUM
    assert bin_for_area(96 * 96 - 1) == SizeBin.MEDIUM
    assert bin_for_area(96 * 96) == SizeBin.LARGE
