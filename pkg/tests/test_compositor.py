"""Compositor: pasting, visible-mask resolution, scene assembly."""

import numpy as np
import pytest
from synthlib import make_record, write_manifest

from segforge.annotations import bbox_from_mask
from segforge.compositor import (
    Canvas,
    CanvasConfig,
    InstanceStack,
    StackEntry,
    composite_scene,
    make_background,
    rasterize_placement,
    resolve_visible_masks,
    scale_mask_nearest,
)
from segforge.errors import CompositeError
from segforge.layout import LayoutSpec, Placement, SizeBin
from segforge.library import ingest_manifest
from segforge.oracle import brute_force_visible_masks


def _placement(seg_id="seg", cx=0, cy=0, scale=1.0, z=0):
    return Placement(segment_id=seg_id, center_x=cx, center_y=cy, scale=scale,
                     target_bin=SizeBin.SMALL, z=z)


def _square_segment(n=10, color=(200, 30, 30)):
    raster = np.zeros((n, n, 3), np.uint8)
    raster[:] = color
    mask = np.ones((n, n), dtype=bool)
    return raster, mask


def make_stack(masks):
    entries = []
    for i, mask in enumerate(masks):
        entries.append(StackEntry(segment_id=f"s{i}", category="cat", attributes=(),
                                  prompt="", original_mask=mask.astype(bool),
                                  bbox=bbox_from_mask(mask), z=i))
    return InstanceStack(entries=entries)


class TestRasterize:
    def test_centered_paste_keeps_all_foreground(self):
        raster, mask = _square_segment(10)
        canvas = np.zeros((64, 64, 3), np.uint8)
        original = rasterize_placement(_placement(cx=32, cy=32), raster, mask, canvas)
        assert int(original.sum()) == 100
        assert (canvas[27:37, 27:37] == (200, 30, 30)).all()

    def test_corner_paste_clips_three_quarters(self):
        # 10x10 centered at (0, 0): only the segment's rows >= 5 and cols >= 5
        # stay on canvas, so 75 of 100 pixels are clipped
        raster, mask = _square_segment(10)
        expected_remaining = sum(
            1 for r in range(10) for c in range(10) if r >= 5 and c >= 5
        )
        canvas = np.zeros((64, 64, 3), np.uint8)
        original = rasterize_placement(_placement(cx=0, cy=0), raster, mask, canvas)
        assert int(original.sum()) == expected_remaining == 25

    def test_fully_off_canvas_is_an_error(self):
        raster, mask = _square_segment(10)
        canvas = np.zeros((64, 64, 3), np.uint8)
        with pytest.raises(CompositeError, match="zero on-canvas"):
            rasterize_placement(_placement(cx=-100, cy=-100), raster, mask, canvas)

    def test_mask_scaling_stays_binary(self):
        mask = np.zeros((9, 9), dtype=bool)
        mask[2:7, 2:7] = True
        scaled = scale_mask_nearest(mask, 18, 18)
        assert scaled.dtype == bool
        assert scaled.shape == (18, 18)

    def test_nonpositive_scale_rejected(self):
        raster, mask = _square_segment(4)
        with pytest.raises(CompositeError, match="scale"):
            rasterize_placement(_placement(scale=0.0), raster, mask, np.zeros((8, 8, 3), np.uint8))


class TestResolveVisible:
    def test_single_instance_visible_equals_original(self):
        mask = np.zeros((8, 8), dtype=bool)
        mask[1:5, 1:5] = True
        visible = resolve_visible_masks(make_stack([mask]))
        assert (visible[0].mask == mask).all()
        assert visible[0].visible_area_px == 16

    def test_full_cover_leaves_zero(self):
        a = np.zeros((8, 8), dtype=bool)
        a[2:4, 2:4] = True
        b = np.zeros((8, 8), dtype=bool)
        b[1:5, 1:5] = True
        visible = resolve_visible_masks(make_stack([a, b]))
        assert visible[0].visible_area_px == 0
        assert visible[1].visible_area_px == 16

    def test_partial_overlap_counts(self):
        # A 3x3 at rows/cols 0-2, B 2x2 at rows/cols 1-2 above it: 9 - 4 = 5
        a = np.zeros((4, 4), dtype=bool)
        a[0:3, 0:3] = True
        b = np.zeros((4, 4), dtype=bool)
        b[1:3, 1:3] = True
        visible = resolve_visible_masks(make_stack([a, b]))
        assert visible[0].visible_area_px == 5
        assert visible[1].visible_area_px == 4

    def test_topmost_always_equals_original(self, rng):
        for _ in range(20):
            masks = [(rng.random((16, 16)) < 0.4) for _ in range(4)]
            if not masks[-1].any():
                continue
            visible = resolve_visible_masks(make_stack(masks))
            assert (visible[-1].mask == masks[-1]).all()

    def test_partition_and_conservation(self, rng):
        for _ in range(30):
            masks = [(rng.random((24, 24)) < 0.3) for _ in range(5)]
            visible = resolve_visible_masks(make_stack(masks))
            union = np.zeros((24, 24), dtype=int)
            for v in visible:
                union += v.mask
            assert union.max() <= 1  # pairwise disjoint
            total_visible = sum(v.visible_area_px for v in visible)
            total_original = sum(int(m.sum()) for m in masks)
            assert total_visible <= total_original
            overlap_free = union.astype(bool).sum() == total_original
            assert (total_visible == total_original) == overlap_free

    def test_matches_brute_force_oracle(self, rng):
        for _ in range(100):
            n = int(rng.integers(1, 7))
            masks = [(rng.random((32, 32)) < rng.uniform(0.1, 0.5)) for _ in range(n)]
            visible = resolve_visible_masks(make_stack(masks))
            expected = brute_force_visible_masks(masks)
            for v, e in zip(visible, expected):
                assert (v.mask == e).all()


class TestCompositeScene:
    @pytest.fixture
    def square_library(self, tmp_path):
        records = [
            make_record(tmp_path, "small_a", "apple", "red", 8, 8, shape="square"),
            make_record(tmp_path, "small_b", "cup", "blue", 8, 8, shape="square"),
            make_record(tmp_path, "small_c", "dog", "green", 8, 8, shape="square"),
            make_record(tmp_path, "small_d", "car", "yellow", 8, 8, shape="square"),
            make_record(tmp_path, "big", "lamp", "purple", 32, 32, shape="square"),
        ]
        return ingest_manifest(write_manifest(tmp_path / "m.jsonl", records))

    def _scene(self, placements):
        return LayoutSpec(placements=placements, canvas_w=64, canvas_h=64)

    def test_single_segment_differs_exactly_on_foreground(self, square_library):
        layout = self._scene([_placement("small_a", 32, 32, z=0)])
        config = CanvasConfig(width=64, height=64)
        canvas, stack = composite_scene(layout, square_library, config)
        background = make_background(config)
        differs = (canvas.pixels != background).any(axis=2)
        assert (differs == stack.entries[0].original_mask).all()

    def test_disjoint_segments_fully_visible(self, square_library):
        layout = self._scene([_placement("small_a", 16, 16, z=0),
                              _placement("small_b", 48, 48, z=1)])
        canvas, stack = composite_scene(layout, square_library, CanvasConfig(width=64, height=64))
        visible = resolve_visible_masks(stack)
        assert [v.visible_area_px for v in visible] == [64, 64]

    def test_fully_occluded_instance_dropped(self, square_library):
        layout = self._scene([
            _placement("small_a", 32, 32, z=0),   # covered by "big" below
            _placement("small_b", 10, 10, z=1),
            _placement("small_c", 54, 10, z=2),
            _placement("small_d", 10, 54, z=3),
            _placement("big", 32, 32, z=4),
        ])
        canvas, stack = composite_scene(layout, square_library, CanvasConfig(width=64, height=64))
        assert len(stack) == 4
        assert [e.segment_id for e in stack] == ["small_b", "small_c", "small_d", "big"]

    def test_missing_segment_id(self, square_library):
        layout = self._scene([_placement("nope", 32, 32)])
        with pytest.raises(CompositeError, match="unknown segment id"):
            composite_scene(layout, square_library, CanvasConfig(width=64, height=64))

    def test_background_image(self, square_library, tmp_path):
        from PIL import Image

        bg = np.zeros((64, 64, 3), np.uint8)
        bg[:, :, 2] = 200
        Image.fromarray(bg).save(tmp_path / "bg.png")
        config = CanvasConfig(width=64, height=64, background="image",
                              background_path=str(tmp_path / "bg.png"))
        layout = self._scene([_placement("small_a", 32, 32)])
        canvas, _ = composite_scene(layout, square_library, config)
        assert (canvas.pixels[0, 0] == (0, 0, 200)).all()
