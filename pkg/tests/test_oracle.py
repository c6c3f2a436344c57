"""Self-checks for the brute-force oracles."""

import numpy as np

from segforge.layout import LayoutSpec, Placement, SizeBin
from segforge.oracle import brute_force_visible_masks, check_overlap_constraint, relation_oracle
from segforge.refexpr import SceneInstance


def _placement(seg_id, cx, cy, z, scale=1.0):
    return Placement(segment_id=seg_id, center_x=cx, center_y=cy, scale=scale,
                     target_bin=SizeBin.SMALL, z=z)


class TestBruteForce:
    def test_single_instance_identity(self):
        mask = np.zeros((6, 6), dtype=bool)
        mask[1:4, 1:4] = True
        out = brute_force_visible_masks([mask])
        assert (out[0] == mask).all()

    def test_full_mutual_overlap_keeps_topmost(self):
        mask = np.ones((4, 4), dtype=bool)
        out = brute_force_visible_masks([mask, mask.copy(), mask.copy()])
        assert out[0].sum() == 0
        assert out[1].sum() == 0
        assert out[2].sum() == 16


class TestOverlapConstraint:
    def test_disjoint_placements_have_zero_fractions(self):
        mask = np.ones((8, 8), dtype=bool)
        layout = LayoutSpec(placements=[_placement("a", 10, 10, 0), _placement("b", 40, 40, 1)],
                            canvas_w=64, canvas_h=64)
        fractions, flags = check_overlap_constraint(layout, {"a": mask, "b": mask}, 0.7)
        assert fractions == [0.0, 0.0]
        assert flags == [False, False]

    def test_half_cover_is_half(self):
        mask = np.ones((8, 8), dtype=bool)
        # B shifted 4 px right of A covers exactly half of A
        layout = LayoutSpec(placements=[_placement("a", 20, 20, 0), _placement("b", 24, 20, 1)],
                            canvas_w=64, canvas_h=64)
        fractions, flags = check_overlap_constraint(layout, {"a": mask, "b": mask}, 0.7)
        assert fractions[0] == 0.5
        assert fractions[1] == 0.0
        assert flags == [False, False]

    def test_flags_follow_threshold(self):
        mask = np.ones((8, 8), dtype=bool)
        layout = LayoutSpec(placements=[_placement("a", 20, 20, 0), _placement("b", 24, 20, 1)],
                            canvas_w=64, canvas_h=64)
        _, flags = check_overlap_constraint(layout, {"a": mask, "b": mask}, 0.4)
        assert flags == [True, False]


class TestRelationOracle:
    def _scene(self):
        return [
            SceneInstance(uid=10, category="apple", attributes=("red",), bbox=(0, 40, 20, 20), area=400),
            SceneInstance(uid=11, category="cup", attributes=("blue",), bbox=(70, 40, 20, 20), area=380),
        ]

    def test_left_of_matches_the_apple(self):
        pred = {"category": "apple", "attributes": [],
                "relation": {"kind": "left_of", "ref_category": "cup"}}
        assert relation_oracle(pred, self._scene(), 100, 100) == {10}

    def test_attribute_singleton(self):
        pred = {"category": None, "attributes": ["red"], "relation": None}
        assert relation_oracle(pred, self._scene(), 100, 100) == {10}

    def test_ambiguous_predicate_returns_both(self):
        scene = self._scene() + [
            SceneInstance(uid=12, category="apple", attributes=("red",), bbox=(30, 0, 20, 20), area=390),
        ]
        pred = {"category": "apple", "attributes": ["red"], "relation": None}
        assert relation_oracle(pred, scene, 100, 100) == {10, 12}
