"""Kernel backends: hand-checked cases plus compiled/numpy equivalence."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from segforge import kernels
from segforge.kernels import fallback

try:
    from segforge.kernels import _ckernels
except ImportError:
    _ckernels = None

BACKENDS = [fallback] + ([_ckernels] if _ckernels is not None else [])


@pytest.fixture(params=BACKENDS, ids=lambda m: m.__name__.rsplit(".", 1)[-1])
def impl(request):
    return request.param


def _c(arr):
    return np.ascontiguousarray(arr)


class TestResolveOwner:
    def test_later_mask_wins(self, impl):
        a = np.zeros((4, 4), np.uint8)
        a[0:3, 0:3] = 1
        b = np.zeros((4, 4), np.uint8)
        b[1:3, 1:3] = 1
        owner = impl.resolve_owner(_c(np.stack([a, b])))
        assert owner[0, 0] == 0
        assert owner[1, 1] == 1
        assert owner[3, 3] == -1

    def test_empty_pixels_are_minus_one(self, impl):
        masks = np.zeros((2, 3, 3), np.uint8)
        assert (impl.resolve_owner(_c(masks)) == -1).all()


class TestRle:
    def test_all_background(self, impl):
        counts = impl.rle_encode(_c(np.zeros((2, 2), np.uint8)))
        assert list(counts) == [4]

    def test_all_foreground_has_leading_zero(self, impl):
        counts = impl.rle_encode(_c(np.ones((2, 2), np.uint8)))
        assert list(counts) == [0, 4]

    def test_column_major_order(self, impl):
        mask = np.array([[1, 0], [0, 1]], np.uint8)
        # column-major traversal: 1, 0, 0, 1
        assert list(impl.rle_encode(_c(mask))) == [0, 1, 2, 1]

    def test_decode_sum_mismatch_raises(self, impl):
        with pytest.raises(ValueError, match="counts sum"):
            impl.rle_decode(np.array([3], np.int64), 2, 2)

    def test_roundtrip_random(self, impl):
        rng = np.random.default_rng(7)
        for _ in range(200):
            mask = (rng.random((32, 32)) < rng.uniform(0.05, 0.95)).astype(np.uint8)
            counts = impl.rle_encode(_c(mask))
            back = impl.rle_decode(np.asarray(counts), 32, 32)
            assert (back == mask).all()

    @given(st.integers(1, 12), st.integers(1, 12), st.integers(0, 2**32 - 1))
    @settings(max_examples=60, deadline=None)
    def test_roundtrip_property(self, h, w, seed):
        mask = (np.random.default_rng(seed).random((h, w)) < 0.5).astype(np.uint8)
        counts = kernels.rle_encode(_c(mask))
        assert int(np.asarray(counts).sum()) == h * w
        assert (kernels.rle_decode(np.asarray(counts), h, w) == mask).all()


@pytest.mark.skipif(_ckernels is None, reason="compiled kernels unavailable")
class TestBackendEquivalence:
    def test_owner_and_rle_exact(self):
        rng = np.random.default_rng(11)
        for _ in range(50):
            n = int(rng.integers(1, 7))
            masks = (rng.random((n, 24, 24)) < 0.35).astype(np.uint8)
            assert (fallback.resolve_owner(masks) == _ckernels.resolve_owner(_c(masks))).all()
            for i in range(n):
                cf = fallback.rle_encode(masks[i])
                cc = _ckernels.rle_encode(_c(masks[i]))
                assert list(cf) == list(cc)

    def test_lab_close_and_srgb_within_one(self):
        rng = np.random.default_rng(12)
        rgb = rng.uniform(0, 255, (20000, 3))
        lab_f = fallback.srgb_to_lab(rgb)
        lab_c = _ckernels.srgb_to_lab(_c(rgb))
        assert np.abs(lab_f - lab_c).max() < 1e-9
        srgb_f = fallback.lab_to_srgb(lab_f)
        srgb_c = _ckernels.lab_to_srgb(_c(lab_f))
        assert np.abs(srgb_f.astype(int) - srgb_c.astype(int)).max() <= 1

    def test_blend_within_one(self):
        rng = np.random.default_rng(13)
        naive = rng.integers(0, 256, (48, 48, 3), dtype=np.uint8)
        relit = rng.integers(0, 256, (48, 48, 3), dtype=np.uint8)
        owner = rng.integers(-1, 4, (48, 48)).astype(np.int32)
        alphas = rng.uniform(0.2, 0.8, 4)
        bf = fallback.blend_images(naive, relit, owner, alphas, 0.1)
        bc = _ckernels.blend_images(_c(naive), _c(relit), _c(owner), _c(alphas), 0.1)
        assert np.abs(bf.astype(int) - bc.astype(int)).max() <= 1
        # unowned pixels must be byte-identical to the relit image in both
        bg = owner < 0
        assert (bf[bg] == relit[bg]).all()
        assert (bc[bg] == relit[bg]).all()


def test_selected_backend_exposed():
    assert kernels.get_backend() in ("compiled", "numpy")
    assert kernels.BACKEND == kernels.get_backend()
