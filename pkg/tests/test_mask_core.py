import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from spinemetrics.errors import CorruptRle, DimensionMismatch
from spinemetrics.mask_core import (Instance, InstanceSet, RleMask, mask_iou,
                                    merge_to_binary, rle_decode, rle_encode,
                                    sidecar_dumps, sidecar_loads)
from spinemetrics.taxonomy import DEFAULT_TAXONOMY


def inst(id_, mask, class_index=1, score=None):
    return Instance(id_, class_index, mask.astype(np.uint8), score)


class TestMerge:
    def test_empty_set_is_all_zero(self):
        out = merge_to_binary(InstanceSet(8, 8, []))
        assert out.shape == (8, 8)
        assert out.sum() == 0

    def test_single_instance_identity(self):
        m = np.zeros((8, 8), np.uint8)
        m[2:5, 2:5] = 1
        out = merge_to_binary(InstanceSet(8, 8, [inst(0, m)]))
        assert np.array_equal(out, m)

    def test_overlapping_union_count(self):
        # two 8-pixel instances overlapping on 4 pixels -> 12 foreground pixels
        a = np.zeros((8, 8), np.uint8)
        b = np.zeros((8, 8), np.uint8)
        a[0, 0:8] = 1
        b[0, 4:8] = 1
        b[1, 0:4] = 1
        assert int((a & b).sum()) == 4
        out = merge_to_binary(InstanceSet(8, 8, [inst(0, a), inst(1, b)]))
        assert int(out.sum()) == 12

    def test_order_and_duplication_invariance(self):
        rng = np.random.default_rng(7)
        masks = [(rng.random((16, 16)) < 0.3).astype(np.uint8) for _ in range(4)]
        insts = [inst(i, m) for i, m in enumerate(masks)]
        base = merge_to_binary(InstanceSet(16, 16, insts))
        assert np.array_equal(base, merge_to_binary(InstanceSet(16, 16, insts[::-1])))
        assert np.array_equal(base, merge_to_binary(InstanceSet(16, 16, insts + insts)))

    def test_union_size_bound(self):
        rng = np.random.default_rng(8)
        masks = [(rng.random((16, 16)) < 0.2).astype(np.uint8) for _ in range(3)]
        merged = merge_to_binary(InstanceSet(16, 16, [inst(i, m) for i, m in enumerate(masks)]))
        assert merged.sum() <= sum(m.sum() for m in masks)


class TestIoU:
    def test_identical_masks(self):
        m = np.zeros((4, 4), np.uint8)
        m[1:3, 1:3] = 1
        assert mask_iou(m, m) == 1.0

    def test_disjoint_masks(self):
        a = np.zeros((4, 4), np.uint8)
        b = np.zeros((4, 4), np.uint8)
        a[0] = 1
        b[3] = 1
        assert mask_iou(a, b) == 0.0

    def test_half_overlap(self):
        # left half vs top half of a 4x4: intersection 4, union 12
        a = np.zeros((4, 4), np.uint8)
        b = np.zeros((4, 4), np.uint8)
        a[:, :2] = 1
        b[:2, :] = 1
        assert mask_iou(a, b) == pytest.approx(4 / 12)

    def test_both_empty_is_one(self):
        z = np.zeros((4, 4), np.uint8)
        assert mask_iou(z, z) == 1.0

    def test_dimension_mismatch(self):
        with pytest.raises(DimensionMismatch):
            mask_iou(np.zeros((4, 4), np.uint8), np.zeros((4, 5), np.uint8))

    @given(st.integers(0, 2**30))
    @settings(max_examples=50, deadline=None)
    def test_symmetry(self, seed):
        rng = np.random.default_rng(seed)
        a = (rng.random((12, 12)) < 0.4).astype(np.uint8)
        b = (rng.random((12, 12)) < 0.4).astype(np.uint8)
        assert mask_iou(a, b) == mask_iou(b, a)


class TestRle:
    def test_all_zero(self):
        assert rle_encode(np.zeros((4, 4), np.uint8)).runs == [16]

    def test_all_one(self):
        assert rle_encode(np.ones((4, 4), np.uint8)).runs == [0, 16]

    def test_first_row_foreground(self):
        m = np.zeros((4, 4), np.uint8)
        m[0] = 1
        assert rle_encode(m).runs == [0, 4, 12]

    def test_corrupt_runs(self):
        with pytest.raises(CorruptRle):
            rle_decode(RleMask(4, 4, [3, 4]))

    @given(st.integers(0, 2**30))
    @settings(max_examples=200, deadline=None)
    def test_round_trip(self, seed):
        rng = np.random.default_rng(seed)
        h = int(rng.integers(1, 65))
        w = int(rng.integers(1, 65))
        m = (rng.random((h, w)) < rng.random()).astype(np.uint8)
        rle = rle_encode(m)
        assert sum(rle.runs) == w * h
        assert np.array_equal(rle_decode(rle), m)


class TestSidecar:
    def test_round_trip_with_labels(self):
        m = np.zeros((6, 5), np.uint8)
        m[1:4, 1:4] = 1
        iset = InstanceSet(5, 6, [inst(0, m, class_index=2, score=0.75),
                                  inst(1, np.flipud(m), class_index=1)])
        text = sidecar_dumps(iset, DEFAULT_TAXONOMY, labels={0: "S1"})
        loaded, labels = sidecar_loads(text, DEFAULT_TAXONOMY)
        assert loaded.width == 5 and loaded.height == 6
        assert labels == {0: "S1"}
        assert loaded.instances[0].score == 0.75
        assert loaded.instances[1].score is None
        for a, b in zip(iset.instances, loaded.instances):
            assert a.class_index == b.class_index
            assert np.array_equal(a.mask, b.mask)
