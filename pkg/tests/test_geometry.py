import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra import numpy as npst

from bakesynth import BBox, StructuringElement, connected_components, iou, mask_tight_bbox, morph

from oracles import (
    components_by_flood_fill,
    iou_by_cell_enumeration,
    morph_by_enumeration,
    tight_bbox_by_scan,
)

masks = npst.arrays(bool, npst.array_shapes(min_dims=2, max_dims=2, min_side=1, max_side=32))

boxes = st.builds(
    lambda x0, y0, w, h: BBox(x0, y0, x0 + w, y0 + h),
    st.integers(0, 40), st.integers(0, 40), st.integers(1, 40), st.integers(1, 40),
)


class TestBBox:
    def test_degenerate_rejected(self):
        with pytest.raises(ValueError):
            BBox(3, 3, 3, 5)
        with pytest.raises(ValueError):
            BBox(0, 4, 5, 2)

    def test_area(self):
        assert BBox(1, 2, 4, 7).area == 15


class TestIoU:
    def test_identity(self):
        b = BBox(0, 0, 10, 10)
        assert iou(b, b) == 1.0

    def test_disjoint(self):
        assert iou(BBox(0, 0, 2, 2), BBox(5, 5, 7, 7)) == 0.0

    def test_partial_overlap(self):
        # intersection 1 cell, union 7 cells
        assert iou(BBox(0, 0, 2, 2), BBox(1, 1, 3, 3)) == pytest.approx(1 / 7)

    @given(boxes, boxes)
    def test_matches_cell_enumeration(self, a, b):
        expected = iou_by_cell_enumeration(
            (a.x_min, a.y_min, a.x_max, a.y_max), (b.x_min, b.y_min, b.x_max, b.y_max))
        assert iou(a, b) == pytest.approx(expected, abs=1e-12)

    @given(boxes, boxes)
    def test_symmetric_and_bounded(self, a, b):
        v = iou(a, b)
        assert v == iou(b, a)
        assert 0.0 <= v <= 1.0


class TestTightBBox:
    def test_empty(self):
        assert mask_tight_bbox(np.zeros((5, 5), bool)) is None

    def test_single_pixel(self):
        m = np.zeros((10, 10), bool)
        m[4, 3] = True  # (x=3, y=4)
        assert mask_tight_bbox(m) == BBox(3, 4, 4, 5)

    def test_centered_block(self):
        m = np.zeros((20, 20), bool)
        m[7:13, 7:13] = True
        assert mask_tight_bbox(m) == BBox(7, 7, 13, 13)

    @given(masks)
    def test_matches_scan(self, m):
        box = mask_tight_bbox(m)
        expected = tight_bbox_by_scan(m)
        if expected is None:
            assert box is None
        else:
            assert (box.x_min, box.y_min, box.x_max, box.y_max) == expected

    @given(masks)
    def test_touches_all_sides(self, m):
        box = mask_tight_bbox(m)
        if box is None:
            return
        assert m[box.y_min, box.x_min:box.x_max].any()
        assert m[box.y_max - 1, box.x_min:box.x_max].any()
        assert m[box.y_min:box.y_max, box.x_min].any()
        assert m[box.y_min:box.y_max, box.x_max - 1].any()


class TestMorph:
    def test_open_all_false(self):
        m = np.zeros((8, 8), bool)
        assert not morph(m, "open", StructuringElement("square", 1)).any()

    def test_dilate_single_pixel(self):
        m = np.zeros((7, 7), bool)
        m[3, 3] = True
        out = morph(m, "dilate", StructuringElement("square", 1))
        expected = np.zeros((7, 7), bool)
        expected[2:5, 2:5] = True
        assert (out == expected).all()

    def test_close_fills_hole(self):
        m = np.ones((10, 10), bool)
        m[5, 5] = False
        out = morph(m, "close", StructuringElement("square", 1))
        expected = morph_by_enumeration(m, "close", "square", 1)
        assert out[5, 5]
        assert (out == expected).all()

    @pytest.mark.parametrize("op", ["erode", "dilate", "open", "close"])
    @pytest.mark.parametrize("shape,radius", [("square", 1), ("square", 2), ("disk", 2)])
    def test_matches_enumeration(self, op, shape, radius, rng):
        for _ in range(20):
            m = rng.random((int(rng.integers(1, 33)), int(rng.integers(1, 33)))) < 0.5
            out = morph(m, op, StructuringElement(shape, radius))
            assert (out == morph_by_enumeration(m, op, shape, radius)).all()

    @given(masks)
    @settings(max_examples=40)
    def test_erosion_dilation_ordering(self, m):
        k = StructuringElement("square", 1)
        eroded = morph(m, "erode", k)
        dilated = morph(m, "dilate", k)
        assert not (eroded & ~m).any()
        assert not (m & ~dilated).any()

    @given(masks)
    @settings(max_examples=40)
    def test_open_close_idempotent(self, m):
        k = StructuringElement("square", 1)
        opened = morph(m, "open", k)
        closed = morph(m, "close", k)
        assert (morph(opened, "open", k) == opened).all()
        assert (morph(closed, "close", k) == closed).all()


class TestConnectedComponents:
    def test_empty(self):
        assert connected_components(np.zeros((4, 4), bool)) == []

    def test_two_blocks_sorted_by_size(self):
        m = np.zeros((12, 12), bool)
        m[1:5, 1:5] = True  # 16 px
        m[8:10, 8:10] = True  # 4 px
        comps = connected_components(m, 8)
        assert len(comps) == 2
        assert comps[0][1] == 16 and comps[1][1] == 4
        assert comps[0][2] == BBox(1, 1, 5, 5)

    def test_diagonal_connectivity(self):
        m = np.zeros((4, 4), bool)
        m[1, 1] = m[2, 2] = True
        assert len(connected_components(m, 4)) == 2
        assert len(connected_components(m, 8)) == 1

    @pytest.mark.parametrize("connectivity", [4, 8])
    def test_matches_flood_fill(self, connectivity, rng):
        for _ in range(30):
            m = rng.random((int(rng.integers(1, 33)), int(rng.integers(1, 33)))) < 0.4
            comps = connected_components(m, connectivity)
            expected = components_by_flood_fill(m, connectivity)
            got = [(c[1], (c[2].x_min, c[2].y_min, c[2].x_max, c[2].y_max)) for c in comps]
            assert got == expected

    @given(masks)
    @settings(max_examples=40)
    def test_pixel_counts_sum_to_foreground(self, m):
        comps = connected_components(m, 8)
        assert sum(c[1] for c in comps) == int(np.count_nonzero(m))
