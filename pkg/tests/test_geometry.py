import math
import random

import pytest
from hypothesis import given, strategies as st

from phonewatch.errors import GeometryError
from phonewatch.geometry import (
    BBox,
    Crop,
    FrameSize,
    Resize,
    Transform,
    apply_transform,
    driver_side_region,
    invert_transform,
    iou,
)


def box(x0, y0, x1, y1):
    return BBox(x0, y0, x1, y1)


def boxes_strategy(width=200.0, height=150.0):
    coord = st.floats(0, 1, allow_nan=False, allow_infinity=False)
    def build(t):
        x0, x1, y0, y1 = t
        x0, x1 = sorted((x0, x1))
        y0, y1 = sorted((y0, y1))
        return BBox(x0 * width, y0 * height, x0 * width + (x1 - x0) * width + 1.0,
                    y0 * height + (y1 - y0) * height + 1.0)
    return st.tuples(coord, coord, coord, coord).map(build)


class TestIoU:
    def test_identity(self):
        assert iou(box(0, 0, 10, 10), box(0, 0, 10, 10)) == 1.0

    def test_disjoint(self):
        assert iou(box(0, 0, 10, 10), box(20, 20, 30, 30)) == 0.0

    def test_half_overlap(self):
        # intersection 50, union 150
        assert iou(box(0, 0, 10, 10), box(5, 0, 15, 10)) == pytest.approx(1 / 3, abs=1e-12)

    def test_degenerate_box_rejected(self):
        with pytest.raises(GeometryError):
            BBox(5, 0, 5, 10)
        with pytest.raises(GeometryError):
            BBox(0, 10, 10, 10)

    @given(boxes_strategy(), boxes_strategy())
    def test_symmetric_and_bounded(self, a, b):
        ab = iou(a, b)
        assert ab == iou(b, a)
        assert 0.0 <= ab <= 1.0

    @given(boxes_strategy())
    def test_self_iou_is_one(self, a):
        assert iou(a, a) == pytest.approx(1.0, abs=1e-12)


class TestResize:
    def test_full_frame_maps_to_full_frame(self):
        t = Resize(FrameSize(1920, 1080), FrameSize(320, 320))
        assert t.apply(box(0, 0, 1920, 1080)) == box(0, 0, 320, 320)

    def test_quadrant_scaling(self):
        t = Resize(FrameSize(1920, 1080), FrameSize(320, 320))
        out = t.apply(box(960, 540, 1920, 1080))
        assert out.as_tuple() == pytest.approx((160, 160, 320, 320), abs=1e-9)

    def test_inverse_scaling(self):
        t = Resize(FrameSize(1920, 1080), FrameSize(320, 320))
        out = t.invert(box(160, 160, 320, 320))
        assert out.as_tuple() == pytest.approx((960, 540, 1920, 1080), abs=1e-9)


class TestCrop:
    def test_origin_subtraction(self):
        t = Crop(box(10, 10, 110, 110))
        assert t.apply(box(10, 10, 20, 20)) == box(0, 0, 10, 10)

    def test_origin_addition_on_invert(self):
        t = Crop(box(10, 10, 110, 110))
        assert t.invert(box(0, 0, 10, 10)) == box(10, 10, 20, 20)

    def test_partially_outside_is_clipped(self):
        t = Crop(box(50, 50, 100, 100))
        out = t.apply(box(40, 60, 70, 80))
        assert out == box(0, 10, 20, 30)

    def test_entirely_outside_yields_empty_signal(self):
        t = Crop(box(50, 50, 100, 100))
        assert t.apply(box(0, 0, 10, 10)) is None


class TestTransformChain:
    def test_chain_apply_then_invert(self):
        chain = Transform((Crop(box(700, 300, 1000, 600)), Resize(FrameSize(300, 300), FrameSize(320, 320))))
        original = box(728.125, 328.125, 756.25, 356.25)
        forward = chain.apply(original)
        assert forward.as_tuple() == pytest.approx((30, 30, 60, 60), abs=1e-9)
        back = chain.invert(forward)
        assert back.as_tuple() == pytest.approx(original.as_tuple(), abs=1e-9)

    def test_round_trip_random_chains(self):
        rng = random.Random(1234)
        for _ in range(2000):
            w, h = rng.randint(100, 2000), rng.randint(100, 2000)
            space = FrameSize(w, h)
            cx0 = rng.randint(0, w - 60)
            cy0 = rng.randint(0, h - 60)
            cw = rng.randint(50, w - cx0)
            ch = rng.randint(50, h - cy0)
            region = box(cx0, cy0, cx0 + cw, cy0 + ch)
            steps = [Crop(region), Resize(FrameSize(cw, ch), FrameSize(rng.randint(32, 640), rng.randint(32, 640)))]
            chain = Transform(tuple(steps))
            x0 = cx0 + rng.uniform(0, cw - 2)
            y0 = cy0 + rng.uniform(0, ch - 2)
            b = box(x0, y0, x0 + rng.uniform(0.5, cx0 + cw - x0), y0 + rng.uniform(0.5, cy0 + ch - y0))
            out = chain.invert(chain.apply(b))
            assert out is not None
            assert max(abs(u - v) for u, v in zip(out.as_tuple(), b.as_tuple())) < 1e-9

    def test_apply_transform_accepts_single_step(self):
        t = Resize(FrameSize(100, 100), FrameSize(200, 200))
        assert apply_transform(box(0, 0, 50, 50), t) == box(0, 0, 100, 100)
        assert invert_transform(box(0, 0, 100, 100), t) == box(0, 0, 50, 50)


class TestDriverSideRegion:
    def test_right_half(self):
        assert driver_side_region(box(0, 0, 100, 50), "right", 0.5) == box(50, 0, 100, 50)

    def test_left_half(self):
        assert driver_side_region(box(0, 0, 100, 50), "left", 0.5) == box(0, 0, 50, 50)

    def test_right_fraction(self):
        out = driver_side_region(box(10, 20, 110, 70), "right", 0.6)
        assert out.as_tuple() == pytest.approx((50, 20, 110, 70), abs=1e-12)

    def test_invalid_arguments(self):
        with pytest.raises(GeometryError):
            driver_side_region(box(0, 0, 10, 10), "right", 0.0)
        with pytest.raises(GeometryError):
            driver_side_region(box(0, 0, 10, 10), "up", 0.5)

    @given(boxes_strategy(), st.sampled_from(["left", "right"]),
           st.floats(0.05, 1.0, allow_nan=False))
    def test_contained_with_fractional_area(self, windscreen, side, fraction):
        region = driver_side_region(windscreen, side, fraction)
        assert region.x_min >= windscreen.x_min - 1e-9
        assert region.x_max <= windscreen.x_max + 1e-9
        assert region.y_min == windscreen.y_min
        assert region.y_max == windscreen.y_max
        assert math.isclose(region.area, fraction * windscreen.area, rel_tol=1e-9)


class TestPixelBounds:
    def test_outward_rounding_and_clipping(self):
        space = FrameSize(100, 100)
        assert box(10.2, 10.8, 20.1, 30.0).pixel_bounds(space) == (10, 10, 21, 30)
        assert box(-5, -5, 200, 50.5).pixel_bounds(space) == (0, 0, 100, 51)

    def test_expanded_padding(self):
        b = box(10, 10, 20, 30)
        grown = b.expanded(0.1)
        assert grown.as_tuple() == pytest.approx((9, 8, 21, 32), abs=1e-12)
        assert b.expanded(0.0) is b
