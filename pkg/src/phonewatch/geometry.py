"""Coordinate-space-aware boxes and the transforms between frame, crop and
detector-input spaces.

All boxes are corner-form (x_min, y_min, x_max, y_max) in continuous pixel
coordinates. Center/width/height annotation formats must be converted at
parse time. Transforms are exact and invertible on boxes, which is what lets
detections made on a resized crop be drawn back onto the original frame.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Literal, Sequence, Union

from .errors import GeometryError

Side = Literal["left", "right"]


@dataclass(frozen=True)
class FrameSize:
    """Pixel dimensions of an image space."""

    width: int
    height: int

    def __post_init__(self):
        if self.width < 1 or self.height < 1:
            raise GeometryError(f"frame size must be >= 1x1, got {self.width}x{self.height}")


@dataclass(frozen=True)
class BBox:
    """Axis-aligned rectangle with strictly positive area."""

    x_min: float
    y_min: float
    x_max: float
    y_max: float

    def __post_init__(self):
        if not (self.x_min < self.x_max and self.y_min < self.y_max):
            raise GeometryError(
                f"degenerate box ({self.x_min}, {self.y_min}, {self.x_max}, {self.y_max})"
            )

    @property
    def width(self) -> float:
        return self.x_max - self.x_min

    @property
    def height(self) -> float:
        return self.y_max - self.y_min

    @property
    def area(self) -> float:
        return self.width * self.height

    @property
    def center(self) -> tuple[float, float]:
        return (0.5 * (self.x_min + self.x_max), 0.5 * (self.y_min + self.y_max))

    def as_tuple(self) -> tuple[float, float, float, float]:
        return (self.x_min, self.y_min, self.x_max, self.y_max)

    def clamped(self, width: float, height: float) -> BBox | None:
        """Clip to [0, width] x [0, height]; None when nothing is left."""
        x0 = min(max(self.x_min, 0.0), width)
        y0 = min(max(self.y_min, 0.0), height)
        x1 = min(max(self.x_max, 0.0), width)
        y1 = min(max(self.y_max, 0.0), height)
        if x0 >= x1 or y0 >= y1:
            return None
        return BBox(x0, y0, x1, y1)

    def expanded(self, ratio: float) -> BBox:
        """Grow by `ratio` of width/height on every side (crop padding)."""
        if ratio == 0.0:
            return self
        dx = ratio * self.width
        dy = ratio * self.height
        return BBox(self.x_min - dx, self.y_min - dy, self.x_max + dx, self.y_max + dy)

    def pixel_bounds(self, space: FrameSize) -> tuple[int, int, int, int]:
        """Outward-rounded integer bounds clipped to `space`, for array slicing."""
        x0 = max(0, math.floor(self.x_min))
        y0 = max(0, math.floor(self.y_min))
        x1 = min(space.width, math.ceil(self.x_max))
        y1 = min(space.height, math.ceil(self.y_max))
        return x0, y0, x1, y1


def iou(a: BBox, b: BBox) -> float:
    """Intersection over union of two boxes; 0 when disjoint."""
    ix = min(a.x_max, b.x_max) - max(a.x_min, b.x_min)
    iy = min(a.y_max, b.y_max) - max(a.y_min, b.y_min)
    if ix <= 0.0 or iy <= 0.0:
        return 0.0
    inter = ix * iy
    return inter / (a.area + b.area - inter)


@dataclass(frozen=True)
class Resize:
    """Uniform per-axis scaling from one frame space to another."""

    src: FrameSize
    dst: FrameSize

    def apply(self, box: BBox) -> BBox | None:
        sx = self.dst.width / self.src.width
        sy = self.dst.height / self.src.height
        scaled = BBox(box.x_min * sx, box.y_min * sy, box.x_max * sx, box.y_max * sy)
        return scaled.clamped(self.dst.width, self.dst.height)

    def invert(self, box: BBox) -> BBox | None:
        sx = self.src.width / self.dst.width
        sy = self.src.height / self.dst.height
        scaled = BBox(box.x_min * sx, box.y_min * sy, box.x_max * sx, box.y_max * sy)
        return scaled.clamped(self.src.width, self.src.height)


@dataclass(frozen=True)
class Crop:
    """Restriction to a sub-region; target origin is the region's corner.

    Boxes partially outside the region are clipped, not rejected; a box whose
    clipped area is zero maps to None (empty result, not an error).
    """

    region: BBox

    def apply(self, box: BBox) -> BBox | None:
        shifted = BBox(
            box.x_min - self.region.x_min,
            box.y_min - self.region.y_min,
            box.x_max - self.region.x_min,
            box.y_max - self.region.y_min,
        )
        return shifted.clamped(self.region.width, self.region.height)

    def invert(self, box: BBox) -> BBox:
        return BBox(
            box.x_min + self.region.x_min,
            box.y_min + self.region.y_min,
            box.x_max + self.region.x_min,
            box.y_max + self.region.y_min,
        )


Step = Union[Resize, Crop]


@dataclass(frozen=True)
class Transform:
    """An ordered chain of resize/crop steps, applied left to right."""

    steps: tuple[Step, ...]

    def __init__(self, steps: Sequence[Step] = ()):
        object.__setattr__(self, "steps", tuple(steps))

    def then(self, step: Step) -> Transform:
        return Transform(self.steps + (step,))

    def apply(self, box: BBox) -> BBox | None:
        current: BBox | None = box
        for step in self.steps:
            if current is None:
                return None
            current = step.apply(current)
        return current

    def invert(self, box: BBox) -> BBox | None:
        current: BBox | None = box
        for step in reversed(self.steps):
            if current is None:
                return None
            current = step.invert(current)
        return current


def _as_transform(t: Transform | Step) -> Transform:
    if isinstance(t, Transform):
        return t
    return Transform((t,))


def apply_transform(box: BBox, t: Transform | Step) -> BBox | None:
    """Map `box` from the transform's source space into its target space."""
    return _as_transform(t).apply(box)


def invert_transform(box: BBox, t: Transform | Step) -> BBox | None:
    """Exact inverse of :func:`apply_transform`."""
    return _as_transform(t).invert(box)


def driver_side_region(windscreen: BBox, side: Side, fraction: float) -> BBox:
    """The horizontal `fraction` of the windscreen nearest `side`, full height.

    `side` is where the driver sits as seen by the camera: "right" for
    right-hand-drive territories; left-hand-drive deployments simply crop the
    opposite side.
    """
    if not 0.0 < fraction <= 1.0:
        raise GeometryError(f"fraction must be in (0, 1], got {fraction}")
    if side not in ("left", "right"):
        raise GeometryError(f"side must be 'left' or 'right', got {side!r}")
    w = fraction * windscreen.width
    if side == "right":
        return BBox(windscreen.x_max - w, windscreen.y_min, windscreen.x_max, windscreen.y_max)
    return BBox(windscreen.x_min, windscreen.y_min, windscreen.x_min + w, windscreen.y_max)
