"""Raster and box primitives: IoU, tight boxes, binary morphology, components.

Masks are plain 2-D boolean numpy arrays (row-major, [y, x]). Boxes use
integer pixel coordinates with half-open intervals: pixel x is inside the
box iff x_min <= x < x_max. Degenerate boxes are never constructed; "no
box" is represented by None.
"""

from __future__ import annotations

from dataclasses import dataclass

import cv2
import numpy as np

Mask = np.ndarray  # 2-D bool array


@dataclass(frozen=True)
class BBox:
    x_min: int
    y_min: int
    x_max: int
    y_max: int

    def __post_init__(self):
        if not (self.x_min < self.x_max and self.y_min < self.y_max):
            raise ValueError(f"degenerate box {self!r}")

    @property
    def width(self) -> int:
        return self.x_max - self.x_min

    @property
    def height(self) -> int:
        return self.y_max - self.y_min

    @property
    def area(self) -> int:
        return self.width * self.height

    def translate(self, dx: int, dy: int) -> "BBox":
        return BBox(self.x_min + dx, self.y_min + dy, self.x_max + dx, self.y_max + dy)


@dataclass(frozen=True)
class StructuringElement:
    shape: str  # "square" | "disk"
    radius: int

    def __post_init__(self):
        if self.shape not in ("square", "disk"):
            raise ValueError(f"unknown structuring element shape {self.shape!r}")
        if self.radius < 1:
            raise ValueError("structuring element radius must be >= 1")

    def footprint(self) -> np.ndarray:
        """Boolean footprint, symmetric about its center."""
        r = self.radius
        if self.shape == "square":
            return np.ones((2 * r + 1, 2 * r + 1), dtype=bool)
        yy, xx = np.mgrid[-r : r + 1, -r : r + 1]
        return (yy * yy + xx * xx) <= r * r


def iou(a: BBox, b: BBox) -> float:
    """Intersection over union of two boxes; 0.0 when disjoint."""
    ix = min(a.x_max, b.x_max) - max(a.x_min, b.x_min)
    iy = min(a.y_max, b.y_max) - max(a.y_min, b.y_min)
    if ix <= 0 or iy <= 0:
        return 0.0
    inter = ix * iy
    return inter / (a.area + b.area - inter)


def mask_tight_bbox(mask: Mask) -> BBox | None:
    """Smallest box containing all foreground pixels; None for empty masks."""
    ys, xs = np.nonzero(mask)
    if ys.size == 0:
        return None
    return BBox(int(xs.min()), int(ys.min()), int(xs.max()) + 1, int(ys.max()) + 1)


def morph(mask: Mask, op: str, kernel: StructuringElement) -> Mask:
    """Binary morphology with out-of-bounds neighborhoods treated as background.

    op is one of erode, dilate, open (erode then dilate), close (dilate then
    erode). Output dims equal input dims.
    """
    footprint = kernel.footprint().astype(np.uint8)
    src = mask.astype(np.uint8)
    # borderValue=0 keeps the outside-is-background policy for both directions.
    ops = {
        "erode": lambda m: cv2.erode(m, footprint, borderType=cv2.BORDER_CONSTANT, borderValue=0),
        "dilate": lambda m: cv2.dilate(m, footprint, borderType=cv2.BORDER_CONSTANT, borderValue=0),
    }
    if op == "open":
        out = ops["dilate"](ops["erode"](src))
    elif op == "close":
        out = ops["erode"](ops["dilate"](src))
    elif op in ops:
        out = ops[op](src)
    else:
        raise ValueError(f"unknown morphology op {op!r}")
    return out.astype(bool)


def connected_components(mask: Mask, connectivity: int = 8) -> list[tuple[int, int, BBox]]:
    """Labelled components as (component id, pixel count, tight box).

    Sorted by pixel count descending; ties broken by smaller (y_min, x_min)
    of the component box. Ids are 1-based labels from the labelling pass.
    """
    if connectivity not in (4, 8):
        raise ValueError("connectivity must be 4 or 8")
    n, labels, stats, _ = cv2.connectedComponentsWithStats(
        mask.astype(np.uint8), connectivity=connectivity
    )
    comps = []
    for lab in range(1, n):
        x, y, w, h, count = stats[lab]
        comps.append((lab, int(count), BBox(int(x), int(y), int(x + w), int(y + h))))
    comps.sort(key=lambda c: (-c[1], c[2].y_min, c[2].x_min))
    return comps
