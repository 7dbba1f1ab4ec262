import sys
from pathlib import Path

import cv2
import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from bakesynth import ObjectCrop


def random_mask(rng, max_side=64, p=0.4):
    h = int(rng.integers(1, max_side + 1))
    w = int(rng.integers(1, max_side + 1))
    return rng.random((h, w)) < p


def blob_mask(h, w, fill="ellipse"):
    """Tight object-like mask: ellipse (fat blob) or crescent (sparser)."""
    yy, xx = np.mgrid[0:h, 0:w]
    cy, cx = (h - 1) / 2, (w - 1) / 2
    ry, rx = h / 2, w / 2
    ellipse = ((yy - cy) / ry) ** 2 + ((xx - cx) / rx) ** 2 <= 1.0
    if fill == "ellipse":
        return ellipse
    # crescent: subtract a shifted inner ellipse
    inner = ((yy - cy + 0.35 * h) / (0.9 * ry)) ** 2 + ((xx - cx) / (0.9 * rx)) ** 2 <= 1.0
    mask = ellipse & ~inner
    return mask


def make_crop(h, w, label="bun", source_id="c0", fill="ellipse", value=None, rng=None):
    mask = blob_mask(h, w, fill)
    ys, xs = np.nonzero(mask)
    window = (slice(ys.min(), ys.max() + 1), slice(xs.min(), xs.max() + 1))
    mask = mask[window]
    if rng is None:
        rng = np.random.default_rng(0)
    patch = rng.integers(40, 216, size=(*mask.shape, 3), dtype=np.int64).astype(np.uint8)
    if value is not None:
        patch[:] = value
    patch[~mask] = 0
    return ObjectCrop(patch=patch, mask=mask, class_label=label, source_id=source_id)


def make_backgrounds(rng, n=4, h=480, w=640):
    out = []
    for _ in range(n):
        base = rng.integers(60, 200, size=3)
        img = np.empty((h, w, 3), np.uint8)
        img[:] = base
        noise = rng.integers(-25, 26, size=(h, w, 1))
        img = np.clip(img.astype(int) + noise, 0, 255).astype(np.uint8)
        out.append(cv2.blur(img, (7, 7)))
    return out


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
