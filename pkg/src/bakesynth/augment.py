"""Seedable image transforms: per-object paste-time augmentations and the
sequential online distortion pipeline.

Every transform is a pure function of its inputs plus an explicit RNG
stream; there is no global randomness anywhere in this module.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, replace

import cv2
import numpy as np

from .annotate import ObjectCrop
from .geometry import BBox, Mask, mask_tight_bbox


def rng_stream(seed: int, *labels) -> np.random.Generator:
    """Counter-based generator keyed by (seed, labels).

    Identical (seed, labels) always yields the identical draw sequence,
    independent of platform and of any other stream, so per-image work can
    run in any order or in parallel.
    """
    digest = hashlib.sha256(repr(tuple(labels)).encode()).digest()
    words = [int.from_bytes(digest[i : i + 4], "little") for i in range(0, 16, 4)]
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([seed & 0xFFFFFFFFFFFFFFFF, *words])))


@dataclass
class AugmentationSpec:
    """Tunables for both the paste-time and the online augmentation chains."""

    spatial_probability: float = 0.01
    pixel_probability: float = 0.04

    rotation_degrees: tuple = (0.0, 360.0)  # paste-time rotation draw
    scale_range: tuple = (0.8, 1.25)  # paste-time scale draw
    blur_probability: float = 0.1  # paste-time "low-probability blur"
    blur_kernels: tuple = (3, 5)
    clahe_clip_limit: float = 2.0
    clahe_tile_grid: tuple = (8, 8)

    online_scale_range: tuple = (0.9, 1.1)
    online_rotation_degrees: tuple = (-15.0, 15.0)
    coarse_dropout_holes: tuple = (1, 8)  # inclusive count range
    coarse_dropout_hole_size: tuple = (8, 32)  # inclusive side range, pixels
    pixel_dropout_fraction: float = 0.01

    def __post_init__(self):
        for p in (self.spatial_probability, self.pixel_probability, self.blur_probability):
            if not 0 <= p <= 1:
                raise ValueError("probabilities must be in [0, 1]")
        if min(self.scale_range) <= 0 or min(self.online_scale_range) <= 0:
            raise ValueError("scale ranges must be positive")
        if not self.blur_kernels:
            raise ValueError("blur kernel choices must be nonempty")


def _tighten(patch: np.ndarray, mask: Mask) -> tuple[np.ndarray, Mask]:
    box = mask_tight_bbox(mask)
    assert box is not None, "transform annihilated the mask"
    w = (slice(box.y_min, box.y_max), slice(box.x_min, box.x_max))
    return patch[w].copy(), mask[w].copy()


def rotate_crop(crop: ObjectCrop, angle: float) -> ObjectCrop:
    """Rotate patch and mask about the patch center, expand, re-tighten.

    Right-angle rotations are pixel permutations (exact); everything else
    uses bilinear resampling for the patch and nearest for the mask.
    """
    if angle % 360 == 0:
        return crop
    if angle % 90 == 0:
        k = int(angle // 90) % 4
        patch = np.rot90(crop.patch, k).copy()
        mask = np.rot90(crop.mask, k).copy()
        return replace(crop, patch=patch, mask=mask)
    h, w = crop.mask.shape
    m = cv2.getRotationMatrix2D((w / 2, h / 2), angle, 1.0)
    cos, sin = abs(m[0, 0]), abs(m[0, 1])
    nw = int(np.ceil(w * cos + h * sin))
    nh = int(np.ceil(w * sin + h * cos))
    m[0, 2] += nw / 2 - w / 2
    m[1, 2] += nh / 2 - h / 2
    patch = cv2.warpAffine(crop.patch, m, (nw, nh), flags=cv2.INTER_LINEAR,
                           borderMode=cv2.BORDER_CONSTANT, borderValue=0)
    mask = cv2.warpAffine(crop.mask.astype(np.uint8), m, (nw, nh),
                          flags=cv2.INTER_NEAREST, borderMode=cv2.BORDER_CONSTANT,
                          borderValue=0).astype(bool)
    patch, mask = _tighten(patch, mask)
    return replace(crop, patch=patch, mask=mask)


def scale_crop(crop: ObjectCrop, factor: float) -> ObjectCrop:
    """Resize patch and mask by a common factor; mask stays binary."""
    if factor <= 0:
        raise ValueError("scale factor must be positive")
    if factor == 1.0:
        return crop
    h, w = crop.mask.shape
    nw, nh = round(w * factor), round(h * factor)
    if nw < 1 or nh < 1:
        raise ValueError(f"scale factor {factor} degenerates a {w}x{h} crop")
    interp = cv2.INTER_AREA if factor < 1 else cv2.INTER_LINEAR
    patch = cv2.resize(crop.patch, (nw, nh), interpolation=interp)
    mask = cv2.resize(crop.mask.astype(np.uint8), (nw, nh),
                      interpolation=cv2.INTER_NEAREST).astype(bool)
    if not mask.any():
        raise ValueError(f"scale factor {factor} annihilated the crop mask")
    patch, mask = _tighten(patch, mask)
    return replace(crop, patch=patch, mask=mask)


# ---------------------------------------------------------------------------
# CLAHE

def clahe_channel(channel: np.ndarray, clip_limit: float = 2.0,
                  tile_grid: tuple = (8, 8)) -> np.ndarray:
    """Contrast-limited adaptive histogram equalization on one uint8 channel.

    Per-tile histograms are clipped at clip_limit times the uniform bin
    height, the excess is redistributed evenly, and the per-tile mapping is
    the mid-bin cumulative scaled to [0, 255] (a flat tile maps its value
    back to itself up to rounding). Pixel values are bilinearly interpolated
    between the four surrounding tile mappings.
    """
    h, w = channel.shape
    ty, tx = max(1, min(tile_grid[0], h)), max(1, min(tile_grid[1], w))
    y_edges = np.linspace(0, h, ty + 1).round().astype(int)
    x_edges = np.linspace(0, w, tx + 1).round().astype(int)

    row_tile = np.searchsorted(y_edges, np.arange(h), side="right") - 1
    col_tile = np.searchsorted(x_edges, np.arange(w), side="right") - 1
    tile_id = row_tile[:, None] * tx + col_tile[None, :]
    hist = np.bincount((tile_id.astype(np.intp) * 256 + channel).ravel(),
                       minlength=ty * tx * 256).reshape(ty, tx, 256).astype(np.float64)
    n = (np.diff(y_edges)[:, None] * np.diff(x_edges)[None, :]).astype(np.float64)
    limit = np.maximum(1.0, clip_limit * n / 256.0)[:, :, None]
    excess = np.maximum(hist - limit, 0.0).sum(axis=2, keepdims=True)
    hist = np.minimum(hist, limit) + excess / 256.0
    cdf = np.cumsum(hist, axis=2)
    luts = (cdf - hist / 2.0) * (255.0 / n[:, :, None])

    cy = (y_edges[:-1] + y_edges[1:]) / 2.0
    cx = (x_edges[:-1] + x_edges[1:]) / 2.0
    ys = np.arange(h, dtype=np.float64)
    xs = np.arange(w, dtype=np.float64)
    i1 = np.clip(np.searchsorted(cy, ys), 0, ty - 1)
    i0 = np.clip(i1 - 1, 0, ty - 1)
    j1 = np.clip(np.searchsorted(cx, xs), 0, tx - 1)
    j0 = np.clip(j1 - 1, 0, tx - 1)
    denom_y = np.where(cy[i1] > cy[i0], cy[i1] - cy[i0], 1.0)
    denom_x = np.where(cx[j1] > cx[j0], cx[j1] - cx[j0], 1.0)
    wy = np.clip((ys - cy[i0]) / denom_y, 0.0, 1.0)
    wx = np.clip((xs - cx[j0]) / denom_x, 0.0, 1.0)

    v = channel.astype(np.intp)
    a = luts[i0[:, None], j0[None, :], v]
    b = luts[i0[:, None], j1[None, :], v]
    c = luts[i1[:, None], j0[None, :], v]
    d = luts[i1[:, None], j1[None, :], v]
    top = a * (1 - wx)[None, :] + b * wx[None, :]
    bot = c * (1 - wx)[None, :] + d * wx[None, :]
    out = top * (1 - wy)[:, None] + bot * wy[:, None]
    return np.clip(np.rint(out), 0, 255).astype(np.uint8)


def clahe_image(img: np.ndarray, clip_limit: float = 2.0, tile_grid: tuple = (8, 8)) -> np.ndarray:
    """CLAHE on the lightness channel of a BGR image (or directly on gray)."""
    if img.ndim == 2:
        return clahe_channel(img, clip_limit, tile_grid)
    lab = cv2.cvtColor(img, cv2.COLOR_BGR2LAB)
    lab[:, :, 0] = clahe_channel(lab[:, :, 0], clip_limit, tile_grid)
    return cv2.cvtColor(lab, cv2.COLOR_LAB2BGR)


# ---------------------------------------------------------------------------
# Pixel- and spatial-level transforms for the online pipeline

def pixel_transform(img: np.ndarray, kind: str, spec: AugmentationSpec,
                    rng: np.random.Generator) -> np.ndarray:
    """Dims-preserving pixel-level transforms: blur, median_blur, to_gray, clahe."""
    if kind == "blur":
        k = int(rng.choice(spec.blur_kernels))
        return img if k <= 1 else cv2.blur(img, (k, k))
    if kind == "median_blur":
        k = int(rng.choice(spec.blur_kernels))
        return img if k <= 1 else cv2.medianBlur(img, k)
    if kind == "to_gray":
        gray = cv2.cvtColor(img, cv2.COLOR_BGR2GRAY)
        return np.repeat(gray[:, :, None], 3, axis=2)
    if kind == "clahe":
        return clahe_image(img, spec.clahe_clip_limit, spec.clahe_tile_grid)
    raise ValueError(f"unknown pixel transform {kind!r}")


def _rotate_boxes(boxes, m, width, height):
    out = []
    for label, b in boxes:
        corners = np.array([[b.x_min, b.y_min], [b.x_max, b.y_min],
                            [b.x_min, b.y_max], [b.x_max, b.y_max]], dtype=np.float64)
        pts = corners @ m[:, :2].T + m[:, 2]
        x0 = int(np.clip(np.floor(pts[:, 0].min()), 0, width - 1))
        y0 = int(np.clip(np.floor(pts[:, 1].min()), 0, height - 1))
        x1 = int(np.clip(np.ceil(pts[:, 0].max()), x0 + 1, width))
        y1 = int(np.clip(np.ceil(pts[:, 1].max()), y0 + 1, height))
        out.append((label, BBox(x0, y0, x1, y1)))
    return out


def spatial_transform(img: np.ndarray, boxes, kind: str, spec: AugmentationSpec,
                      rng: np.random.Generator):
    """Spatial transforms for the online pipeline.

    Boxes follow the raster for scale and rotate; the dropout kinds leave
    them untouched by design.
    """
    if kind == "coarse_dropout":
        h, w = img.shape[:2]
        out = img.copy()
        n_holes = int(rng.integers(spec.coarse_dropout_holes[0], spec.coarse_dropout_holes[1] + 1))
        lo, hi = spec.coarse_dropout_hole_size
        for _ in range(n_holes):
            hw = int(rng.integers(lo, hi + 1))
            hh = int(rng.integers(lo, hi + 1))
            x = int(rng.integers(0, max(1, w - hw + 1)))
            y = int(rng.integers(0, max(1, h - hh + 1)))
            out[y:y + hh, x:x + hw] = 0
        return out, boxes
    if kind == "pixel_dropout":
        drop = rng.random(img.shape[:2]) < spec.pixel_dropout_fraction
        out = img.copy()
        out[drop] = 0
        return out, boxes
    if kind == "scale":
        factor = float(rng.uniform(*spec.online_scale_range))
        h, w = img.shape[:2]
        nw, nh = max(1, round(w * factor)), max(1, round(h * factor))
        if (nw, nh) == (w, h):
            return img, boxes
        interp = cv2.INTER_AREA if factor < 1 else cv2.INTER_LINEAR
        out = cv2.resize(img, (nw, nh), interpolation=interp)
        sx, sy = nw / w, nh / h
        scaled = []
        for label, b in boxes:
            x0 = int(np.floor(b.x_min * sx))
            y0 = int(np.floor(b.y_min * sy))
            x1 = min(nw, max(x0 + 1, int(np.ceil(b.x_max * sx))))
            y1 = min(nh, max(y0 + 1, int(np.ceil(b.y_max * sy))))
            scaled.append((label, BBox(x0, y0, x1, y1)))
        return out, scaled
    if kind == "rotate":
        angle = float(rng.uniform(*spec.online_rotation_degrees))
        if angle == 0.0:
            return img, boxes
        h, w = img.shape[:2]
        m = cv2.getRotationMatrix2D((w / 2, h / 2), angle, 1.0)
        out = cv2.warpAffine(img, m, (w, h), flags=cv2.INTER_LINEAR,
                             borderMode=cv2.BORDER_CONSTANT, borderValue=0)
        return out, _rotate_boxes(boxes, m, w, h)
    raise ValueError(f"unknown spatial transform {kind!r}")


SPATIAL_KINDS = ("coarse_dropout", "pixel_dropout", "scale", "rotate")
PIXEL_KINDS = ("blur", "median_blur", "to_gray", "clahe")


def dp_pipeline(img: np.ndarray, boxes, spec: AugmentationSpec,
                rng: np.random.Generator, trace: list | None = None):
    """Sequential online distortion chain.

    Four spatial transforms each fire with spatial_probability, then four
    pixel transforms each with pixel_probability. Each acceptance decision
    consumes exactly one uniform draw from `rng` whether or not it fires;
    transform parameters come from per-transform substreams so the decision
    stream stays aligned across runs with different outcomes. When a list is
    passed as `trace`, the names of the transforms that fired are appended.
    """
    boxes = list(boxes)
    param_seed = int(rng.integers(0, 2**63 - 1))
    for kind in SPATIAL_KINDS:
        if rng.random() < spec.spatial_probability:
            img, boxes = spatial_transform(img, boxes, kind, spec,
                                           rng_stream(param_seed, "dp", kind))
            if trace is not None:
                trace.append(kind)
    for kind in PIXEL_KINDS:
        if rng.random() < spec.pixel_probability:
            img = pixel_transform(img, kind, spec, rng_stream(param_seed, "dp", kind))
            if trace is not None:
                trace.append(kind)
    return img, boxes
