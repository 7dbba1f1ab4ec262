"""Copy-Paste composition: balanced sampling, scale clamping, free-spot
placement over mosaic backgrounds, and dataset-scale synthesis.

Every synthesized image is a pure function of (bank, backgrounds, config,
image index), so images can be produced in any order or in parallel.
"""

from __future__ import annotations

import hashlib
import json
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import cv2
import numpy as np

from .augment import AugmentationSpec, rng_stream, rotate_crop, scale_crop, clahe_image
from .annotate import ObjectCrop
from .datasetio import LabeledImage, ObjectBank, export_labels, save_image
from .geometry import BBox, Mask, StructuringElement


class SynthesisError(Exception):
    pass


@dataclass
class SynthesisConfig:
    canvas_width: int = 1280
    canvas_height: int = 960
    object_count_range: tuple = (16, 30)  # inclusive; mean 23
    min_area_fraction: float = 0.03
    max_area_fraction: float = 0.25
    oversample_threshold: float = 0.03
    placement_dilation: StructuringElement = field(
        default_factory=lambda: StructuringElement("square", 8))
    max_placement_attempts: int = 100
    augmentation: AugmentationSpec = field(default_factory=AugmentationSpec)
    seed: int = 0

    def __post_init__(self):
        if not 0 < self.min_area_fraction < self.max_area_fraction < 1:
            raise ValueError("need 0 < min_area_fraction < max_area_fraction < 1")
        lo, hi = self.object_count_range
        if lo > hi or lo < 0:
            raise ValueError("object_count_range is empty")
        if not 0 < self.oversample_threshold < 1:
            raise ValueError("oversample_threshold must be in (0, 1)")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["placement_dilation"] = {"shape": self.placement_dilation.shape,
                                   "radius": self.placement_dilation.radius}
        return d

    def config_hash(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True, default=list)
        return hashlib.sha256(blob.encode()).hexdigest()


@dataclass
class PasteRecord:
    class_label: str
    x: int
    y: int
    mask: Mask  # undilated object mask at its pasted size


def balance_pool(bank: ObjectBank, threshold: float) -> ObjectBank:
    """Duplicate whole crop sets of underrepresented classes.

    Each class below the share threshold is duplicated k times (k copies
    total), with k the smallest integer bringing the class's share to the
    threshold when recomputed against its own growth. Classes at or above
    the threshold are untouched. Duplication is by reference.
    """
    if not bank.crops:
        raise SynthesisError("cannot balance an empty bank")
    counts = bank.class_counts
    total = len(bank.crops)
    crops = list(bank.crops)
    for label in sorted(counts):
        n = counts[label]
        if n == 0 or n / total >= threshold:
            continue
        k = 1
        while k * n / (total + (k - 1) * n) < threshold:
            k += 1
        extras = [c for c in bank.crops if c.class_label == label] * (k - 1)
        crops.extend(extras)
    return ObjectBank(crops=crops, class_index=dict(bank.class_index))


def clamp_object_scale(crop: ObjectCrop, canvas_width: int, canvas_height: int,
                       min_frac: float, max_frac: float) -> ObjectCrop:
    """Rescale the crop so its tight-box area fraction sits inside the band."""
    canvas_area = canvas_width * canvas_height
    h, w = crop.mask.shape
    f = (w * h) / canvas_area
    if f < min_frac:
        # aim slightly inside the band so integer rounding cannot undershoot
        crop = scale_crop(crop, float(np.sqrt(min_frac * 1.005 / f)))
    elif f > max_frac:
        crop = scale_crop(crop, float(np.sqrt(max_frac * 0.995 / f)))
    h, w = crop.mask.shape
    if w > canvas_width or h > canvas_height:
        raise SynthesisError(
            f"crop {w}x{h} does not fit {canvas_width}x{canvas_height} canvas")
    return crop


def find_free_spot(occupancy: Mask, obj_mask: Mask, rng: np.random.Generator,
                   max_attempts: int = 100):
    """Uniform rejection sampling of a non-overlapping top-left position."""
    ch, cw = occupancy.shape
    h, w = obj_mask.shape
    if h > ch or w > cw:
        return None
    for _ in range(max_attempts):
        x = int(rng.integers(0, cw - w + 1))
        y = int(rng.integers(0, ch - h + 1))
        if not np.logical_and(occupancy[y:y + h, x:x + w], obj_mask).any():
            return x, y
    return None


def mosaic_background(sources, canvas_width: int, canvas_height: int,
                      rng: np.random.Generator) -> np.ndarray:
    """Four-quadrant mosaic split at a point uniform in the central 20-80%."""
    if len(sources) < 4:
        raise SynthesisError(f"mosaic needs >= 4 source images, got {len(sources)}")
    picks = rng.choice(len(sources), size=4, replace=False)
    cx = int(round(float(rng.uniform(0.2, 0.8)) * canvas_width))
    cy = int(round(float(rng.uniform(0.2, 0.8)) * canvas_height))
    canvas = np.empty((canvas_height, canvas_width, 3), dtype=np.uint8)
    quads = [(0, 0, cx, cy), (cx, 0, canvas_width, cy),
             (0, cy, cx, canvas_height), (cx, cy, canvas_width, canvas_height)]
    for pick, (x0, y0, x1, y1) in zip(picks, quads):
        src = sources[int(pick)]
        sh, sw = src.shape[:2]
        # random sub-region of the source, at least half of each dimension
        rw = int(rng.integers(sw // 2, sw + 1))
        rh = int(rng.integers(sh // 2, sh + 1))
        rx = int(rng.integers(0, sw - rw + 1))
        ry = int(rng.integers(0, sh - rh + 1))
        region = src[ry:ry + rh, rx:rx + rw]
        qw, qh = x1 - x0, y1 - y0
        if qw > 0 and qh > 0:
            canvas[y0:y1, x0:x1] = cv2.resize(region, (qw, qh),
                                              interpolation=cv2.INTER_AREA)
    return canvas


def _paste_augment(crop: ObjectCrop, spec: AugmentationSpec,
                   rng: np.random.Generator) -> ObjectCrop:
    """Per-object paste-time chain: rotate, scale, low-probability blur, CLAHE."""
    angle = float(rng.uniform(*spec.rotation_degrees))
    factor = float(rng.uniform(*spec.scale_range))
    u_blur = rng.random()
    blur_k = int(rng.choice(spec.blur_kernels))
    crop = rotate_crop(crop, angle)
    crop = scale_crop(crop, factor)
    patch = crop.patch
    if u_blur < spec.blur_probability and blur_k > 1:
        patch = cv2.blur(patch, (blur_k, blur_k))
    patch = clahe_image(patch, spec.clahe_clip_limit, spec.clahe_tile_grid)
    return replace(crop, patch=patch)


def _dilate_stamp(mask: Mask, kernel: StructuringElement) -> Mask:
    """Object mask dilated in place on a canvas padded by the kernel radius."""
    r = kernel.radius
    padded = np.pad(mask, r).astype(np.uint8)
    footprint = kernel.footprint().astype(np.uint8)
    return cv2.dilate(padded, footprint, borderType=cv2.BORDER_CONSTANT,
                      borderValue=0).astype(bool)


def synthesize_image_detailed(bank: ObjectBank, backgrounds, cfg: SynthesisConfig,
                              image_index: int):
    """One synthetic image plus the per-paste records backing its annotations."""
    if not bank.crops:
        raise SynthesisError("object bank is empty")
    cw, ch = cfg.canvas_width, cfg.canvas_height
    count_rng = rng_stream(cfg.seed, "image", image_index, "count")
    lo, hi = cfg.object_count_range
    n_objects = int(count_rng.integers(lo, hi + 1))
    canvas = mosaic_background(backgrounds, cw, ch,
                               rng_stream(cfg.seed, "image", image_index, "mosaic"))
    occupancy = np.zeros((ch, cw), dtype=bool)
    annotations, records = [], []
    r = cfg.placement_dilation.radius
    for obj_i in range(n_objects):
        rng = rng_stream(cfg.seed, "image", image_index, "paste", obj_i)
        crop = bank.crops[int(rng.integers(0, len(bank.crops)))]
        crop = _paste_augment(crop, cfg.augmentation, rng)
        crop = clamp_object_scale(crop, cw, ch, cfg.min_area_fraction,
                                  cfg.max_area_fraction)
        spot = find_free_spot(occupancy, crop.mask, rng, cfg.max_placement_attempts)
        if spot is None:
            continue
        x, y = spot
        h, w = crop.mask.shape
        window = (slice(y, y + h), slice(x, x + w))
        canvas[window][crop.mask] = crop.patch[crop.mask]
        annotations.append((crop.class_label, BBox(x, y, x + w, y + h)))
        stamp = _dilate_stamp(crop.mask, cfg.placement_dilation)
        sy0, sx0 = max(0, y - r), max(0, x - r)
        sy1, sx1 = min(ch, y + h + r), min(cw, x + w + r)
        occupancy[sy0:sy1, sx0:sx1] |= stamp[sy0 - (y - r):sy1 - (y - r),
                                             sx0 - (x - r):sx1 - (x - r)]
        records.append(PasteRecord(crop.class_label, x, y, crop.mask))
    labeled = LabeledImage(image=canvas, annotations=annotations,
                           source_tag="synthetic")
    return labeled, records


def synthesize_image(bank: ObjectBank, backgrounds, cfg: SynthesisConfig,
                     image_index: int) -> LabeledImage:
    return synthesize_image_detailed(bank, backgrounds, cfg, image_index)[0]


# ---------------------------------------------------------------------------
# Dataset-scale synthesis

_WORKER: dict = {}


def _worker_init(bank, backgrounds, cfg, out_dir, run_name):
    _WORKER.update(bank=bank, backgrounds=backgrounds, cfg=cfg,
                   out_dir=Path(out_dir), run_name=run_name)


def _worker_one(index: int) -> dict:
    bank, cfg = _WORKER["bank"], _WORKER["cfg"]
    out_dir, run_name = _WORKER["out_dir"], _WORKER["run_name"]
    labeled, _ = synthesize_image_detailed(bank, _WORKER["backgrounds"], cfg, index)
    stem = f"{run_name}_{index:05d}"
    save_image(out_dir / "images" / f"{stem}.png", labeled.image)
    (out_dir / "labels" / f"{stem}.txt").write_text(
        export_labels(labeled, bank.class_index))
    counts: dict = {}
    for label, _ in labeled.annotations:
        counts[label] = counts.get(label, 0) + 1
    return counts


def synthesize_dataset(bank: ObjectBank, backgrounds, cfg: SynthesisConfig,
                       n_images: int, out_dir, run_name: str = "synth",
                       jobs: int = 1) -> dict:
    """Write n_images synthetic image/label pairs plus a manifest.

    Contents depend only on (bank, backgrounds, config, index); the worker
    count never changes the output bytes.
    """
    if n_images < 1:
        raise SynthesisError("n_images must be >= 1")
    out_dir = Path(out_dir)
    (out_dir / "images").mkdir(parents=True, exist_ok=True)
    (out_dir / "labels").mkdir(parents=True, exist_ok=True)
    per_class = {label: 0 for label in bank.class_index}
    if jobs <= 1:
        _worker_init(bank, backgrounds, cfg, out_dir, run_name)
        all_counts = [_worker_one(i) for i in range(n_images)]
    else:
        with ProcessPoolExecutor(max_workers=jobs, initializer=_worker_init,
                                 initargs=(bank, backgrounds, cfg, out_dir,
                                           run_name)) as pool:
            all_counts = list(pool.map(_worker_one, range(n_images), chunksize=8))
    for counts in all_counts:
        for label, n in counts.items():
            per_class[label] = per_class.get(label, 0) + n
    manifest = {
        "config_hash": cfg.config_hash(),
        "seed": cfg.seed,
        "class_index": bank.class_index,
        "per_class_paste_counts": per_class,
        "n_images": n_images,
    }
    (out_dir / "manifest.json").write_text(json.dumps(manifest, indent=2,
                                                      sort_keys=True) + "\n")
    return manifest
