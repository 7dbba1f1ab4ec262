"""Dataset loading, label export, image standardization, and statistics.

On-disk conventions:
  images: PNG, BGR channel order in memory (OpenCV convention)
  masks:  single-channel PNG, 0 = background, nonzero = foreground
  labels: one line per annotation, `<class_id> <cx> <cy> <w> <h>` with all
          geometry normalized to [0, 1] by image dims, 6 decimal places
  crop banks: `<id>.crop.png` + `<id>.mask.png` + `manifest.json`
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import cv2
import numpy as np

from .annotate import UNKNOWN_LABEL, ObjectCrop
from .geometry import BBox, Mask

SOURCE_TAGS = ("train_b", "train_c", "train_a", "train_s", "synthetic", "test")


class DatasetError(Exception):
    pass


@dataclass
class LabeledImage:
    image: np.ndarray
    annotations: list  # [(class_label, BBox), ...]
    source_tag: str = "synthetic"

    def __post_init__(self):
        h, w = self.image.shape[:2]
        for label, box in self.annotations:
            if box.x_min < 0 or box.y_min < 0 or box.x_max > w or box.y_max > h:
                raise ValueError(f"annotation {box} outside {w}x{h} image")


@dataclass
class ObjectBank:
    crops: list  # [ObjectCrop, ...]
    class_index: dict = field(default_factory=dict)  # class_label -> int id

    def __post_init__(self):
        if not self.class_index:
            labels = sorted({c.class_label for c in self.crops})
            self.class_index = {lab: i for i, lab in enumerate(labels)}
        for c in self.crops:
            if c.class_label not in self.class_index:
                raise ValueError(f"crop label {c.class_label!r} missing from class index")

    @property
    def class_counts(self) -> dict:
        counts = {lab: 0 for lab in self.class_index}
        for c in self.crops:
            counts[c.class_label] += 1
        return counts


# ---------------------------------------------------------------------------
# Raster IO

def save_mask(path, mask: Mask) -> None:
    cv2.imwrite(str(path), mask.astype(np.uint8) * 255)


def load_mask(path) -> Mask:
    raw = cv2.imread(str(path), cv2.IMREAD_GRAYSCALE)
    if raw is None:
        raise DatasetError(f"cannot read mask {path}")
    return raw > 0


def save_image(path, img: np.ndarray) -> None:
    if not cv2.imwrite(str(path), img):
        raise DatasetError(f"cannot write image {path}")


def load_image(path) -> np.ndarray:
    img = cv2.imread(str(path), cv2.IMREAD_COLOR)
    if img is None:
        raise DatasetError(f"cannot read image {path}")
    return img


# ---------------------------------------------------------------------------
# Crop banks

def save_object_bank(path, crops) -> None:
    """Write crops and their manifest to a bank directory."""
    path = Path(path)
    path.mkdir(parents=True, exist_ok=True)
    entries = []
    for crop in crops:
        save_image(path / f"{crop.source_id}.crop.png", crop.patch)
        save_mask(path / f"{crop.source_id}.mask.png", crop.mask)
        entries.append({"id": crop.source_id, "class_label": crop.class_label,
                        "origin": crop.origin})
    manifest = {"crops": sorted(entries, key=lambda e: e["id"])}
    (path / "manifest.json").write_text(json.dumps(manifest, indent=2) + "\n")


def load_object_bank(path, class_list, cast_unknown: bool = False) -> ObjectBank:
    """Load a crop bank directory, validating every crop.

    Crops whose label is outside class_list are cast to "unknown" when
    cast_unknown is set, otherwise rejected with a per-file diagnostic.
    Invalid crops never abort the load; they are collected and reported.
    """
    path = Path(path)
    manifest_path = path / "manifest.json"
    if not manifest_path.exists():
        raise DatasetError(f"no manifest.json in {path}")
    manifest = json.loads(manifest_path.read_text())
    crops, diagnostics = [], []
    for entry in sorted(manifest["crops"], key=lambda e: e["id"]):
        cid, label = entry["id"], entry["class_label"]
        try:
            patch = load_image(path / f"{cid}.crop.png")
            mask = load_mask(path / f"{cid}.mask.png")
            if label not in class_list:
                if cast_unknown:
                    label = UNKNOWN_LABEL
                else:
                    raise DatasetError(f"label {label!r} not in class list")
            crops.append(ObjectCrop(patch=patch, mask=mask, class_label=label,
                                    source_id=cid, origin=entry.get("origin", "captured")))
        except (DatasetError, ValueError) as exc:
            diagnostics.append(f"{cid}: {exc}")
    if not crops:
        raise DatasetError(f"bank {path} is empty"
                           + (f" ({len(diagnostics)} rejected)" if diagnostics else ""))
    index = {lab: i for i, lab in enumerate(list(class_list) + [UNKNOWN_LABEL])}
    bank = ObjectBank(crops=crops, class_index=index)
    bank.diagnostics = diagnostics
    return bank


# ---------------------------------------------------------------------------
# Label files

def export_labels(img: LabeledImage, class_index: dict) -> str:
    """Detection label text: `<id> <cx> <cy> <w> <h>` normalized, 6 decimals."""
    h, w = img.image.shape[:2]
    lines = []
    for label, box in img.annotations:
        if label not in class_index:
            raise DatasetError(f"label {label!r} missing from class index")
        cx = (box.x_min + box.x_max) / 2 / w
        cy = (box.y_min + box.y_max) / 2 / h
        bw = box.width / w
        bh = box.height / h
        lines.append(f"{class_index[label]} {cx:.6f} {cy:.6f} {bw:.6f} {bh:.6f}")
    return "".join(line + "\n" for line in lines)


def parse_labels(text: str, width: int, height: int, class_names: dict | None = None):
    """Inverse of export_labels; returns [(class_id_or_name, BBox), ...]."""
    out = []
    for lineno, line in enumerate(text.splitlines(), 1):
        if not line.strip():
            continue
        parts = line.split()
        if len(parts) != 5:
            raise DatasetError(f"line {lineno}: expected 5 fields, got {len(parts)}")
        cid = int(parts[0])
        cx, cy, bw, bh = (float(p) for p in parts[1:])
        for name, value in (("cx", cx), ("cy", cy), ("w", bw), ("h", bh)):
            if not 0 <= value <= 1:
                raise DatasetError(f"line {lineno}: {name}={value} outside [0, 1]")
        x0 = round((cx - bw / 2) * width)
        y0 = round((cy - bh / 2) * height)
        x1 = round((cx + bw / 2) * width)
        y1 = round((cy + bh / 2) * height)
        box = BBox(max(0, x0), max(0, y0), min(width, max(x0 + 1, x1)),
                   min(height, max(y0 + 1, y1)))
        out.append((class_names[cid] if class_names else cid, box))
    return out


# ---------------------------------------------------------------------------
# Standardization and statistics

def standardize_image(img: LabeledImage, longest_side: int = 1280) -> LabeledImage:
    """Resize so the longest side equals longest_side, boxes rescaled too."""
    if longest_side < 32:
        raise ValueError("longest_side must be >= 32")
    h, w = img.image.shape[:2]
    if max(h, w) == longest_side:
        return img
    s = longest_side / max(h, w)
    nw, nh = round(w * s), round(h * s)
    interp = cv2.INTER_AREA if s < 1 else cv2.INTER_LINEAR
    raster = cv2.resize(img.image, (nw, nh), interpolation=interp)
    sx, sy = nw / w, nh / h
    boxes = []
    for label, b in img.annotations:
        x0, y0 = round(b.x_min * sx), round(b.y_min * sy)
        x1 = min(nw, max(x0 + 1, round(b.x_max * sx)))
        y1 = min(nh, max(y0 + 1, round(b.y_max * sy)))
        boxes.append((label, BBox(x0, y0, x1, y1)))
    return LabeledImage(image=raster, annotations=boxes, source_tag=img.source_tag)


def class_distribution(items) -> dict:
    """Per-class (count, share) over LabeledImages or ObjectCrops."""
    counts: dict = {}
    for item in items:
        if isinstance(item, LabeledImage):
            for label, _ in item.annotations:
                counts[label] = counts.get(label, 0) + 1
        else:
            counts[item.class_label] = counts.get(item.class_label, 0) + 1
    total = sum(counts.values())
    return {lab: (n, n / total if total else 0.0) for lab, n in sorted(counts.items())}


def dataset_stats(dataset_dir) -> dict:
    """Scan an images/ + labels/ dataset directory and report statistics."""
    root = Path(dataset_dir)
    images_dir, labels_dir = root / "images", root / "labels"
    image_files = sorted(images_dir.glob("*.png")) if images_dir.is_dir() else []
    label_files = sorted(labels_dir.glob("*.txt")) if labels_dir.is_dir() else []
    label_stems = {p.stem for p in label_files}
    image_stems = {p.stem for p in image_files}
    warnings = [f"orphan image: {p.name}" for p in image_files if p.stem not in label_stems]
    warnings += [f"orphan label: {p.name}" for p in label_files if p.stem not in image_stems]

    per_image_counts = []
    class_counts: dict = {}
    area_fractions = []
    for img_path in image_files:
        if img_path.stem not in label_stems:
            continue
        img = load_image(img_path)
        h, w = img.shape[:2]
        boxes = parse_labels((labels_dir / f"{img_path.stem}.txt").read_text(), w, h)
        per_image_counts.append(len(boxes))
        for cid, box in boxes:
            class_counts[cid] = class_counts.get(cid, 0) + 1
            area_fractions.append(box.area / (w * h))

    n_ann = sum(per_image_counts)
    return {
        "n_images": len(per_image_counts),
        "n_annotations": n_ann,
        "objects_per_image": {
            "mean": float(np.mean(per_image_counts)) if per_image_counts else 0.0,
            "min": int(min(per_image_counts)) if per_image_counts else 0,
            "max": int(max(per_image_counts)) if per_image_counts else 0,
        },
        "class_histogram": {str(k): v for k, v in sorted(class_counts.items())},
        "class_shares": {str(k): v / n_ann for k, v in sorted(class_counts.items())} if n_ann else {},
        "area_fraction": {
            "min": float(min(area_fractions)) if area_fractions else 0.0,
            "max": float(max(area_fractions)) if area_fractions else 0.0,
            "histogram": np.histogram(area_fractions, bins=20, range=(0.0, 1.0))[0].tolist(),
        },
        "warnings": warnings,
    }
