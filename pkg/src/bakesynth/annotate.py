"""Semi-automatic annotation: candidate masks in, refined object crops out.

The candidate masks come from an external promptable segmentation model.
This module picks the biggest non-background candidate, cleans it with
morphology, and derives a tight-box annotation from its biggest component.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import cv2
import numpy as np

from .geometry import BBox, Mask, StructuringElement, connected_components, iou, mask_tight_bbox, morph

UNKNOWN_LABEL = "unknown"

DEFAULT_BACKGROUND_IOU = 0.9
DEFAULT_REFINE_KERNEL = StructuringElement("square", 2)


class AnnotationError(Exception):
    """Raised when no usable annotation can be derived from an image."""


@dataclass
class MaskCandidateSet:
    width: int
    height: int
    candidates: list[Mask] = field(default_factory=list)

    def __post_init__(self):
        for m in self.candidates:
            if m.shape != (self.height, self.width):
                raise ValueError(
                    f"candidate mask shape {m.shape} does not match image "
                    f"({self.height}, {self.width})"
                )


@dataclass
class ObjectCrop:
    """A tight image patch with its binary mask; the unit of pasting."""

    patch: np.ndarray  # HxWx3 uint8
    mask: Mask  # HxW bool
    class_label: str
    source_id: str
    origin: str = "captured"  # "captured" | "generated"

    def __post_init__(self):
        if self.mask.shape != self.patch.shape[:2]:
            raise ValueError("crop mask dims must equal patch dims")
        box = mask_tight_bbox(self.mask)
        if box is None:
            raise ValueError("crop mask is empty")
        h, w = self.mask.shape
        if (box.x_min, box.y_min, box.x_max, box.y_max) != (0, 0, w, h):
            raise ValueError("crop mask must touch all four patch borders")

    @property
    def box(self) -> BBox:
        h, w = self.mask.shape
        return BBox(0, 0, w, h)


def select_object_mask(
    candidates: MaskCandidateSet, background_iou_threshold: float = DEFAULT_BACKGROUND_IOU
) -> Mask | None:
    """Biggest candidate whose tight box is not the whole image.

    A candidate counts as background when its tight box has IoU above the
    threshold with the full-image box. Returns None when no candidate
    qualifies.
    """
    if not (0 < background_iou_threshold <= 1):
        raise ValueError("background_iou_threshold must be in (0, 1]")
    image_box = BBox(0, 0, candidates.width, candidates.height)
    best: Mask | None = None
    best_count = -1
    for m in candidates.candidates:
        box = mask_tight_bbox(m)
        if box is None or iou(box, image_box) > background_iou_threshold:
            continue
        count = int(np.count_nonzero(m))
        if count > best_count:
            best, best_count = m, count
    return best


def refine_mask(mask: Mask, kernel: StructuringElement = DEFAULT_REFINE_KERNEL) -> Mask:
    """Morphology opening then closing; raises if the object is annihilated."""
    refined = morph(morph(mask, "open", kernel), "close", kernel)
    if not refined.any():
        raise AnnotationError("mask empty after refinement")
    return refined


def derive_annotation(mask: Mask, class_label: str) -> tuple[str, BBox]:
    """Tight box of the biggest connected component of the mask."""
    comps = connected_components(mask, connectivity=8)
    if not comps:
        raise AnnotationError("cannot derive annotation from empty mask")
    _, _, box = comps[0]
    return class_label, box


def annotate_single_object_image(
    image: np.ndarray,
    candidates: MaskCandidateSet,
    class_label: str,
    background_iou_threshold: float = DEFAULT_BACKGROUND_IOU,
    refine_kernel: StructuringElement = DEFAULT_REFINE_KERNEL,
    source_id: str = "",
    origin: str = "captured",
):
    """Full single-object pipeline: select, refine, annotate, crop.

    Returns (annotation, crop) where annotation is (class_label, BBox) in
    image coordinates and crop is the image restricted to the box.
    """
    from .datasetio import LabeledImage

    if image.shape[:2] != (candidates.height, candidates.width):
        raise ValueError("image dims do not match candidate dims")
    selected = select_object_mask(candidates, background_iou_threshold)
    if selected is None:
        raise AnnotationError("no qualifying mask")
    refined = refine_mask(selected, refine_kernel)
    label, box = derive_annotation(refined, class_label)
    window = (slice(box.y_min, box.y_max), slice(box.x_min, box.x_max))
    # Keep only the annotated component inside the window so stray pixels of
    # smaller components cannot break crop tightness.
    biggest_id = connected_components(refined, connectivity=8)[0][0]
    _, labels = cv2.connectedComponentsWithStats(refined.astype(np.uint8), connectivity=8)[:2]
    crop_mask = (labels == biggest_id)[window].copy()
    crop = ObjectCrop(
        patch=image[window].copy(),
        mask=crop_mask,
        class_label=label,
        source_id=source_id,
        origin=origin,
    )
    labeled = LabeledImage(image=image, annotations=[(label, box)], source_tag="train_b")
    return labeled, crop
