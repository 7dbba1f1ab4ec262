"""Synthetic training-data toolkit for crowded object-detection scenes.

Turns a bank of single-object segmented images into large, fully annotated
synthetic datasets via Copy-Paste composition: class balancing, scale
clamping, free-spot placement over mosaic backgrounds, and a deterministic
online augmentation chain.
"""

from .geometry import BBox, StructuringElement, connected_components, iou, mask_tight_bbox, morph
from .annotate import (
    AnnotationError,
    MaskCandidateSet,
    ObjectCrop,
    annotate_single_object_image,
    derive_annotation,
    refine_mask,
    select_object_mask,
)
from .augment import AugmentationSpec, clahe_image, dp_pipeline, pixel_transform, rng_stream, rotate_crop, scale_crop, spatial_transform
from .compose import (
    SynthesisConfig,
    SynthesisError,
    balance_pool,
    clamp_object_scale,
    find_free_spot,
    mosaic_background,
    synthesize_dataset,
    synthesize_image,
    synthesize_image_detailed,
)
from .datasetio import (
    DatasetError,
    LabeledImage,
    ObjectBank,
    class_distribution,
    dataset_stats,
    export_labels,
    load_object_bank,
    parse_labels,
    save_object_bank,
    standardize_image,
)

__version__ = "0.1.0"
