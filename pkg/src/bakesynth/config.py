"""Run configuration: JSON schema, defaults, presets, and hashing.

A run config is a plain JSON document; unknown keys are rejected so typos
fail loudly before any work starts. CLI flags override file values and the
resolved config is always echoed for provenance.
"""

from __future__ import annotations

import hashlib
import json
from pathlib import Path

import jsonschema

from .augment import AugmentationSpec
from .compose import SynthesisConfig
from .geometry import StructuringElement

_KERNEL_SCHEMA = {
    "type": "object",
    "properties": {
        "shape": {"enum": ["square", "disk"]},
        "radius": {"type": "integer", "minimum": 1},
    },
    "required": ["shape", "radius"],
    "additionalProperties": False,
}

_RANGE2 = {"type": "array", "items": {"type": "number"}, "minItems": 2, "maxItems": 2}

RUN_CONFIG_SCHEMA = {
    "type": "object",
    "properties": {
        "preset": {"enum": ["baseline", "type-balance", "unknown", "pix2pix", "all-data"]},
        "classes": {"type": "array", "items": {"type": "string"}, "minItems": 1},
        "bank_paths": {
            "type": "object",
            "properties": {
                "train_b": {"type": "string"},
                "train_c": {"type": "string"},
                "train_s": {"type": "string"},
            },
            "additionalProperties": False,
        },
        "backgrounds": {"type": "string"},
        "output": {"type": "string"},
        "n_images": {"type": "integer", "minimum": 1},
        "run_name": {"type": "string"},
        "balance": {"type": "boolean"},
        "seed": {"type": "integer"},
        "jobs": {"type": "integer", "minimum": 1},
        "annotate_input": {"type": "string"},
        "annotate_output": {"type": "string"},
        "background_iou_threshold": {"type": "number", "exclusiveMinimum": 0, "maximum": 1},
        "refine_kernel": _KERNEL_SCHEMA,
        "longest_side": {"type": "integer", "minimum": 32},
        "apply_dp": {"type": "boolean"},
        "synthesis": {
            "type": "object",
            "properties": {
                "canvas_width": {"type": "integer", "minimum": 64},
                "canvas_height": {"type": "integer", "minimum": 64},
                "object_count_range": _RANGE2,
                "min_area_fraction": {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 1},
                "max_area_fraction": {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 1},
                "oversample_threshold": {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 1},
                "placement_dilation": _KERNEL_SCHEMA,
                "max_placement_attempts": {"type": "integer", "minimum": 1},
            },
            "additionalProperties": False,
        },
        "augmentation": {
            "type": "object",
            "properties": {
                "spatial_probability": {"type": "number", "minimum": 0, "maximum": 1},
                "pixel_probability": {"type": "number", "minimum": 0, "maximum": 1},
                "rotation_degrees": _RANGE2,
                "scale_range": _RANGE2,
                "blur_probability": {"type": "number", "minimum": 0, "maximum": 1},
                "blur_kernels": {"type": "array", "items": {"type": "integer"}, "minItems": 1},
                "clahe_clip_limit": {"type": "number", "exclusiveMinimum": 0},
                "clahe_tile_grid": _RANGE2,
                "online_scale_range": _RANGE2,
                "online_rotation_degrees": _RANGE2,
                "coarse_dropout_holes": _RANGE2,
                "coarse_dropout_hole_size": _RANGE2,
                "pixel_dropout_fraction": {"type": "number", "minimum": 0, "maximum": 1},
            },
            "additionalProperties": False,
        },
    },
    "additionalProperties": False,
}

# Which crop banks feed the pool and whether oversampling-based balancing is
# on, per experiment recipe. "cast" banks have their labels collapsed to the
# catch-all class.
PRESETS = {
    "baseline": {"banks": ["train_b"], "cast": [], "balance": False},
    "type-balance": {"banks": ["train_b"], "cast": [], "balance": True},
    "unknown": {"banks": ["train_b", "train_c"], "cast": ["train_c"], "balance": True},
    "pix2pix": {"banks": ["train_s"], "cast": [], "balance": True},
    "all-data": {"banks": ["train_b", "train_c", "train_s"], "cast": ["train_c"], "balance": True},
}


class ConfigError(Exception):
    pass


def default_config() -> dict:
    syn = SynthesisConfig()
    aug = AugmentationSpec()
    return {
        "classes": ["object"],
        "bank_paths": {},
        "backgrounds": "backgrounds",
        "output": "out",
        "n_images": 2000,
        "run_name": "synth",
        "balance": False,
        "seed": 0,
        "jobs": 1,
        "background_iou_threshold": 0.9,
        "refine_kernel": {"shape": "square", "radius": 2},
        "longest_side": 1280,
        "apply_dp": True,
        "synthesis": {
            "canvas_width": syn.canvas_width,
            "canvas_height": syn.canvas_height,
            "object_count_range": list(syn.object_count_range),
            "min_area_fraction": syn.min_area_fraction,
            "max_area_fraction": syn.max_area_fraction,
            "oversample_threshold": syn.oversample_threshold,
            "placement_dilation": {"shape": syn.placement_dilation.shape,
                                   "radius": syn.placement_dilation.radius},
            "max_placement_attempts": syn.max_placement_attempts,
        },
        "augmentation": {
            "spatial_probability": aug.spatial_probability,
            "pixel_probability": aug.pixel_probability,
            "rotation_degrees": list(aug.rotation_degrees),
            "scale_range": list(aug.scale_range),
            "blur_probability": aug.blur_probability,
            "blur_kernels": list(aug.blur_kernels),
            "clahe_clip_limit": aug.clahe_clip_limit,
            "clahe_tile_grid": list(aug.clahe_tile_grid),
            "online_scale_range": list(aug.online_scale_range),
            "online_rotation_degrees": list(aug.online_rotation_degrees),
            "coarse_dropout_holes": list(aug.coarse_dropout_holes),
            "coarse_dropout_hole_size": list(aug.coarse_dropout_hole_size),
            "pixel_dropout_fraction": aug.pixel_dropout_fraction,
        },
    }


def _deep_merge(base: dict, override: dict) -> dict:
    out = dict(base)
    for key, value in override.items():
        if isinstance(value, dict) and isinstance(out.get(key), dict):
            out[key] = _deep_merge(out[key], value)
        else:
            out[key] = value
    return out


def load_run_config(path=None, overrides: dict | None = None) -> dict:
    """Defaults <- file <- overrides, schema-validated and preset-applied."""
    cfg = default_config()
    if path is not None:
        try:
            raw = json.loads(Path(path).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        try:
            jsonschema.validate(raw, RUN_CONFIG_SCHEMA)
        except jsonschema.ValidationError as exc:
            raise ConfigError(f"config {path}: {exc.message}"
                              + (f" (at {'/'.join(map(str, exc.path))})" if exc.path else "")) from exc
        cfg = _deep_merge(cfg, raw)
    if overrides:
        cfg = _deep_merge(cfg, {k: v for k, v in overrides.items() if v is not None})
    try:
        jsonschema.validate(cfg, RUN_CONFIG_SCHEMA)
    except jsonschema.ValidationError as exc:
        raise ConfigError(f"resolved config invalid: {exc.message}") from exc
    if "preset" in cfg:
        recipe = PRESETS[cfg["preset"]]
        cfg["balance"] = recipe["balance"]
    return cfg


def config_hash(cfg: dict) -> str:
    return hashlib.sha256(json.dumps(cfg, sort_keys=True).encode()).hexdigest()


def build_synthesis_config(cfg: dict) -> SynthesisConfig:
    syn, aug = cfg["synthesis"], cfg["augmentation"]
    spec = AugmentationSpec(
        spatial_probability=aug["spatial_probability"],
        pixel_probability=aug["pixel_probability"],
        rotation_degrees=tuple(aug["rotation_degrees"]),
        scale_range=tuple(aug["scale_range"]),
        blur_probability=aug["blur_probability"],
        blur_kernels=tuple(aug["blur_kernels"]),
        clahe_clip_limit=aug["clahe_clip_limit"],
        clahe_tile_grid=tuple(int(t) for t in aug["clahe_tile_grid"]),
        online_scale_range=tuple(aug["online_scale_range"]),
        online_rotation_degrees=tuple(aug["online_rotation_degrees"]),
        coarse_dropout_holes=tuple(int(v) for v in aug["coarse_dropout_holes"]),
        coarse_dropout_hole_size=tuple(int(v) for v in aug["coarse_dropout_hole_size"]),
        pixel_dropout_fraction=aug["pixel_dropout_fraction"],
    )
    dil = syn["placement_dilation"]
    return SynthesisConfig(
        canvas_width=syn["canvas_width"],
        canvas_height=syn["canvas_height"],
        object_count_range=tuple(int(v) for v in syn["object_count_range"]),
        min_area_fraction=syn["min_area_fraction"],
        max_area_fraction=syn["max_area_fraction"],
        oversample_threshold=syn["oversample_threshold"],
        placement_dilation=StructuringElement(dil["shape"], dil["radius"]),
        max_placement_attempts=syn["max_placement_attempts"],
        augmentation=spec,
        seed=cfg["seed"],
    )
