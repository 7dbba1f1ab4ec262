"""Command line entry points: annotate, synthesize, stats, augment, validate.

Exit codes: 0 success, 1 validation or data failure, 2 config/usage failure.
"""

from __future__ import annotations

import json
import os
import sys
from pathlib import Path

import click

from . import annotate as annotate_mod
from . import compose, config as config_mod, datasetio
from .augment import dp_pipeline, rng_stream
from .datasetio import DatasetError, LabeledImage
from .geometry import StructuringElement

EXIT_OK, EXIT_DATA, EXIT_CONFIG = 0, 1, 2


def _resolve(root: Path, value: str) -> Path:
    p = Path(value)
    return p if p.is_absolute() else root / p


def _load_config(config_path, root, **overrides):
    env_seed = os.environ.get("BAKESYNTH_SEED")
    if overrides.get("seed") is None and env_seed is not None:
        file_has_seed = False
        if config_path:
            try:
                file_has_seed = "seed" in json.loads(Path(config_path).read_text())
            except (OSError, json.JSONDecodeError):
                pass
        if not file_has_seed:
            overrides["seed"] = int(env_seed)
    try:
        cfg = config_mod.load_run_config(config_path, overrides)
    except config_mod.ConfigError as exc:
        click.echo(f"config error: {exc}", err=True)
        sys.exit(EXIT_CONFIG)
    click.echo(f"resolved config hash {config_mod.config_hash(cfg)}")
    click.echo(json.dumps(cfg, indent=2, sort_keys=True))
    return cfg


@click.group()
def main():
    """Synthetic baked-goods detection dataset toolkit."""


@main.command("config")
@click.option("--defaults", is_flag=True, help="Print the default run config as JSON.")
def cmd_config(defaults):
    if defaults:
        click.echo(json.dumps(config_mod.default_config(), indent=2, sort_keys=True))
    else:
        click.echo("use --defaults to print the default configuration")


@main.command("annotate")
@click.option("--config", "config_path", type=click.Path(exists=False), default=None)
@click.option("--root", type=click.Path(), default=".")
@click.option("--input", "input_dir", type=click.Path(), default=None,
              help="Directory of <id>.png + <id>.label + <id>.masks/ inputs.")
@click.option("--output", "output_dir", type=click.Path(), default=None,
              help="Crop bank output directory.")
def cmd_annotate(config_path, root, input_dir, output_dir):
    """Derive object crops and annotations from candidate segmentation masks."""
    root = Path(root)
    cfg = _load_config(config_path, root,
                       annotate_input=input_dir, annotate_output=output_dir)
    if "annotate_input" not in cfg or "annotate_output" not in cfg:
        click.echo("annotate needs annotate_input and annotate_output", err=True)
        sys.exit(EXIT_CONFIG)
    in_dir = _resolve(root, cfg["annotate_input"])
    out_dir = _resolve(root, cfg["annotate_output"])
    if not in_dir.is_dir():
        click.echo(f"input directory {in_dir} does not exist", err=True)
        sys.exit(EXIT_DATA)
    kernel = StructuringElement(cfg["refine_kernel"]["shape"], cfg["refine_kernel"]["radius"])
    crops, failures = [], []
    for img_path in sorted(in_dir.glob("*.png")):
        stem = img_path.stem
        label_path = in_dir / f"{stem}.label"
        masks_dir = in_dir / f"{stem}.masks"
        try:
            if not label_path.exists():
                raise DatasetError("missing .label file")
            image = datasetio.load_image(img_path)
            label = label_path.read_text().strip()
            cand_masks = [datasetio.load_mask(p) for p in sorted(masks_dir.glob("*.png"))] \
                if masks_dir.is_dir() else []
            candidates = annotate_mod.MaskCandidateSet(
                width=image.shape[1], height=image.shape[0], candidates=cand_masks)
            _, crop = annotate_mod.annotate_single_object_image(
                image, candidates, label,
                background_iou_threshold=cfg["background_iou_threshold"],
                refine_kernel=kernel, source_id=stem)
            crops.append(crop)
        except (annotate_mod.AnnotationError, DatasetError, ValueError) as exc:
            failures.append(f"{stem}: {exc}")
    for line in failures:
        click.echo(f"warning: {line}", err=True)
    if crops:
        datasetio.save_object_bank(out_dir, crops)
    click.echo(f"annotated {len(crops)} images, {len(failures)} skipped")
    sys.exit(EXIT_OK)


def _load_pool(cfg: dict, root: Path):
    """Load and merge the crop banks selected by the preset (or all given)."""
    recipe = config_mod.PRESETS.get(cfg.get("preset", ""),
                                    {"banks": sorted(cfg["bank_paths"]), "cast": [],
                                     "balance": cfg["balance"]})
    crops = []
    for role in recipe["banks"]:
        if role not in cfg["bank_paths"]:
            raise DatasetError(f"preset needs bank_paths[{role!r}]")
        bank = datasetio.load_object_bank(_resolve(root, cfg["bank_paths"][role]),
                                          cfg["classes"],
                                          cast_unknown=role in recipe["cast"])
        for line in bank.diagnostics:
            click.echo(f"warning: {role}: {line}", err=True)
        crops.extend(bank.crops)
    index = {lab: i for i, lab in enumerate(list(cfg["classes"]) + [annotate_mod.UNKNOWN_LABEL])}
    return datasetio.ObjectBank(crops=crops, class_index=index)


@main.command("synthesize")
@click.option("--config", "config_path", type=click.Path(), default=None)
@click.option("--root", type=click.Path(), default=".")
@click.option("--seed", type=int, default=None)
@click.option("-n", "--n-images", type=int, default=None)
@click.option("--preset", type=click.Choice(sorted(config_mod.PRESETS)), default=None)
@click.option("--balance/--no-balance", "balance", default=None)
@click.option("--jobs", type=int, default=None)
@click.option("--output", type=click.Path(), default=None)
def cmd_synthesize(config_path, root, seed, n_images, preset, balance, jobs, output):
    """Generate a synthetic detection dataset with Copy-Paste composition."""
    root = Path(root)
    cfg = _load_config(config_path, root, seed=seed, n_images=n_images,
                       preset=preset, output=output, jobs=jobs)
    if balance is not None:
        cfg["balance"] = balance
    try:
        pool = _load_pool(cfg, root)
        bg_dir = _resolve(root, cfg["backgrounds"])
        backgrounds = [datasetio.load_image(p) for p in sorted(bg_dir.glob("*.png"))]
        syn_cfg = config_mod.build_synthesis_config(cfg)
        if cfg["balance"]:
            pool = compose.balance_pool(pool, syn_cfg.oversample_threshold)
        manifest = compose.synthesize_dataset(
            pool, backgrounds, syn_cfg, cfg["n_images"],
            _resolve(root, cfg["output"]), run_name=cfg["run_name"],
            jobs=cfg["jobs"])
    except (DatasetError, compose.SynthesisError) as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(EXIT_DATA)
    report = datasetio.dataset_stats(_resolve(root, cfg["output"]))
    click.echo(f"synthesized {manifest['n_images']} images, "
               f"{report['n_annotations']} annotations, "
               f"mean objects/image {report['objects_per_image']['mean']:.2f}")
    sys.exit(EXIT_OK)


@main.command("stats")
@click.argument("path", type=click.Path())
@click.option("--json", "json_out", type=click.Path(), default=None,
              help="Also write the report as JSON.")
def cmd_stats(path, json_out):
    """Report image/annotation counts and histograms for a dataset directory."""
    if not Path(path).is_dir():
        click.echo(f"missing directory {path}", err=True)
        sys.exit(EXIT_DATA)
    report = datasetio.dataset_stats(path)
    opi = report["objects_per_image"]
    click.echo(f"images: {report['n_images']}")
    click.echo(f"annotations: {report['n_annotations']}")
    click.echo(f"objects/image: mean {opi['mean']:.2f} min {opi['min']} max {opi['max']}")
    for cid, count in report["class_histogram"].items():
        click.echo(f"  class {cid}: {count} ({report['class_shares'][cid]:.4f})")
    for warning in report["warnings"]:
        click.echo(f"warning: {warning}", err=True)
    if json_out:
        Path(json_out).write_text(json.dumps(report, indent=2, sort_keys=True) + "\n")
    sys.exit(EXIT_OK)


@main.command("augment")
@click.option("--config", "config_path", type=click.Path(), default=None)
@click.option("--root", type=click.Path(), default=".")
@click.option("--input", "input_dir", type=click.Path(), required=True)
@click.option("--output", "output_dir", type=click.Path(), required=True)
@click.option("--seed", type=int, default=None)
@click.option("--longest-side", type=int, default=None)
@click.option("--dp/--no-dp", "apply_dp", default=None)
def cmd_augment(config_path, root, input_dir, output_dir, seed, longest_side, apply_dp):
    """Standardize image sizes and apply the online distortion chain."""
    root = Path(root)
    cfg = _load_config(config_path, root, seed=seed, longest_side=longest_side,
                       apply_dp=apply_dp)
    in_dir, out_dir = _resolve(root, input_dir), _resolve(root, output_dir)
    if not (in_dir / "images").is_dir():
        click.echo(f"missing dataset directory {in_dir}/images", err=True)
        sys.exit(EXIT_DATA)
    (out_dir / "images").mkdir(parents=True, exist_ok=True)
    (out_dir / "labels").mkdir(parents=True, exist_ok=True)
    spec = config_mod.build_synthesis_config(cfg).augmentation
    n = 0
    try:
        for img_path in sorted((in_dir / "images").glob("*.png")):
            stem = img_path.stem
            image = datasetio.load_image(img_path)
            h, w = image.shape[:2]
            label_path = in_dir / "labels" / f"{stem}.txt"
            boxes = datasetio.parse_labels(label_path.read_text(), w, h) \
                if label_path.exists() else []
            labeled = LabeledImage(image=image, annotations=boxes, source_tag="synthetic")
            labeled = datasetio.standardize_image(labeled, cfg["longest_side"])
            image, boxes = labeled.image, labeled.annotations
            if cfg["apply_dp"]:
                image, boxes = dp_pipeline(image, boxes, spec,
                                           rng_stream(cfg["seed"], "augment", stem))
            out = LabeledImage(image=image, annotations=boxes, source_tag="synthetic")
            datasetio.save_image(out_dir / "images" / f"{stem}.png", image)
            identity_index = {cid: cid for cid, _ in boxes}
            (out_dir / "labels" / f"{stem}.txt").write_text(
                datasetio.export_labels(out, identity_index))
            n += 1
    except (DatasetError, OSError) as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(EXIT_DATA)
    click.echo(f"augmented {n} images")
    sys.exit(EXIT_OK)


@main.command("validate")
@click.argument("path", type=click.Path())
@click.option("--synthetic", is_flag=True,
              help="Also enforce the synthetic scale band on area fractions.")
@click.option("--min-area-fraction", type=float, default=0.03)
@click.option("--max-area-fraction", type=float, default=0.25)
def cmd_validate(path, synthetic, min_area_fraction, max_area_fraction):
    """Check containment, parse round-trips, and (optionally) the scale band."""
    root = Path(path)
    images_dir, labels_dir = root / "images", root / "labels"
    if not root.is_dir() or not images_dir.is_dir():
        click.echo(f"warning: {path} has no images/ directory; nothing to validate",
                   err=True)
        sys.exit(EXIT_OK)
    lo = min_area_fraction * 0.98
    hi = max_area_fraction * 1.02
    violations = []
    for img_path in sorted(images_dir.glob("*.png")):
        stem = img_path.stem
        label_path = labels_dir / f"{stem}.txt"
        if not label_path.exists():
            violations.append(f"{stem}: missing label file")
            continue
        img = datasetio.load_image(img_path)
        h, w = img.shape[:2]
        text = label_path.read_text()
        try:
            boxes = datasetio.parse_labels(text, w, h)
        except DatasetError as exc:
            violations.append(f"{stem}: {exc}")
            continue
        for lineno, line in enumerate(text.splitlines(), 1):
            if not line.strip():
                continue
            _, cx, cy, bw, bh = (float(p) for p in line.split())
            if cx - bw / 2 < -1e-6 or cx + bw / 2 > 1 + 1e-6 \
                    or cy - bh / 2 < -1e-6 or cy + bh / 2 > 1 + 1e-6:
                violations.append(f"{stem}: line {lineno}: box outside image")
        out = LabeledImage(image=img, annotations=boxes, source_tag="synthetic")
        reexport = datasetio.export_labels(out, {cid: cid for cid, _ in boxes})
        for orig, redo in zip(text.splitlines(), reexport.splitlines()):
            ov = [float(p) for p in orig.split()[1:]]
            rv = [float(p) for p in redo.split()[1:]]
            if any(abs(o - r) * max(w, h) > 1.0 for o, r in zip(ov, rv)):
                violations.append(f"{stem}: label round-trip exceeds 1 px")
                break
        if synthetic:
            for cid, box in boxes:
                f = box.area / (w * h)
                if not lo <= f <= hi:
                    violations.append(f"{stem}: area fraction {f:.4f} outside "
                                      f"[{lo:.4f}, {hi:.4f}]")
    for line in violations:
        click.echo(f"violation: {line}", err=True)
    if violations:
        sys.exit(EXIT_DATA)
    click.echo("validation passed")
    sys.exit(EXIT_OK)


if __name__ == "__main__":
    main()
