"""Command-line workflows: synth, encode, train, predict, evaluate.

Every command is a pure function of its flags, config file, input files,
and seed; re-running writes byte-identical outputs. Settings resolve as
flags > config-file keys > defaults, where the config file is one flat
JSON document (unknown keys are rejected). Exit codes: 0 success, 2 bad
input or parameters, 3 internal failure.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from .data.images import ImageRGB, read_image_png, write_image_png
from .data.io import (
    ManifestRecord,
    load_split_items,
    read_points_csv,
    write_manifest,
    write_points_csv,
)
from .data.synth import split_dataset, synth_dataset
from .errors import CheckpointError, GenerationError, ParameterError
from .heatmap import (
    KernelSpec,
    PointSet,
    encode,
    round_half_up,
    write_heatmap_png,
    write_heatmap_raw,
)
from .metrics import evaluate_dataset, metrics_report
from .nnet.checkpoint import load_checkpoint
from .nnet.unet import UNetConfig
from .train import TrainConfig, predict, train

_CONFIG_KEYS = {
    # shared knobs
    "seed", "sigma", "truncation", "threshold", "min_distance", "match_radius",
    # training
    "epochs", "learning_rate", "depth", "base_channels", "in_channels",
    "dropout_rate", "val_split",
    # tiling
    "tile_size", "overlap", "dedupe_radius",
    # synthesis
    "images", "size", "blobs_min", "blobs_max", "radius_min", "radius_max",
    "min_separation", "frac_train", "frac_val", "frac_test",
    # paths and frames
    "out", "data", "checkpoint", "history", "image", "points",
    "out_png", "out_raw", "out_points", "out_heatmap", "out_overlay",
    "pred", "gt", "pred_dir", "gt_dir", "width", "height",
}

_USER_ERRORS = (ValueError, OSError, CheckpointError, GenerationError)


def _load_config(path) -> dict:
    if path is None:
        return {}
    doc = json.loads(Path(path).read_text(encoding="utf-8"))
    if not isinstance(doc, dict):
        raise ParameterError(f"{path}: config must be a JSON object")
    unknown = set(doc) - _CONFIG_KEYS
    if unknown:
        raise ParameterError(f"{path}: unknown config keys: {sorted(unknown)}")
    return doc


def _resolve(args, config, key, default=None):
    value = getattr(args, key, None)
    if value is not None:
        return value
    if key in config:
        return config[key]
    return default


def _require(args, config, key):
    value = _resolve(args, config, key)
    if value is None:
        raise ParameterError(f"missing required setting --{key.replace('_', '-')}")
    return value


def _check_inputs_exist(*paths) -> None:
    for p in paths:
        if p is not None and not Path(p).exists():
            raise ParameterError(f"input path does not exist: {p}")


def render_overlay(img: ImageRGB, points: PointSet, arm: int = 4,
                   color=(1.0, 0.0, 0.0)) -> ImageRGB:
    """Static result rendering: one cross per point on a copy of the image."""
    px = np.array(img.pixels)
    col = np.asarray(color, dtype=px.dtype)
    for x, y in points.points:
        cx, cy = int(round_half_up(x)), int(round_half_up(y))
        if not (0 <= cx < img.width and 0 <= cy < img.height):
            continue
        px[cy, max(0, cx - arm) : cx + arm + 1] = col
        px[max(0, cy - arm) : cy + arm + 1, cx] = col
    return ImageRGB(px)


def _cmd_synth(args) -> int:
    config = _load_config(args.config)
    out_dir = Path(_require(args, config, "out"))
    seed = int(_resolve(args, config, "seed", 0))
    n_images = int(_resolve(args, config, "images", 16))
    size = int(_resolve(args, config, "size", 128))
    blobs = (int(_resolve(args, config, "blobs_min", 3)),
             int(_resolve(args, config, "blobs_max", 10)))
    radius = (float(_resolve(args, config, "radius_min", 4.0)),
              float(_resolve(args, config, "radius_max", 8.0)))
    min_separation = float(_resolve(args, config, "min_separation", 24.0))
    fracs = (float(_resolve(args, config, "frac_train", 0.8)),
             float(_resolve(args, config, "frac_val", 0.0)),
             float(_resolve(args, config, "frac_test", 0.2)))

    items = synth_dataset(seed, n_images, size, size, blobs, radius, min_separation)
    train_idx, val_idx, test_idx = split_dataset(list(range(n_images)), fracs, seed)
    split_of = {i: "train" for i in train_idx}
    split_of.update({i: "val" for i in val_idx})
    split_of.update({i: "test" for i in test_idx})

    (out_dir / "images").mkdir(parents=True, exist_ok=True)
    (out_dir / "labels").mkdir(parents=True, exist_ok=True)
    records = []
    for i, (img, pts) in enumerate(items):
        image_rel = f"images/img_{i:04d}.png"
        labels_rel = f"labels/img_{i:04d}.csv"
        write_image_png(img, out_dir / image_rel)
        write_points_csv(pts, out_dir / labels_rel)
        records.append(ManifestRecord(image_rel, labels_rel, split_of[i]))
    write_manifest(records, out_dir / "manifest.json")
    print(f"wrote {n_images} images ({len(train_idx)} train / {len(val_idx)} val / "
          f"{len(test_idx)} test) to {out_dir}")
    return 0


def _cmd_encode(args) -> int:
    config = _load_config(args.config)
    points_path = _require(args, config, "points")
    width = int(_require(args, config, "width"))
    height = int(_require(args, config, "height"))
    out_png = _resolve(args, config, "out_png")
    out_raw = _resolve(args, config, "out_raw")
    if out_png is None and out_raw is None:
        raise ParameterError("nothing to write: give --out-png and/or --out-raw")
    _check_inputs_exist(points_path)
    kernel = KernelSpec(
        sigma=float(_resolve(args, config, "sigma", 10.0)),
        truncation=float(_resolve(args, config, "truncation", 3.0)),
    )
    points = read_points_csv(points_path, width, height)
    heatmap = encode(points, kernel)
    if out_png is not None:
        write_heatmap_png(heatmap, out_png)
    if out_raw is not None:
        write_heatmap_raw(heatmap, out_raw)
    print(f"encoded {len(points)} points onto a {width}x{height} grid")
    return 0


def _cmd_train(args) -> int:
    config = _load_config(args.config)
    data = Path(_require(args, config, "data"))
    manifest = data / "manifest.json" if data.is_dir() else data
    checkpoint = Path(_require(args, config, "checkpoint"))
    history_path = _resolve(args, config, "history")
    _check_inputs_exist(manifest)

    val_split = str(_resolve(args, config, "val_split", "val"))
    train_items = load_split_items(manifest, "train")
    val_items = load_split_items(manifest, val_split)

    cfg = TrainConfig(
        epochs=int(_resolve(args, config, "epochs", 30)),
        learning_rate=float(_resolve(args, config, "learning_rate", 1e-3)),
        kernel=KernelSpec(
            sigma=float(_resolve(args, config, "sigma", 10.0)),
            truncation=float(_resolve(args, config, "truncation", 3.0)),
        ),
        unet=UNetConfig(
            depth=int(_resolve(args, config, "depth", 3)),
            base_channels=int(_resolve(args, config, "base_channels", 8)),
            in_channels=int(_resolve(args, config, "in_channels", 3)),
            dropout_rate=float(_resolve(args, config, "dropout_rate", 0.2)),
            seed=int(_resolve(args, config, "seed", 0)),
        ),
        seed=int(_resolve(args, config, "seed", 0)),
        checkpoint_path=checkpoint,
    )

    def progress(record, params, adam_state):
        print(
            f"epoch {record.epoch + 1}/{cfg.epochs} "
            f"train {record.train_loss:.6f} val {record.val_loss:.6f} "
            f"({record.wall_seconds:.1f}s)",
            file=sys.stderr,
        )

    result = train(cfg, train_items, val_items, on_epoch_end=progress)
    if history_path is not None:
        result.history.to_csv(history_path)
    print(f"trained {cfg.epochs} epochs on {len(train_items)} images; "
          f"best epoch {result.best_epoch + 1}; checkpoint {checkpoint}")
    return 0


def _cmd_predict(args) -> int:
    config = _load_config(args.config)
    checkpoint = _require(args, config, "checkpoint")
    image_path = _require(args, config, "image")
    _check_inputs_exist(checkpoint, image_path)
    params, _ = load_checkpoint(checkpoint)
    img = read_image_png(image_path)
    kernel = KernelSpec(
        sigma=float(_resolve(args, config, "sigma", 10.0)),
        truncation=float(_resolve(args, config, "truncation", 3.0)),
    )
    tile_size = _resolve(args, config, "tile_size")
    overlap = _resolve(args, config, "overlap")
    dedupe = _resolve(args, config, "dedupe_radius")
    heatmap, points = predict(
        params, kernel, img,
        threshold=float(_resolve(args, config, "threshold", 0.5)),
        min_distance=int(_resolve(args, config, "min_distance", 5)),
        tile_size=None if tile_size is None else int(tile_size),
        overlap=None if overlap is None else int(overlap),
        dedupe_radius=None if dedupe is None else float(dedupe),
    )
    out_points = _resolve(args, config, "out_points")
    out_heatmap = _resolve(args, config, "out_heatmap")
    out_overlay = _resolve(args, config, "out_overlay")
    if out_points is not None:
        write_points_csv(points, out_points)
    if out_heatmap is not None:
        write_heatmap_png(heatmap, out_heatmap)
    if out_overlay is not None:
        write_image_png(render_overlay(img, points), out_overlay)
    print(f"detected {len(points)} points in {image_path}")
    return 0


def _infer_frame(*point_lists) -> tuple[int, int]:
    w = h = 1
    for pts in point_lists:
        for x, y in pts:
            w = max(w, int(x) + 1)
            h = max(h, int(y) + 1)
    return w, h


def _read_points_flex(path, width, height):
    if width is not None and height is not None:
        return read_points_csv(path, int(width), int(height))
    raw = read_points_csv(path, 1 << 30, 1 << 30)
    return raw


def _cmd_evaluate(args) -> int:
    config = _load_config(args.config)
    radius = float(_resolve(args, config, "match_radius", 10.0))
    width = _resolve(args, config, "width")
    height = _resolve(args, config, "height")
    pred = _resolve(args, config, "pred")
    gt = _resolve(args, config, "gt")
    pred_dir = _resolve(args, config, "pred_dir")
    gt_dir = _resolve(args, config, "gt_dir")

    if pred is not None and gt is not None:
        _check_inputs_exist(pred, gt)
        pairs = [(Path(pred), Path(gt))]
    elif pred_dir is not None and gt_dir is not None:
        _check_inputs_exist(pred_dir, gt_dir)
        pred_files = sorted(Path(pred_dir).glob("*.csv"))
        names = [p.name for p in pred_files]
        gt_files = [Path(gt_dir) / n for n in names]
        if not pred_files:
            raise ParameterError(f"no .csv files in {pred_dir}")
        missing = [g for g in gt_files if not g.exists()]
        if missing:
            raise ParameterError(f"ground truth missing for: {missing[0].name}")
        pairs = list(zip(pred_files, gt_files))
    else:
        raise ParameterError("give --pred/--gt or --pred-dir/--gt-dir")

    predictions = []
    truths = []
    for pred_path, gt_path in pairs:
        p = _read_points_flex(pred_path, width, height)
        g = _read_points_flex(gt_path, width, height)
        if width is None or height is None:
            w, h = _infer_frame(p.points, g.points)
            p = PointSet(p.points, w, h)
            g = PointSet(g.points, w, h)
        predictions.append(p)
        truths.append(g)
    metrics, per_image = evaluate_dataset(predictions, truths, radius)
    tp = sum(m.tp for m in per_image)
    fp = sum(m.fp for m in per_image)
    fn = sum(m.fn for m in per_image)
    report = json.dumps(
        metrics_report(metrics, tp, fp, fn, radius, len(pairs)),
        indent=2, sort_keys=True,
    ) + "\n"
    out = _resolve(args, config, "out")
    if out is not None:
        Path(out).write_text(report, encoding="utf-8")
    else:
        sys.stdout.write(report)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="centroloc",
        description="Centroid detection in aerial imagery via Gaussian-heatmap "
                    "regression with a small U-Net.",
    )
    sub = parser.add_subparsers(dest="command")

    def add_config(p):
        p.add_argument("--config", help="JSON config file; flags override its keys")

    p = sub.add_parser("synth", help="generate a synthetic disk dataset")
    add_config(p)
    p.add_argument("--out", help="output dataset directory (required)")
    p.add_argument("--seed", type=int, help="rng seed (default: 0)")
    p.add_argument("--images", type=int, help="number of images (default: 16)")
    p.add_argument("--size", type=int, help="square image size in px (default: 128)")
    p.add_argument("--blobs-min", type=int, dest="blobs_min", help="min disks per image (default: 3)")
    p.add_argument("--blobs-max", type=int, dest="blobs_max", help="max disks per image (default: 10)")
    p.add_argument("--radius-min", type=float, dest="radius_min", help="min disk radius px (default: 4)")
    p.add_argument("--radius-max", type=float, dest="radius_max", help="max disk radius px (default: 8)")
    p.add_argument("--min-separation", type=float, dest="min_separation",
                   help="min center distance px (default: 24)")
    p.add_argument("--frac-train", type=float, dest="frac_train", help="train fraction (default: 0.8)")
    p.add_argument("--frac-val", type=float, dest="frac_val", help="val fraction (default: 0.0)")
    p.add_argument("--frac-test", type=float, dest="frac_test", help="test fraction (default: 0.2)")
    p.set_defaults(func=_cmd_synth)

    p = sub.add_parser("encode", help="encode a points CSV into a Gaussian heatmap")
    add_config(p)
    p.add_argument("--points", help="input points CSV with header x,y (required)")
    p.add_argument("--width", type=int, help="frame width px (required)")
    p.add_argument("--height", type=int, help="frame height px (required)")
    p.add_argument("--sigma", type=float, help="kernel standard deviation px (default: 10)")
    p.add_argument("--truncation", type=float, help="kernel truncation in sigmas (default: 3)")
    p.add_argument("--out-png", dest="out_png", help="8-bit grayscale preview PNG")
    p.add_argument("--out-raw", dest="out_raw", help="lossless CHM1 float32 grid")
    p.set_defaults(func=_cmd_encode)

    p = sub.add_parser("train", help="train on a dataset directory with a manifest")
    add_config(p)
    p.add_argument("--data", help="dataset directory or manifest.json (required)")
    p.add_argument("--checkpoint", help="output checkpoint path (required)")
    p.add_argument("--history", help="output per-epoch loss CSV")
    p.add_argument("--epochs", type=int, help="training epochs (default: 30)")
    p.add_argument("--learning-rate", type=float, dest="learning_rate",
                   help="Adam learning rate (default: 0.001)")
    p.add_argument("--sigma", type=float, help="target kernel sigma px (default: 10)")
    p.add_argument("--truncation", type=float, help="kernel truncation in sigmas (default: 3)")
    p.add_argument("--depth", type=int, help="encoder/decoder levels (default: 3)")
    p.add_argument("--base-channels", type=int, dest="base_channels",
                   help="channels at full resolution (default: 8)")
    p.add_argument("--in-channels", type=int, dest="in_channels", help="input channels (default: 3)")
    p.add_argument("--dropout-rate", type=float, dest="dropout_rate",
                   help="bottleneck dropout rate (default: 0.2)")
    p.add_argument("--seed", type=int, help="rng seed (default: 0)")
    p.add_argument("--val-split", dest="val_split", choices=("train", "val", "test"),
                   help="manifest split used for validation (default: val)")
    p.set_defaults(func=_cmd_train)

    p = sub.add_parser("predict", help="detect centroids in an image")
    add_config(p)
    p.add_argument("--checkpoint", help="trained checkpoint (required)")
    p.add_argument("--image", help="input RGB PNG (required)")
    p.add_argument("--out-points", dest="out_points", help="output points CSV")
    p.add_argument("--out-heatmap", dest="out_heatmap", help="output heatmap PNG")
    p.add_argument("--out-overlay", dest="out_overlay", help="output overlay PNG")
    p.add_argument("--threshold", type=float, help="peak threshold (default: 0.5)")
    p.add_argument("--min-distance", type=int, dest="min_distance",
                   help="peak neighborhood radius px (default: 5)")
    p.add_argument("--tile-size", type=int, dest="tile_size",
                   help="tile large images to this size (default: off)")
    p.add_argument("--overlap", type=int, help="tile overlap px (default: 2x kernel support)")
    p.add_argument("--dedupe-radius", type=float, dest="dedupe_radius",
                   help="cross-tile dedupe radius px (default: min-distance)")
    p.add_argument("--sigma", type=float, help="kernel sigma for the overlap default (default: 10)")
    p.add_argument("--truncation", type=float, help="kernel truncation in sigmas (default: 3)")
    p.set_defaults(func=_cmd_predict)

    p = sub.add_parser("evaluate", help="score predicted points against ground truth")
    add_config(p)
    p.add_argument("--pred", help="predicted points CSV")
    p.add_argument("--gt", help="ground-truth points CSV")
    p.add_argument("--pred-dir", dest="pred_dir", help="directory of predicted CSVs")
    p.add_argument("--gt-dir", dest="gt_dir", help="directory of ground-truth CSVs (matched by name)")
    p.add_argument("--match-radius", type=float, dest="match_radius",
                   help="true-positive distance px (default: 10)")
    p.add_argument("--width", type=int, help="frame width px (default: inferred)")
    p.add_argument("--height", type=int, help="frame height px (default: inferred)")
    p.add_argument("--out", help="write metrics JSON here instead of stdout")
    p.set_defaults(func=_cmd_evaluate)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if not hasattr(args, "func"):
        parser.print_help()
        return 0
    try:
        return args.func(args)
    except _USER_ERRORS as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    except Exception as e:  # pragma: no cover - defensive
        print(f"internal error: {type(e).__name__}: {e}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
