"""Training orchestration (batch size 1, Adam on MSE) and inference.

Training is a single sequential loop: per epoch, a seeded shuffle of the
items, then for each item one forward (train mode), loss, full backward,
and one Adam step. Validation runs in eval mode (running batch-norm
statistics, no dropout), and the parameters with the best validation loss
are checkpointed and returned alongside the final-epoch parameters.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .data.images import ImageRGB, to_tensor
from .data.tiling import merge_tile_predictions, tile_mosaic
from .errors import ParameterError
from .heatmap import Heatmap, KernelSpec, PointSet, decode_with_scores, encode
from .nnet.adam import AdamState, adam_init, adam_step
from .nnet.checkpoint import load_checkpoint, save_checkpoint  # re-exported
from .nnet.layers import mse_loss
from .nnet.unet import UNetConfig, UNetParams, init_params, unet_apply, unet_backward, unet_forward

__all__ = [
    "TrainConfig", "EpochRecord", "TrainHistory", "TrainResult",
    "train", "predict", "save_checkpoint", "load_checkpoint",
]


@dataclass
class TrainConfig:
    epochs: int
    learning_rate: float = 1e-3
    batch_size: int = 1
    kernel: KernelSpec = field(default_factory=lambda: KernelSpec(sigma=10.0))
    unet: UNetConfig = field(default_factory=UNetConfig)
    seed: int = 0
    checkpoint_path: Path | str | None = None

    def __post_init__(self):
        if self.epochs < 0:
            raise ParameterError(f"epochs must be >= 0, got {self.epochs}")
        if self.batch_size != 1:
            raise ParameterError(
                f"batch_size is fixed at 1 in this version, got {self.batch_size}"
            )
        if not self.learning_rate > 0:
            raise ParameterError(f"learning_rate must be > 0, got {self.learning_rate}")


@dataclass(frozen=True)
class EpochRecord:
    epoch: int
    train_loss: float
    val_loss: float
    wall_seconds: float


@dataclass
class TrainHistory:
    records: list[EpochRecord] = field(default_factory=list)

    def to_csv(self, path) -> None:
        lines = ["epoch,train_loss,val_loss,wall_seconds"]
        for r in self.records:
            lines.append(f"{r.epoch},{r.train_loss!r},{r.val_loss!r},{r.wall_seconds!r}")
        Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")

    @classmethod
    def from_csv(cls, path) -> "TrainHistory":
        lines = Path(path).read_text(encoding="utf-8").splitlines()
        if not lines or lines[0] != "epoch,train_loss,val_loss,wall_seconds":
            raise ParameterError(f"{path}: not a training history CSV")
        records = []
        for line in lines[1:]:
            if not line.strip():
                continue
            e, tl, vl, ws = line.split(",")
            records.append(EpochRecord(int(e), float(tl), float(vl), float(ws)))
        return cls(records)


@dataclass
class TrainResult:
    """Best-on-validation and final-epoch parameters, plus the history.

    best_epoch is -1 when no epochs ran (or no validation items were given,
    in which case best falls back to the lowest training loss).
    """

    best_params: UNetParams
    final_params: UNetParams
    best_epoch: int
    history: TrainHistory
    adam_state: AdamState


def _target_tensor(points: PointSet, kernel: KernelSpec) -> np.ndarray:
    return np.ascontiguousarray(encode(points, kernel).values[None, None], dtype=np.float32)


def _eval_loss(cfg_unet: UNetConfig, params: UNetParams, pairs) -> float:
    total = 0.0
    for x, target in pairs:
        out = unet_forward(cfg_unet, params, x, "eval")
        loss, _ = mse_loss(out, target)
        total += loss
    return total / len(pairs)


def train(cfg: TrainConfig, train_set, val_set=(), on_epoch_end=None) -> TrainResult:
    """Run the full training loop; see the module docstring for the shape.

    train_set / val_set are sequences of (ImageRGB, PointSet). The optional
    on_epoch_end callback receives (EpochRecord, params, adam_state) after
    every epoch. Identical config and data give bit-identical results.
    """
    train_set = list(train_set)
    val_set = list(val_set)
    if not train_set:
        raise ParameterError("train_set must not be empty")
    params = init_params(cfg.unet, dtype=np.float32)
    adam = adam_init(params.learnable(), lr=cfg.learning_rate)
    shuffle_seed, dropout_seed = np.random.SeedSequence(cfg.seed).spawn(2)
    shuffle_rng = np.random.default_rng(shuffle_seed)
    dropout_rng = np.random.default_rng(dropout_seed)

    train_pairs = [(to_tensor(img), _target_tensor(pts, cfg.kernel)) for img, pts in train_set]
    val_pairs = [(to_tensor(img), _target_tensor(pts, cfg.kernel)) for img, pts in val_set]

    history = TrainHistory()
    best_track = math.inf
    best_epoch = -1
    best_params = params.copy()
    for epoch in range(cfg.epochs):
        t0 = time.perf_counter()
        order = shuffle_rng.permutation(len(train_pairs))
        losses = []
        for idx in order:
            x, target = train_pairs[idx]
            out, tape = unet_apply(cfg.unet, params, x, "train", dropout_rng)
            loss, grad = mse_loss(out, target)
            _, grads = unet_backward(cfg.unet, params, tape, grad)
            tensors, adam = adam_step(params.tensors, grads, adam)
            tensors.update(tape.stat_updates)
            params = UNetParams(cfg.unet, tensors)
            losses.append(loss)
        train_loss = float(np.mean(losses))
        val_loss = _eval_loss(cfg.unet, params, val_pairs) if val_pairs else float("nan")
        record = EpochRecord(epoch, train_loss, val_loss, time.perf_counter() - t0)
        history.records.append(record)
        track = val_loss if val_pairs else train_loss
        if track < best_track:
            best_track = track
            best_epoch = epoch
            best_params = params.copy()
        if on_epoch_end is not None:
            on_epoch_end(record, params, adam)
    if cfg.epochs > 0 and cfg.checkpoint_path is not None:
        save_checkpoint(best_params, cfg.checkpoint_path)
    return TrainResult(best_params, params, best_epoch, history, adam)


def predict(params: UNetParams, kernel: KernelSpec, img: ImageRGB,
            threshold: float = 0.5, min_distance: int = 5,
            tile_size: int | None = None, overlap: int | None = None,
            dedupe_radius: float | None = None) -> tuple[Heatmap, PointSet]:
    """Eval-mode inference from image to (heatmap, decoded points).

    Without tile_size the image dims must be valid for the network. With
    tile_size, images that exceed one tile (or need padding to reach one)
    run tile-wise: overlap defaults to 2x the kernel support radius so no
    object's kernel is split across all covering tiles; per-tile points are
    kept in each tile's seam-free core (margin overlap/2, extended by the
    dedupe radius so a peak jittered across the core boundary by border
    effects still survives in some tile), translated, and deduplicated at
    dedupe_radius (default min_distance). The returned heatmap is the
    per-pixel max over covering tiles.
    """
    cfg = params.config
    direct = tile_size is None or (
        img.width == tile_size and img.height == tile_size
    ) or (
        img.width <= tile_size and img.height <= tile_size
        and img.width % cfg.divisor == 0 and img.height % cfg.divisor == 0
    )
    if direct:
        out = unet_forward(cfg, params, to_tensor(img), "eval")
        heatmap = Heatmap(out[0, 0])
        points, _ = decode_with_scores(heatmap, threshold, min_distance)
        return heatmap, points

    if tile_size % cfg.divisor:
        raise ParameterError(
            f"tile_size {tile_size} must be divisible by {cfg.divisor} (depth {cfg.depth})"
        )
    ov = overlap if overlap is not None else 2 * kernel.support_radius
    dd = float(min_distance) if dedupe_radius is None else dedupe_radius
    grid = tile_mosaic(img, tile_size, ov)
    margin = max(ov / 2.0 - dd, 0.0)
    stitched = np.zeros((img.height, img.width), dtype=np.float32)
    per_tile = []
    per_tile_scores = []
    for tile in grid.tiles:
        out = unet_forward(cfg, params, to_tensor(tile.image), "eval")[0, 0]
        h_avail = grid.tile_size - tile.pad_bottom
        w_avail = grid.tile_size - tile.pad_right
        ys = slice(tile.origin_y, tile.origin_y + h_avail)
        xs = slice(tile.origin_x, tile.origin_x + w_avail)
        np.maximum(stitched[ys, xs], out[:h_avail, :w_avail], out=stitched[ys, xs])
        tile_points, tile_scores = decode_with_scores(Heatmap(out), threshold, min_distance)
        kept_pts = []
        kept_scores = []
        lo_x = margin if tile.origin_x > 0 else 0.0
        hi_x = tile_size - margin if tile.origin_x + tile_size < img.width else float(w_avail)
        lo_y = margin if tile.origin_y > 0 else 0.0
        hi_y = tile_size - margin if tile.origin_y + tile_size < img.height else float(h_avail)
        for (x, y), score in zip(tile_points.points, tile_scores):
            if lo_x <= x < hi_x and lo_y <= y < hi_y:
                kept_pts.append((x, y))
                kept_scores.append(score)
        per_tile.append(((tile.origin_x, tile.origin_y), PointSet(tuple(kept_pts), tile_size, tile_size)))
        per_tile_scores.append(np.asarray(kept_scores, dtype=np.float64))
    points = merge_tile_predictions(per_tile, dd, img.width, img.height, scores=per_tile_scores)
    return Heatmap(stitched), points
