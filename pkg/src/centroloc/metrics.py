"""Point-set matching and precision / recall / F1.

Matching is one-to-one greedy by ascending distance within a radius.
Degenerate cases are defined, not errored: with nothing predicted and
nothing present all three metrics are 1.0; a metric whose denominator
alone is zero is 0.0. Dataset-level scores micro-average: TP/FP/FN are
summed over images before the ratios are taken. True negatives are not
reported; point detection has no countable negatives.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .errors import ParameterError
from .heatmap import PointSet


@dataclass(frozen=True)
class MatchResult:
    """Counts plus the accepted (pred_index, gt_index, distance) pairs."""

    tp: int
    fp: int
    fn: int
    pairs: tuple[tuple[int, int, float], ...]


@dataclass(frozen=True)
class Metrics:
    precision: float
    recall: float
    f1: float


def match_points(pred: PointSet, gt: PointSet, radius: float) -> MatchResult:
    """Greedy one-to-one matching within a radius.

    Candidate pairs at distance <= radius are sorted by ascending distance
    (ties by lower pred index, then lower gt index) and accepted when both
    endpoints are still unmatched.
    """
    if not radius > 0:
        raise ParameterError(f"match radius must be > 0, got {radius}")
    candidates = []
    for pi, (px, py) in enumerate(pred.points):
        for gi, (gx, gy) in enumerate(gt.points):
            d = math.hypot(px - gx, py - gy)
            if d <= radius:
                candidates.append((d, pi, gi))
    candidates.sort()
    pred_used = [False] * len(pred)
    gt_used = [False] * len(gt)
    pairs = []
    for d, pi, gi in candidates:
        if pred_used[pi] or gt_used[gi]:
            continue
        pred_used[pi] = True
        gt_used[gi] = True
        pairs.append((pi, gi, d))
    tp = len(pairs)
    return MatchResult(tp, len(pred) - tp, len(gt) - tp, tuple(pairs))


def f1_score(precision: float, recall: float) -> float:
    if precision + recall == 0:
        return 0.0
    return 2.0 * precision * recall / (precision + recall)


def metrics_from_counts(tp: int, fp: int, fn: int) -> Metrics:
    if tp + fp == 0 and tp + fn == 0:
        return Metrics(1.0, 1.0, 1.0)
    precision = tp / (tp + fp) if tp + fp else 0.0
    recall = tp / (tp + fn) if tp + fn else 0.0
    return Metrics(precision, recall, f1_score(precision, recall))


def compute_metrics(result: MatchResult) -> Metrics:
    return metrics_from_counts(result.tp, result.fp, result.fn)


def evaluate_dataset(predictions, ground_truths, radius: float):
    """Micro-averaged metrics over index-aligned prediction/truth lists;
    also returns the per-image MatchResults."""
    predictions = list(predictions)
    ground_truths = list(ground_truths)
    if len(predictions) != len(ground_truths):
        raise ParameterError(
            f"{len(predictions)} predictions vs {len(ground_truths)} ground truths"
        )
    per_image = [match_points(p, g, radius) for p, g in zip(predictions, ground_truths)]
    tp = sum(m.tp for m in per_image)
    fp = sum(m.fp for m in per_image)
    fn = sum(m.fn for m in per_image)
    return metrics_from_counts(tp, fp, fn), per_image


def metrics_report(metrics: Metrics, tp: int, fp: int, fn: int, radius_px: float,
                   images: int) -> dict:
    """The JSON-serializable report emitted by the CLI and the benchmark."""
    return {
        "precision": metrics.precision,
        "recall": metrics.recall,
        "f1": metrics.f1,
        "tp": tp,
        "fp": fp,
        "fn": fn,
        "radius_px": radius_px,
        "images": images,
    }
