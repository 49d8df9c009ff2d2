"""Synthetic desk-scale datasets: anti-aliased disks on noisy backgrounds.

Every image is low-amplitude uniform noise with a few bright, solid disks;
the label is exactly the set of disk centers. Generation is fully
determined by the seed.
"""

from __future__ import annotations

import numpy as np

from ..errors import GenerationError, ParameterError
from ..heatmap import PointSet
from .images import ImageRGB

_NOISE_AMPLITUDE = 0.35
_DISK_MIN_BRIGHTNESS = 0.55
_PLACEMENT_ATTEMPTS = 200


def synth_dataset(seed: int, n_images: int, width: int, height: int,
                  blobs_per_image: tuple[int, int] = (3, 10),
                  blob_radius: tuple[float, float] = (4.0, 8.0),
                  min_separation: float = 24.0) -> list[tuple[ImageRGB, PointSet]]:
    """Generate (image, centers) pairs with rejection-sampled disk placement.

    Centers honor min_separation pairwise and keep each disk fully inside
    the frame. Placement that fails after a bounded number of attempts
    raises GenerationError.
    """
    if width <= 0 or height <= 0:
        raise ParameterError(f"image dims must be positive, got {width}x{height}")
    if n_images < 0:
        raise ParameterError(f"n_images must be >= 0, got {n_images}")
    b_min, b_max = blobs_per_image
    if not 0 <= b_min <= b_max:
        raise ParameterError(f"bad blobs_per_image range {blobs_per_image}")
    r_min, r_max = blob_radius
    if not 0 < r_min <= r_max:
        raise ParameterError(f"bad blob_radius range {blob_radius}")
    if min_separation < 2.0 * r_max:
        raise ParameterError(
            f"min_separation must be >= 2x the max blob radius "
            f"({2.0 * r_max}), got {min_separation}"
        )
    if width - 2 * (r_max + 1.0) <= 0 or height - 2 * (r_max + 1.0) <= 0:
        raise ParameterError(
            f"frame {width}x{height} cannot contain a disk of radius {r_max}"
        )
    rng = np.random.default_rng(seed)
    items = []
    for image_idx in range(n_images):
        n_blobs = int(rng.integers(b_min, b_max + 1))
        pixels = rng.uniform(0.0, _NOISE_AMPLITUDE, size=(height, width, 3))
        centers: list[tuple[float, float]] = []
        for _ in range(n_blobs):
            radius = float(rng.uniform(r_min, r_max))
            color = rng.uniform(_DISK_MIN_BRIGHTNESS, 1.0, size=3)
            placed = False
            for _ in range(_PLACEMENT_ATTEMPTS):
                cx = float(rng.uniform(radius + 1.0, width - 2.0 - radius))
                cy = float(rng.uniform(radius + 1.0, height - 2.0 - radius))
                if all(
                    (cx - px) ** 2 + (cy - py) ** 2 >= min_separation**2
                    for px, py in centers
                ):
                    placed = True
                    break
            if not placed:
                raise GenerationError(
                    f"image {image_idx}: could not place {n_blobs} disks of radius "
                    f"<= {r_max} with min_separation={min_separation} in "
                    f"{width}x{height}; relax min_separation or the blob count"
                )
            _paint_disk(pixels, cx, cy, radius, color)
            centers.append((cx, cy))
        items.append(
            (ImageRGB(pixels.astype(np.float32)), PointSet(tuple(centers), width, height))
        )
    return items


def _paint_disk(pixels, cx, cy, radius, color):
    height, width = pixels.shape[:2]
    x0 = max(0, int(np.floor(cx - radius - 1.0)))
    x1 = min(width, int(np.ceil(cx + radius + 2.0)))
    y0 = max(0, int(np.floor(cy - radius - 1.0)))
    y1 = min(height, int(np.ceil(cy + radius + 2.0)))
    yy, xx = np.mgrid[y0:y1, x0:x1]
    dist = np.sqrt((xx - cx) ** 2 + (yy - cy) ** 2)
    alpha = np.clip(radius + 0.5 - dist, 0.0, 1.0)[..., None]  # 1 px anti-aliased rim
    region = pixels[y0:y1, x0:x1]
    pixels[y0:y1, x0:x1] = alpha * color + (1.0 - alpha) * region


def split_dataset(items, fractions: tuple[float, float, float], seed: int,
                  assignments=None):
    """Seeded shuffle then contiguous (train, val, test) slices.

    With explicit per-item assignments ("train" / "val" / "test") the
    shuffle is bypassed, for datasets that publish their own split.
    """
    items = list(items)
    if assignments is not None:
        assignments = list(assignments)
        if len(assignments) != len(items):
            raise ParameterError(
                f"{len(assignments)} assignments for {len(items)} items"
            )
        buckets = {"train": [], "val": [], "test": []}
        for item, split in zip(items, assignments):
            if split not in buckets:
                raise ParameterError(f"bad split name {split!r}")
            buckets[split].append(item)
        return buckets["train"], buckets["val"], buckets["test"]
    fracs = tuple(float(f) for f in fractions)
    if len(fracs) != 3 or any(f < 0 for f in fracs):
        raise ParameterError(f"fractions must be three non-negative values, got {fractions}")
    if abs(sum(fracs) - 1.0) > 1e-9:
        raise ParameterError(f"fractions must sum to 1, got {sum(fracs)}")
    n = len(items)
    order = np.random.default_rng(seed).permutation(n)
    b1 = int(round(fracs[0] * n))
    b2 = int(round((fracs[0] + fracs[1]) * n))
    shuffled = [items[i] for i in order]
    return shuffled[:b1], shuffled[b1:b2], shuffled[b2:]
