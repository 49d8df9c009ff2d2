"""Gaussian-kernel heatmap codec: point sets to target heatmaps and back.

Coordinate convention throughout the package: x is the column, y is the
row, origin at the top-left pixel. A kernel is the radially symmetric bump
exp(-d^2 / (2 sigma^2)), truncated at ``truncation * sigma`` pixels and
min-max rescaled over the truncated patch, so the center pixel is exactly
1.0 and the patch edge is exactly 0.0. Overlapping kernels combine by
elementwise maximum. Decoding picks thresholded local maxima.

Heatmaps serialize to 8-bit grayscale PNG (value * 255, rounded half-up)
for previews and to a lossless raw format ("CHM1" header + float32 grid)
for exact round-trips.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image

from .errors import ParameterError

CHM_MAGIC = b"CHM1"


def round_half_up(values):
    """Round to the nearest integer with halves rounding up (toward +inf)."""
    return np.floor(np.asarray(values, dtype=np.float64) + 0.5)


@dataclass(frozen=True)
class PointSet:
    """Ordered 2-D points (x, y) in pixel units inside a fixed frame.

    Points must lie in [0, frame_width) x [0, frame_height) and be pairwise
    distinct; both are checked at construction.
    """

    points: tuple[tuple[float, float], ...]
    frame_width: int
    frame_height: int

    def __post_init__(self):
        if self.frame_width <= 0 or self.frame_height <= 0:
            raise ParameterError(
                f"frame dimensions must be positive, got "
                f"{self.frame_width}x{self.frame_height}"
            )
        pts = tuple((float(x), float(y)) for x, y in self.points)
        for x, y in pts:
            if not (0.0 <= x < self.frame_width and 0.0 <= y < self.frame_height):
                raise ParameterError(
                    f"point ({x}, {y}) outside frame "
                    f"{self.frame_width}x{self.frame_height}"
                )
        if len(set(pts)) != len(pts):
            raise ParameterError("duplicate points are not allowed")
        object.__setattr__(self, "points", pts)

    def __len__(self) -> int:
        return len(self.points)

    def as_array(self) -> np.ndarray:
        """(n, 2) float64 array of (x, y) rows."""
        if not self.points:
            return np.zeros((0, 2), dtype=np.float64)
        return np.array(self.points, dtype=np.float64)

    @classmethod
    def from_array(cls, arr, frame_width: int, frame_height: int) -> "PointSet":
        pts = tuple((float(x), float(y)) for x, y in np.asarray(arr).reshape(-1, 2))
        return cls(pts, frame_width, frame_height)


@dataclass(frozen=True)
class KernelSpec:
    """Fixed-size Gaussian kernel: standard deviation and truncation radius."""

    sigma: float
    truncation: float = 3.0

    def __post_init__(self):
        if not self.sigma > 0:
            raise ParameterError(f"sigma must be > 0, got {self.sigma}")
        if not self.truncation >= 1.0:
            raise ParameterError(f"truncation must be >= 1.0, got {self.truncation}")

    @property
    def support_radius(self) -> int:
        """Patch half-width in pixels: ceil(truncation * sigma)."""
        return int(np.ceil(self.truncation * self.sigma))


@dataclass(frozen=True)
class Heatmap:
    """Single-channel (height, width) grid of floats in [0, 1], row-major."""

    values: np.ndarray

    def __post_init__(self):
        arr = np.array(self.values, copy=True)
        if arr.ndim != 2 or arr.size == 0:
            raise ParameterError(f"heatmap must be a non-empty 2-D grid, got shape {arr.shape}")
        if not np.issubdtype(arr.dtype, np.floating):
            arr = arr.astype(np.float64)
        if not np.isfinite(arr).all():
            raise ParameterError("heatmap values must be finite")
        if arr.min() < 0.0 or arr.max() > 1.0:
            raise ParameterError(
                f"heatmap values must lie in [0, 1], got range "
                f"[{arr.min()}, {arr.max()}]"
            )
        arr.flags.writeable = False
        object.__setattr__(self, "values", arr)

    @property
    def width(self) -> int:
        return self.values.shape[1]

    @property
    def height(self) -> int:
        return self.values.shape[0]


def gaussian_patch(spec: KernelSpec) -> np.ndarray:
    """The (2R+1)x(2R+1) rescaled kernel patch, R = spec.support_radius.

    Raw values are exp(-d^2 / (2 sigma^2)) for the pixel's distance d from
    the patch center; the patch is then affinely rescaled so its minimum
    (at the corners) is 0.0 and its maximum (the center) is exactly 1.0.
    """
    r = spec.support_radius
    ax = np.arange(-r, r + 1, dtype=np.float64)
    d2 = ax[:, None] ** 2 + ax[None, :] ** 2
    raw = np.exp(-d2 / (2.0 * spec.sigma**2))
    lo = raw.min()
    return (raw - lo) / (1.0 - lo)


def encode(points: PointSet, spec: KernelSpec) -> Heatmap:
    """Stamp a kernel patch at every point's nearest pixel, fusing by max.

    Patch centers are rounded half-up to integer pixels and clipped at the
    frame borders; pixels covered by no patch stay 0.
    """
    h, w = points.frame_height, points.frame_width
    grid = np.zeros((h, w), dtype=np.float64)
    if not points.points:
        return Heatmap(grid)
    patch = gaussian_patch(spec)
    r = spec.support_radius
    for x, y in points.points:
        cx = int(round_half_up(x))
        cy = int(round_half_up(y))
        x0, x1 = max(0, cx - r), min(w, cx + r + 1)
        y0, y1 = max(0, cy - r), min(h, cy + r + 1)
        if x0 >= x1 or y0 >= y1:
            continue
        px0, py0 = x0 - (cx - r), y0 - (cy - r)
        window = grid[y0:y1, x0:x1]
        np.maximum(window, patch[py0 : py0 + (y1 - y0), px0 : px0 + (x1 - x0)], out=window)
    return Heatmap(grid)


def decode_with_scores(
    hm: Heatmap, threshold: float, min_distance: int = 1
) -> tuple[PointSet, np.ndarray]:
    """Thresholded local maxima of the heatmap, with their peak values.

    A pixel is a peak when its value is >= threshold and no pixel in its
    (2*min_distance+1)^2 neighborhood beats it; equal-valued neighbors are
    beaten by the lexicographically smallest (y, then x) pixel, so a
    plateau confined to one neighborhood emits exactly one point. Points
    come back sorted by descending value (ties by ascending y, then x).
    """
    if not 0.0 < threshold < 1.0:
        raise ParameterError(f"threshold must be in (0, 1), got {threshold}")
    if min_distance < 1:
        raise ParameterError(f"min_distance must be >= 1, got {min_distance}")
    v = hm.values
    height, width = v.shape
    keep = v >= threshold
    if not keep.any():
        return PointSet((), width, height), np.zeros(0, dtype=np.float64)
    for dy in range(-min_distance, min_distance + 1):
        for dx in range(-min_distance, min_distance + 1):
            if dy == 0 and dx == 0:
                continue
            ys = slice(max(0, -dy), height - max(0, dy))
            xs = slice(max(0, -dx), width - max(0, dx))
            nys = slice(max(0, dy), height - max(0, -dy))
            nxs = slice(max(0, dx), width - max(0, -dx))
            center = v[ys, xs]
            neighbor = v[nys, nxs]
            # a lexicographically smaller neighbor wins ties
            if dy < 0 or (dy == 0 and dx < 0):
                beaten = neighbor >= center
            else:
                beaten = neighbor > center
            keep[ys, xs] &= ~beaten
            if not keep.any():
                return PointSet((), width, height), np.zeros(0, dtype=np.float64)
    py, px = np.nonzero(keep)
    scores = v[py, px].astype(np.float64)
    order = np.lexsort((px, py, -scores))
    pts = tuple((float(px[i]), float(py[i])) for i in order)
    return PointSet(pts, width, height), scores[order]


def decode(hm: Heatmap, threshold: float, min_distance: int = 1) -> PointSet:
    """Peak extraction without the scores; see decode_with_scores."""
    points, _ = decode_with_scores(hm, threshold, min_distance)
    return points


def write_heatmap_png(hm: Heatmap, path) -> None:
    """8-bit grayscale preview: value * 255, rounded half-up."""
    arr = round_half_up(hm.values * 255.0).astype(np.uint8)
    Image.fromarray(arr, mode="L").save(Path(path), format="PNG")


def read_heatmap_png(path) -> Heatmap:
    with Image.open(Path(path)) as im:
        if im.mode != "L":
            raise ParameterError(f"expected an 8-bit grayscale PNG, got mode {im.mode}")
        arr = np.asarray(im, dtype=np.float64) / 255.0
    return Heatmap(arr)


def write_heatmap_raw(hm: Heatmap, path) -> None:
    """Lossless raw grid: 16-byte header (magic 'CHM1', u32 width, u32
    height, u32 reserved, little-endian) + row-major float32 values."""
    header = CHM_MAGIC + struct.pack("<III", hm.width, hm.height, 0)
    payload = np.ascontiguousarray(hm.values, dtype="<f4").tobytes()
    Path(path).write_bytes(header + payload)


def read_heatmap_raw(path) -> Heatmap:
    data = Path(path).read_bytes()
    if len(data) < 4 or data[:4] != CHM_MAGIC:
        raise ParameterError(f"bad magic {data[:4]!r}, expected {CHM_MAGIC!r} ('CHM1')")
    if len(data) < 16:
        raise ParameterError("raw heatmap header truncated")
    width, height, _ = struct.unpack("<III", data[4:16])
    expected = 16 + 4 * width * height
    if len(data) != expected:
        raise ParameterError(
            f"raw heatmap payload is {len(data) - 16} bytes, expected {expected - 16}"
        )
    values = np.frombuffer(data, dtype="<f4", offset=16).reshape(height, width)
    return Heatmap(values.astype(np.float32))
