"""RGB image container, PNG I/O, bilinear resizing.

Pixels are row-major (height, width, 3) floats in [0, 1]. Files are plain
8-bit RGB PNGs, mapped linearly: value * 255 rounded half-up on write,
divided by 255 on read.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image

from ..errors import ParameterError
from ..heatmap import PointSet, round_half_up


@dataclass(frozen=True)
class ImageRGB:
    pixels: np.ndarray

    def __post_init__(self):
        arr = np.array(self.pixels, copy=True)
        if arr.ndim != 3 or arr.shape[2] != 3 or arr.shape[0] < 1 or arr.shape[1] < 1:
            raise ParameterError(f"image must be (height, width, 3), got shape {arr.shape}")
        if not np.issubdtype(arr.dtype, np.floating):
            arr = arr.astype(np.float32)
        if not np.isfinite(arr).all():
            raise ParameterError("image channels must be finite")
        if arr.min() < 0.0 or arr.max() > 1.0:
            raise ParameterError(
                f"image channels must lie in [0, 1], got range [{arr.min()}, {arr.max()}]"
            )
        arr.flags.writeable = False
        object.__setattr__(self, "pixels", arr)

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def height(self) -> int:
        return self.pixels.shape[0]


def read_image_png(path) -> ImageRGB:
    with Image.open(Path(path)) as im:
        if im.mode != "RGB":
            raise ParameterError(
                f"expected an 8-bit RGB PNG, got mode {im.mode!r} in {path}"
            )
        arr = np.asarray(im, dtype=np.float32) / np.float32(255.0)
    return ImageRGB(arr)


def write_image_png(img: ImageRGB, path) -> None:
    arr = round_half_up(img.pixels * 255.0).astype(np.uint8)
    Image.fromarray(arr, mode="RGB").save(Path(path), format="PNG")


def to_tensor(img: ImageRGB) -> np.ndarray:
    """(1, 3, h, w) float32 network input."""
    return np.ascontiguousarray(img.pixels.transpose(2, 0, 1)[None], dtype=np.float32)


def resize_bilinear(img: ImageRGB, new_w: int, new_h: int) -> ImageRGB:
    """Bilinear resampling with pixel-center alignment and edge clamping.

    Resizing to the source dims is a bit-exact identity.
    """
    if new_w <= 0 or new_h <= 0:
        raise ParameterError(f"resize target dims must be positive, got {new_w}x{new_h}")
    src = img.pixels
    sh, sw = src.shape[:2]
    xs = np.clip((np.arange(new_w, dtype=np.float64) + 0.5) * (sw / new_w) - 0.5, 0.0, sw - 1.0)
    ys = np.clip((np.arange(new_h, dtype=np.float64) + 0.5) * (sh / new_h) - 0.5, 0.0, sh - 1.0)
    x0 = np.floor(xs).astype(np.intp)
    y0 = np.floor(ys).astype(np.intp)
    x1 = np.minimum(x0 + 1, sw - 1)
    y1 = np.minimum(y0 + 1, sh - 1)
    fx = (xs - x0)[None, :, None]
    fy = (ys - y0)[:, None, None]
    a = src[np.ix_(y0, x0)]
    b = src[np.ix_(y0, x1)]
    c = src[np.ix_(y1, x0)]
    d = src[np.ix_(y1, x1)]
    # a + f*(b-a) form keeps constants exact
    top = a + fx * (b - a)
    bottom = c + fx * (d - c)
    out = top + fy * (bottom - top)
    return ImageRGB(out.astype(src.dtype))


def scale_point_set(ps: PointSet, new_w: int, new_h: int) -> PointSet:
    """Rescale ground-truth coordinates by the same factors as a resize."""
    if new_w <= 0 or new_h <= 0:
        raise ParameterError(f"target dims must be positive, got {new_w}x{new_h}")
    sx = new_w / ps.frame_width
    sy = new_h / ps.frame_height
    pts = []
    for x, y in ps.points:
        nx = min(x * sx, float(np.nextafter(new_w, 0)))
        ny = min(y * sy, float(np.nextafter(new_h, 0)))
        pts.append((nx, ny))
    return PointSet(tuple(pts), new_w, new_h)
