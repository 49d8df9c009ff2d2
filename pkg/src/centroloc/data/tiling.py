"""Cutting mosaics into fixed-size tiles and merging per-tile predictions.

Tiles step at stride tile_size - overlap. When the mosaic is larger than
one tile, the last tile per axis shifts inward to end flush with the
border (no synthetic padding in training data); a mosaic smaller than a
tile is zero-padded instead, with the pad extent recorded.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import ParameterError
from ..heatmap import PointSet
from .images import ImageRGB


@dataclass(frozen=True)
class Tile:
    origin_x: int
    origin_y: int
    image: ImageRGB
    pad_right: int = 0
    pad_bottom: int = 0
    points: PointSet | None = None


@dataclass(frozen=True)
class TileGrid:
    tile_size: int
    overlap: int
    mosaic_width: int
    mosaic_height: int
    tiles: tuple[Tile, ...]


def tile_origins(extent: int, tile_size: int, overlap: int) -> list[int]:
    """Tile origins along one axis; the last origin is flush with the border
    whenever the extent exceeds one tile."""
    if extent <= tile_size:
        return [0]
    stride = tile_size - overlap
    origins = list(range(0, extent - tile_size + 1, stride))
    if origins[-1] + tile_size < extent:
        origins.append(extent - tile_size)
    return origins


def tile_mosaic(img: ImageRGB, tile_size: int, overlap: int,
                points: PointSet | None = None) -> TileGrid:
    """Cover the mosaic with tile_size x tile_size tiles.

    When given, ground-truth points are assigned to every tile whose extent
    contains them, translated to tile-local coordinates.
    """
    if tile_size <= 0:
        raise ParameterError(f"tile_size must be positive, got {tile_size}")
    if not 0 <= overlap < tile_size:
        raise ParameterError(
            f"overlap must satisfy 0 <= overlap < tile_size, got overlap={overlap} "
            f"tile_size={tile_size}"
        )
    xs = tile_origins(img.width, tile_size, overlap)
    ys = tile_origins(img.height, tile_size, overlap)
    tiles = []
    for oy in ys:
        for ox in xs:
            w_avail = min(tile_size, img.width - ox)
            h_avail = min(tile_size, img.height - oy)
            block = np.zeros((tile_size, tile_size, 3), dtype=img.pixels.dtype)
            block[:h_avail, :w_avail] = img.pixels[oy : oy + h_avail, ox : ox + w_avail]
            local = None
            if points is not None:
                sel = tuple(
                    (x - ox, y - oy)
                    for x, y in points.points
                    if ox <= x < ox + tile_size and oy <= y < oy + tile_size
                )
                local = PointSet(sel, tile_size, tile_size)
            tiles.append(
                Tile(ox, oy, ImageRGB(block), tile_size - w_avail, tile_size - h_avail, local)
            )
    return TileGrid(tile_size, overlap, img.width, img.height, tuple(tiles))


def stitch_tiles(grid: TileGrid) -> ImageRGB:
    """First-writer-wins reconstruction of the mosaic from its tiles."""
    out = np.zeros((grid.mosaic_height, grid.mosaic_width, 3),
                   dtype=grid.tiles[0].image.pixels.dtype)
    written = np.zeros(out.shape[:2], dtype=bool)
    for tile in grid.tiles:
        h_avail = grid.tile_size - tile.pad_bottom
        w_avail = grid.tile_size - tile.pad_right
        ys = slice(tile.origin_y, tile.origin_y + h_avail)
        xs = slice(tile.origin_x, tile.origin_x + w_avail)
        fresh = ~written[ys, xs]
        out[ys, xs][fresh] = tile.image.pixels[:h_avail, :w_avail][fresh]
        written[ys, xs] = True
    return ImageRGB(out)


def merge_tile_predictions(per_tile, dedupe_radius: float, frame_width: int,
                           frame_height: int, scores=None) -> PointSet:
    """Translate tile-local points to mosaic coordinates and deduplicate.

    Points within dedupe_radius of each other (transitively, i.e. greedy
    ascending-distance clustering) collapse to the one member with the
    highest score. Without scores, earlier entries win: tiles in input
    order, then each tile's own point order, which decode emits descending
    by peak value. Output is sorted by descending score, then (y, x).

    per_tile: sequence of ((origin_x, origin_y), PointSet); scores, when
    given, is a parallel sequence of per-point score arrays.
    """
    if dedupe_radius < 0:
        raise ParameterError(f"dedupe_radius must be >= 0, got {dedupe_radius}")
    entries = []  # (x, y, score, insertion order)
    for t_idx, (origin, ps) in enumerate(per_tile):
        ox, oy = origin
        tile_scores = scores[t_idx] if scores is not None else None
        for p_idx, (x, y) in enumerate(ps.points):
            gx, gy = x + ox, y + oy
            if not (0.0 <= gx < frame_width and 0.0 <= gy < frame_height):
                continue  # prediction fell in a padded dead zone
            score = float(tile_scores[p_idx]) if tile_scores is not None else -float(len(entries))
            entries.append((gx, gy, score, len(entries)))
    if not entries:
        return PointSet((), frame_width, frame_height)

    parent = list(range(len(entries)))

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    r2 = dedupe_radius * dedupe_radius
    for i in range(len(entries)):
        xi, yi = entries[i][0], entries[i][1]
        for j in range(i + 1, len(entries)):
            dx = xi - entries[j][0]
            dy = yi - entries[j][1]
            if dx * dx + dy * dy <= r2:
                ri, rj = find(i), find(j)
                if ri != rj:
                    parent[rj] = ri
    best: dict[int, tuple] = {}
    for e in entries:
        root = find(e[3])
        cur = best.get(root)
        if cur is None or (e[2], -e[3]) > (cur[2], -cur[3]):
            best[root] = e
    survivors = sorted(best.values(), key=lambda e: (-e[2], e[1], e[0]))
    return PointSet(tuple((x, y) for x, y, _, _ in survivors), frame_width, frame_height)
