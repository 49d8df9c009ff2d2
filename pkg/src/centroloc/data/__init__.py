"""Imagery and ground-truth handling: I/O, tiling, geometry, synthesis."""

from .geometry import Polygon, polygon_centroid
from .images import (
    ImageRGB,
    read_image_png,
    resize_bilinear,
    scale_point_set,
    to_tensor,
    write_image_png,
)
from .io import (
    ManifestRecord,
    load_split_items,
    read_manifest,
    read_points_csv,
    read_points_file,
    read_points_geojson,
    read_polygons_geojson,
    write_manifest,
    write_points_csv,
)
from .synth import split_dataset, synth_dataset
from .tiling import Tile, TileGrid, merge_tile_predictions, stitch_tiles, tile_mosaic, tile_origins

__all__ = [name for name in dir() if not name.startswith("_")]
