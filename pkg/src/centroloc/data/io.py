"""On-disk label and dataset formats.

Points: CSV with header "x,y" (pixel floats) or a GeoJSON FeatureCollection
of Point geometries in pixel coordinates. Polygons: GeoJSON
FeatureCollection of Polygon geometries. Dataset manifest: a JSON list of
{image_path, labels_path, split} records with paths relative to the
manifest's directory.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

from ..errors import ParameterError
from ..heatmap import PointSet
from .geometry import Polygon
from .images import ImageRGB, read_image_png

SPLITS = ("train", "val", "test")


def write_points_csv(ps: PointSet, path) -> None:
    lines = ["x,y"] + [f"{x!r},{y!r}" for x, y in ps.points]
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def read_points_csv(path, frame_width: int, frame_height: int) -> PointSet:
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    pts = []
    if lines:
        header = lines[0].strip().replace(" ", "").lower()
        if header and header != "x,y":
            raise ParameterError(f"{path}: line 1: expected header 'x,y', got {lines[0]!r}")
        for lineno, line in enumerate(lines[1:], start=2):
            if not line.strip():
                continue
            parts = line.split(",")
            if len(parts) != 2:
                raise ParameterError(f"{path}: line {lineno}: expected 'x,y', got {line!r}")
            try:
                pts.append((float(parts[0]), float(parts[1])))
            except ValueError:
                raise ParameterError(
                    f"{path}: line {lineno}: non-numeric coordinates in {line!r}"
                ) from None
    return PointSet(tuple(pts), frame_width, frame_height)


def _load_feature_collection(path) -> list[dict]:
    doc = json.loads(Path(path).read_text(encoding="utf-8"))
    if not isinstance(doc, dict) or doc.get("type") != "FeatureCollection":
        raise ParameterError(f"{path}: expected a GeoJSON FeatureCollection")
    features = doc.get("features")
    if not isinstance(features, list):
        raise ParameterError(f"{path}: FeatureCollection without a features list")
    return features


def read_points_geojson(path, frame_width: int, frame_height: int) -> PointSet:
    pts = []
    for i, feature in enumerate(_load_feature_collection(path)):
        geom = feature.get("geometry") or {}
        if geom.get("type") != "Point":
            raise ParameterError(f"{path}: feature {i} is not a Point geometry")
        coords = geom.get("coordinates")
        if not isinstance(coords, (list, tuple)) or len(coords) < 2:
            raise ParameterError(f"{path}: feature {i} has bad Point coordinates")
        pts.append((float(coords[0]), float(coords[1])))
    return PointSet(tuple(pts), frame_width, frame_height)


def read_polygons_geojson(path) -> list[Polygon]:
    """Exterior rings only; holes are ignored. The GeoJSON closing vertex
    (first repeated last) is dropped."""
    polygons = []
    for i, feature in enumerate(_load_feature_collection(path)):
        geom = feature.get("geometry") or {}
        if geom.get("type") != "Polygon":
            raise ParameterError(f"{path}: feature {i} is not a Polygon geometry")
        rings = geom.get("coordinates")
        if not isinstance(rings, (list, tuple)) or not rings:
            raise ParameterError(f"{path}: feature {i} has no rings")
        ring = [(float(x), float(y)) for x, y in rings[0]]
        if len(ring) >= 2 and ring[0] == ring[-1]:
            ring = ring[:-1]
        polygons.append(Polygon(tuple(ring)))
    return polygons


def read_points_file(path, frame_width: int, frame_height: int) -> PointSet:
    suffix = Path(path).suffix.lower()
    if suffix == ".csv":
        return read_points_csv(path, frame_width, frame_height)
    if suffix in (".geojson", ".json"):
        return read_points_geojson(path, frame_width, frame_height)
    raise ParameterError(f"unsupported points file type {suffix!r} ({path})")


@dataclass(frozen=True)
class ManifestRecord:
    image_path: str
    labels_path: str
    split: str

    def __post_init__(self):
        if self.split not in SPLITS:
            raise ParameterError(f"split must be one of {SPLITS}, got {self.split!r}")


def write_manifest(records, path) -> None:
    payload = [
        {"image_path": r.image_path, "labels_path": r.labels_path, "split": r.split}
        for r in records
    ]
    Path(path).write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n",
                          encoding="utf-8")


def read_manifest(path) -> list[ManifestRecord]:
    doc = json.loads(Path(path).read_text(encoding="utf-8"))
    if not isinstance(doc, list):
        raise ParameterError(f"{path}: manifest must be a JSON list of records")
    records = []
    for i, rec in enumerate(doc):
        if not isinstance(rec, dict) or set(rec) != {"image_path", "labels_path", "split"}:
            raise ParameterError(
                f"{path}: record {i} must have exactly image_path, labels_path, split"
            )
        records.append(ManifestRecord(rec["image_path"], rec["labels_path"], rec["split"]))
    return records


def load_split_items(manifest_path, split: str) -> list[tuple[ImageRGB, PointSet]]:
    """Load every (image, labels) pair of one split, in manifest order."""
    if split not in SPLITS:
        raise ParameterError(f"split must be one of {SPLITS}, got {split!r}")
    manifest_path = Path(manifest_path)
    base = manifest_path.parent
    items = []
    for rec in read_manifest(manifest_path):
        if rec.split != split:
            continue
        img = read_image_png(base / rec.image_path)
        pts = read_points_file(base / rec.labels_path, img.width, img.height)
        items.append((img, pts))
    return items
