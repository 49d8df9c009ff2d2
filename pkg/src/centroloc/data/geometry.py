"""Polygon geometry: validity and area-weighted (shoelace) centroids."""

from __future__ import annotations

import math
from dataclasses import dataclass

from ..errors import GeometryError


@dataclass(frozen=True)
class Polygon:
    """Implicitly closed polygon with at least 3 vertices and nonzero area."""

    vertices: tuple[tuple[float, float], ...]

    def __post_init__(self):
        verts = tuple((float(x), float(y)) for x, y in self.vertices)
        if len(verts) < 3:
            raise GeometryError(f"polygon needs >= 3 vertices, got {len(verts)}")
        if _signed_area2(verts) == 0.0:
            raise GeometryError("zero-area polygon")
        object.__setattr__(self, "vertices", verts)


def _signed_area2(verts) -> float:
    # twice the signed area; fsum keeps the result independent of vertex
    # ordering (cyclic rotation, reversal)
    n = len(verts)
    terms = []
    for i in range(n):
        x0, y0 = verts[i]
        x1, y1 = verts[(i + 1) % n]
        terms.append(x0 * y1 - x1 * y0)
    return math.fsum(terms)


def polygon_centroid(poly: Polygon) -> tuple[float, float]:
    """Area-weighted centroid via the shoelace formulation.

    Invariant under vertex-order reversal and cyclic rotation of the
    vertex list, exactly.
    """
    verts = poly.vertices
    n = len(verts)
    a2 = _signed_area2(verts)
    if a2 == 0.0:
        raise GeometryError("zero-area polygon has no centroid")
    cx_terms = []
    cy_terms = []
    for i in range(n):
        x0, y0 = verts[i]
        x1, y1 = verts[(i + 1) % n]
        cross = x0 * y1 - x1 * y0
        cx_terms.append((x0 + x1) * cross)
        cy_terms.append((y0 + y1) * cross)
    return math.fsum(cx_terms) / (3.0 * a2), math.fsum(cy_terms) / (3.0 * a2)
