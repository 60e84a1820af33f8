"""Municipality boundaries and stop enrichment.

Boundaries come from a GeoJSON FeatureCollection (one feature per
municipality, properties ``code`` and ``name``, Polygon or MultiPolygon
geometry).  Each stop is assigned the code of the municipality containing
its coordinates.
"""

from __future__ import annotations

import dataclasses
import json
import logging
from pathlib import Path

from transit_agent.errors import MalformedGeometry
from transit_agent.ingest.records import MunicipalityRecord, StopRecord

logger = logging.getLogger(__name__)

Ring = list[tuple[float, float]]  # closed: first point equals last


def _parse_ring(coords, where: str) -> Ring:
    if not isinstance(coords, list) or len(coords) < 4:
        raise MalformedGeometry(f"{where}: ring needs at least 4 positions")
    ring = []
    for pos in coords:
        if not isinstance(pos, list) or len(pos) < 2:
            raise MalformedGeometry(f"{where}: bad position {pos!r}")
        ring.append((float(pos[0]), float(pos[1])))
    if ring[0] != ring[-1]:
        raise MalformedGeometry(f"{where}: ring is not closed")
    return ring


def _parse_polygon(coords, where: str) -> list[Ring]:
    if not isinstance(coords, list) or not coords:
        raise MalformedGeometry(f"{where}: polygon without rings")
    return [_parse_ring(ring, where) for ring in coords]


def load_municipalities(path: str | Path) -> list[MunicipalityRecord]:
    """Parse the boundary file into records, preserving file order."""
    with open(path, encoding="utf-8") as handle:
        document = json.load(handle)
    if document.get("type") != "FeatureCollection":
        raise MalformedGeometry("boundary file must be a GeoJSON FeatureCollection")

    records = []
    for index, feature in enumerate(document.get("features", [])):
        where = f"feature {index}"
        properties = feature.get("properties") or {}
        code = str(properties.get("code") or "").strip()
        name = str(properties.get("name") or "").strip()
        if not code or not name:
            raise MalformedGeometry(f"{where}: missing code or name property")
        geometry = feature.get("geometry") or {}
        gtype = geometry.get("type")
        coords = geometry.get("coordinates")
        if gtype == "Polygon":
            polygons = [_parse_polygon(coords, where)]
        elif gtype == "MultiPolygon":
            if not isinstance(coords, list) or not coords:
                raise MalformedGeometry(f"{where}: empty MultiPolygon")
            polygons = [_parse_polygon(poly, where) for poly in coords]
        else:
            raise MalformedGeometry(f"{where}: unsupported geometry type {gtype!r}")
        records.append(MunicipalityRecord(code=code, name=name, boundary=polygons))
    return records


def _ring_crossings(lon: float, lat: float, ring: Ring) -> bool:
    """Even-odd ray cast along +longitude for one ring."""
    inside = False
    for i in range(len(ring) - 1):
        x1, y1 = ring[i]
        x2, y2 = ring[i + 1]
        if (y1 > lat) != (y2 > lat):
            x_cross = x1 + (lat - y1) * (x2 - x1) / (y2 - y1)
            if x_cross > lon:
                inside = not inside
    return inside


def point_in_polygon(lon: float, lat: float, polygons: list[list[Ring]]) -> bool:
    """True when the point falls inside any polygon (holes via even-odd rule)."""
    for rings in polygons:
        inside = False
        for ring in rings:
            if _ring_crossings(lon, lat, ring):
                inside = not inside
        if inside:
            return True
    return False


def _bounding_box(polygons: list[list[Ring]]) -> tuple[float, float, float, float]:
    xs = [x for rings in polygons for ring in rings for x, _ in ring]
    ys = [y for rings in polygons for ring in rings for _, y in ring]
    return min(xs), min(ys), max(xs), max(ys)


def assign_stop_municipality(
    stops: list[StopRecord], municipalities: list[MunicipalityRecord]
) -> list[StopRecord]:
    """Set each stop's municipality_code to the containing polygon's code.

    Municipalities are tried in file order and the first hit wins, which
    makes stops on shared borders deterministic.  Stops outside every
    polygon keep an empty code and are logged.
    """
    boxes = [_bounding_box(m.boundary) for m in municipalities]
    assigned = []
    unmatched = 0
    for stop in stops:
        code = ""
        for municipality, (min_x, min_y, max_x, max_y) in zip(municipalities, boxes):
            if not (min_x <= stop.lon <= max_x and min_y <= stop.lat <= max_y):
                continue
            if point_in_polygon(stop.lon, stop.lat, municipality.boundary):
                code = municipality.code
                break
        if not code:
            unmatched += 1
            logger.warning(
                "stop (%s, %s) %r at (%s, %s) is outside every municipality",
                stop.agency_id,
                stop.stop_id,
                stop.name,
                stop.lat,
                stop.lon,
            )
        assigned.append(dataclasses.replace(stop, municipality_code=code))
    if unmatched:
        logger.warning("%d of %d stops left without a municipality", unmatched, len(stops))
    return assigned
