"""Route geometry documents for the interactive map view.

Geometry is read exclusively through the route_geometry view (shape points
and stops of every route); the output document is a GeoJSON
FeatureCollection with one LineString for the shape and one named Point per
stop.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from transit_agent.errors import EmptyGeometry, NoGeometry, UnknownRoute
from transit_agent.ingest.database import DatabaseHandle
from transit_agent.ingest.records import DIRECTION_INBOUND, DIRECTION_OUTBOUND

COORDINATE_DECIMALS = 6  # ~0.1 m, the precision of GTFS sources


@dataclass
class RouteGeometry:
    route_ref: tuple[str, str]  # (agency_id, route_id)
    direction: str
    shape_points: list[tuple[float, float]]  # (lat, lon), ordered by sequence
    stops: list[tuple[str, float, float]] = field(default_factory=list)  # (name, lat, lon)
    shape_id: str = ""  # the representative shape the points came from


def fetch_route_geometry(
    db: DatabaseHandle, route_ref: tuple[str, str], direction: str | None = None
) -> RouteGeometry:
    """Geometry of one route: representative shape plus deduplicated stops.

    The representative shape is the one with the most points among the
    route's trips for the requested direction (outbound by default, falling
    back to inbound when outbound has no geometry); ties break on shape id.
    """
    agency_id, route_id = route_ref
    _, exists = db.execute_query(
        "SELECT 1 FROM routes WHERE agency_id = ? AND route_id = ?", (agency_id, route_id)
    )
    if not exists:
        raise UnknownRoute(f"no route ({agency_id}, {route_id})")

    if direction is not None:
        directions = [direction]
    else:
        directions = [DIRECTION_OUTBOUND, DIRECTION_INBOUND]

    for candidate in directions:
        representative = db.execute_query(
            "SELECT shape_id, trip_id, count(*) AS n FROM route_geometry "
            "WHERE agency_id = ? AND route_id = ? AND direction = ? AND kind = 'shape_point' "
            "GROUP BY shape_id, trip_id ORDER BY n DESC, shape_id ASC, trip_id ASC LIMIT 1",
            (agency_id, route_id, candidate),
        )[1]
        if not representative:
            continue
        shape_id, trip_id, _count = representative[0]
        _, point_rows = db.execute_query(
            "SELECT lat, lon FROM route_geometry "
            "WHERE agency_id = ? AND route_id = ? AND trip_id = ? AND kind = 'shape_point' "
            "ORDER BY seq",
            (agency_id, route_id, trip_id),
        )
        _, stop_rows = db.execute_query(
            "SELECT DISTINCT stop_id, stop_name, lat, lon FROM route_geometry "
            "WHERE agency_id = ? AND route_id = ? AND direction = ? AND kind = 'stop' "
            "ORDER BY stop_id",
            (agency_id, route_id, candidate),
        )
        return RouteGeometry(
            route_ref=route_ref,
            direction=candidate,
            shape_points=[(lat, lon) for lat, lon in point_rows],
            stops=[(name, lat, lon) for _stop_id, name, lat, lon in stop_rows],
            shape_id=shape_id,
        )
    raise NoGeometry(f"route ({agency_id}, {route_id}) has no shape geometry")


def to_geo_document(geometry: RouteGeometry) -> dict:
    """GeoJSON FeatureCollection for the route.

    Coordinates are emitted (lon, lat) at 6 decimal places; the LineString
    keeps shape-sequence order and every stop becomes one Point feature
    with a ``name`` property.
    """
    if not geometry.shape_points:
        raise EmptyGeometry(f"route {geometry.route_ref} has an empty shape")

    def coord(lat: float, lon: float) -> list[float]:
        return [round(lon, COORDINATE_DECIMALS), round(lat, COORDINATE_DECIMALS)]

    features: list[dict] = [
        {
            "type": "Feature",
            "geometry": {
                "type": "LineString",
                "coordinates": [coord(lat, lon) for lat, lon in geometry.shape_points],
            },
            "properties": {
                "agency_id": geometry.route_ref[0],
                "route_id": geometry.route_ref[1],
                "direction": geometry.direction,
                "shape_id": geometry.shape_id,
            },
        }
    ]
    for name, lat, lon in geometry.stops:
        features.append(
            {
                "type": "Feature",
                "geometry": {"type": "Point", "coordinates": coord(lat, lon)},
                "properties": {"name": name},
            }
        )
    return {"type": "FeatureCollection", "features": features}


def parse_geo_document(document: dict) -> RouteGeometry:
    """Inverse of :func:`to_geo_document` (used by round-trip checks)."""
    validate_geo_document(document)
    line = document["features"][0]
    properties = line.get("properties", {})
    shape_points = [(lat, lon) for lon, lat in line["geometry"]["coordinates"]]
    stops = []
    for feature in document["features"][1:]:
        lon, lat = feature["geometry"]["coordinates"]
        stops.append((feature["properties"]["name"], lat, lon))
    return RouteGeometry(
        route_ref=(properties.get("agency_id", ""), properties.get("route_id", "")),
        direction=properties.get("direction", DIRECTION_OUTBOUND),
        shape_points=shape_points,
        stops=stops,
        shape_id=properties.get("shape_id", ""),
    )


def validate_geo_document(document: dict):
    """Structural GeoJSON rules: types, coordinate arity, WGS84 bounds."""
    if document.get("type") != "FeatureCollection":
        raise ValueError("document is not a FeatureCollection")
    features = document.get("features")
    if not isinstance(features, list) or not features:
        raise ValueError("FeatureCollection has no features")
    line = features[0]
    if line.get("type") != "Feature" or line.get("geometry", {}).get("type") != "LineString":
        raise ValueError("first feature must be the shape LineString")
    for coords in line["geometry"]["coordinates"]:
        _check_position(coords)
    for feature in features[1:]:
        if feature.get("type") != "Feature" or feature.get("geometry", {}).get("type") != "Point":
            raise ValueError("stop features must be Points")
        _check_position(feature["geometry"]["coordinates"])
        if "name" not in feature.get("properties", {}):
            raise ValueError("stop Point lacks a name property")


def _check_position(coords):
    if not isinstance(coords, list) or len(coords) != 2:
        raise ValueError(f"bad position {coords!r}")
    lon, lat = coords
    if not (-180.0 <= lon <= 180.0 and -90.0 <= lat <= 90.0):
        raise ValueError(f"position out of WGS84 bounds: {coords!r}")
