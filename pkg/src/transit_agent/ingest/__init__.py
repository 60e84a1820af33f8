"""GTFS ingestion: parse feeds, normalize keys, decompose shapes, load SQLite."""

from transit_agent.ingest.records import (
    AgencyRecord,
    FeedBundle,
    MunicipalityRecord,
    RouteRecord,
    ServiceCalendar,
    ShapePointRecord,
    ShapeRecord,
    ShapeSequenceRecord,
    StopRecord,
    StopTimeRecord,
    TripRecord,
    DIRECTION_OUTBOUND,
    DIRECTION_INBOUND,
)
from transit_agent.ingest.parse import parse_feed, REQUIRED_FILES
from transit_agent.ingest.normalize import normalize_keys, check_references
from transit_agent.ingest.shapes import decompose_shapes, reconstruct_shape
from transit_agent.ingest.municipalities import (
    assign_stop_municipality,
    load_municipalities,
    point_in_polygon,
)
from transit_agent.ingest.database import DatabaseHandle, build_database

__all__ = [
    "AgencyRecord",
    "DatabaseHandle",
    "DIRECTION_INBOUND",
    "DIRECTION_OUTBOUND",
    "FeedBundle",
    "MunicipalityRecord",
    "REQUIRED_FILES",
    "RouteRecord",
    "ServiceCalendar",
    "ShapePointRecord",
    "ShapeRecord",
    "ShapeSequenceRecord",
    "StopRecord",
    "StopTimeRecord",
    "TripRecord",
    "assign_stop_municipality",
    "build_database",
    "check_references",
    "decompose_shapes",
    "load_municipalities",
    "normalize_keys",
    "parse_feed",
    "point_in_polygon",
    "reconstruct_shape",
]
