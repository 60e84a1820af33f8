"""Typed records for the parsed GTFS entities and enrichment sources."""

from __future__ import annotations

import datetime as dt
from dataclasses import dataclass, field

# Canonical direction strings; the numeric GTFS direction_id (0/1) is
# converted once at parse time and never stored.
DIRECTION_OUTBOUND = "andata"
DIRECTION_INBOUND = "ritorno"
DIRECTIONS = (DIRECTION_OUTBOUND, DIRECTION_INBOUND)


@dataclass
class AgencyRecord:
    agency_id: str
    agency_name: str
    agency_hq_city: str = ""


@dataclass
class RouteRecord:
    agency_id: str
    route_id: str
    short_name: str = ""
    long_name: str = ""


@dataclass
class TripRecord:
    agency_id: str
    trip_id: str
    route_id: str
    service_id: str
    shape_id: str = ""
    direction: str = DIRECTION_OUTBOUND

    def __post_init__(self):
        if self.direction not in DIRECTIONS:
            raise ValueError(f"direction must be one of {DIRECTIONS}, got {self.direction!r}")


@dataclass
class ServiceCalendar:
    agency_id: str
    service_id: str
    weekday_flags: tuple[bool, bool, bool, bool, bool, bool, bool]  # Mon..Sun
    start_date: dt.date
    end_date: dt.date

    def __post_init__(self):
        if self.start_date > self.end_date:
            raise ValueError(f"start_date {self.start_date} after end_date {self.end_date}")


@dataclass
class StopRecord:
    agency_id: str
    stop_id: str
    name: str
    lat: float
    lon: float
    municipality_code: str = ""

    def __post_init__(self):
        if not -90.0 <= self.lat <= 90.0:
            raise ValueError(f"latitude out of range: {self.lat}")
        if not -180.0 <= self.lon <= 180.0:
            raise ValueError(f"longitude out of range: {self.lon}")


@dataclass
class StopTimeRecord:
    agency_id: str
    trip_id: str
    stop_id: str
    stop_sequence: int
    arrival: int  # seconds since midnight; may exceed 86400 for after-midnight trips
    departure: int

    def __post_init__(self):
        if self.stop_sequence < 0:
            raise ValueError(f"stop_sequence must be non-negative, got {self.stop_sequence}")
        if self.arrival > self.departure:
            raise ValueError(f"arrival {self.arrival} after departure {self.departure}")


@dataclass
class ShapeRecord:
    agency_id: str
    shape_id: str


@dataclass
class ShapePointRecord:
    agency_id: str
    point_id: int
    lat: float
    lon: float


@dataclass
class ShapeSequenceRecord:
    agency_id: str
    shape_id: str
    seq: int  # contiguous 1..n within a shape
    point_id: int


@dataclass
class MunicipalityRecord:
    code: str
    name: str
    # One entry per polygon; each polygon is a list of rings and each ring a
    # closed list of (lon, lat) pairs (first point equals last).
    boundary: list[list[list[tuple[float, float]]]]


# Raw GTFS shape rows kept verbatim so decomposition can be checked against
# the source file (shape_id, ordered (lat, lon) list).
@dataclass
class RawShape:
    shape_id: str
    points: list[tuple[float, float]]


@dataclass
class RowError:
    file: str
    line: int
    reason: str


@dataclass
class FeedBundle:
    """One parsed GTFS feed plus the tag identifying its source agency."""

    agency_tag: str
    source_path: str
    files: dict[str, list] = field(default_factory=dict)
    row_errors: list[RowError] = field(default_factory=list)
    normalized: bool = False

    @property
    def agencies(self) -> list[AgencyRecord]:
        return self.files["agency"]

    @property
    def routes(self) -> list[RouteRecord]:
        return self.files["routes"]

    @property
    def trips(self) -> list[TripRecord]:
        return self.files["trips"]

    @property
    def calendars(self) -> list[ServiceCalendar]:
        return self.files["calendar"]

    @property
    def stops(self) -> list[StopRecord]:
        return self.files["stops"]

    @property
    def stop_times(self) -> list[StopTimeRecord]:
        return self.files["stop_times"]

    @property
    def shapes(self) -> list[RawShape]:
        return self.files["shapes"]
