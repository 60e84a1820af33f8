"""Parse a GTFS feed directory into typed records.

Malformed rows are skipped and reported (never silently dropped); a per-file
cap aborts the parse when a feed is clearly unusable.
"""

from __future__ import annotations

import csv
import datetime as dt
import logging
from pathlib import Path

from transit_agent.errors import FeedFormatError, MalformedRow, MissingFile
from transit_agent.ingest.records import (
    DIRECTION_INBOUND,
    DIRECTION_OUTBOUND,
    AgencyRecord,
    FeedBundle,
    RawShape,
    RouteRecord,
    RowError,
    ServiceCalendar,
    StopRecord,
    StopTimeRecord,
    TripRecord,
)

logger = logging.getLogger(__name__)

REQUIRED_FILES = ("agency", "routes", "trips", "calendar", "shapes", "stops", "stop_times")

# Files that must yield at least one record for the feed to make sense.
NON_EMPTY_FILES = ("agency", "routes", "trips", "stops")

DEFAULT_ERROR_CAP = 100

_WEEKDAY_COLUMNS = ("monday", "tuesday", "wednesday", "thursday", "friday", "saturday", "sunday")


def parse_time(value: str) -> int:
    """GTFS H:MM:SS or HH:MM:SS to seconds since midnight (may exceed 86400)."""
    parts = value.strip().split(":")
    if len(parts) != 3:
        raise ValueError(f"bad time {value!r}")
    hours, minutes, seconds = (int(p) for p in parts)
    if not (0 <= minutes < 60 and 0 <= seconds < 60 and hours >= 0):
        raise ValueError(f"bad time {value!r}")
    return hours * 3600 + minutes * 60 + seconds


def parse_date(value: str) -> dt.date:
    """GTFS YYYYMMDD to a date."""
    return dt.datetime.strptime(value.strip(), "%Y%m%d").date()


def parse_direction(value: str) -> str:
    """GTFS direction_id to the canonical string; empty defaults to outbound."""
    value = value.strip()
    if value in ("", "0"):
        return DIRECTION_OUTBOUND
    if value == "1":
        return DIRECTION_INBOUND
    raise ValueError(f"bad direction_id {value!r}")


def _require(row: dict, column: str) -> str:
    value = (row.get(column) or "").strip()
    if not value:
        raise ValueError(f"missing {column}")
    return value


def _parse_agency(row: dict) -> AgencyRecord:
    return AgencyRecord(
        agency_id=_require(row, "agency_id"),
        agency_name=_require(row, "agency_name"),
        # Not part of the GTFS standard; taken from the feed when present.
        agency_hq_city=(row.get("agency_hq_city") or "").strip(),
    )


def _parse_route(row: dict) -> RouteRecord:
    return RouteRecord(
        agency_id=(row.get("agency_id") or "").strip(),
        route_id=_require(row, "route_id"),
        short_name=(row.get("route_short_name") or "").strip(),
        long_name=(row.get("route_long_name") or "").strip(),
    )


def _parse_trip(row: dict) -> TripRecord:
    return TripRecord(
        agency_id="",
        trip_id=_require(row, "trip_id"),
        route_id=_require(row, "route_id"),
        service_id=_require(row, "service_id"),
        shape_id=(row.get("shape_id") or "").strip(),
        direction=parse_direction(row.get("direction_id") or ""),
    )


def _parse_calendar(row: dict) -> ServiceCalendar:
    flags = tuple(bool(int(_require(row, day))) for day in _WEEKDAY_COLUMNS)
    return ServiceCalendar(
        agency_id="",
        service_id=_require(row, "service_id"),
        weekday_flags=flags,  # type: ignore[arg-type]
        start_date=parse_date(_require(row, "start_date")),
        end_date=parse_date(_require(row, "end_date")),
    )


def _parse_stop(row: dict) -> StopRecord:
    return StopRecord(
        agency_id="",
        stop_id=_require(row, "stop_id"),
        name=_require(row, "stop_name"),
        lat=float(_require(row, "stop_lat")),
        lon=float(_require(row, "stop_lon")),
    )


def _parse_stop_time(row: dict) -> StopTimeRecord:
    return StopTimeRecord(
        agency_id="",
        trip_id=_require(row, "trip_id"),
        stop_id=_require(row, "stop_id"),
        stop_sequence=int(_require(row, "stop_sequence")),
        arrival=parse_time(_require(row, "arrival_time")),
        departure=parse_time(_require(row, "departure_time")),
    )


_ROW_PARSERS = {
    "agency": _parse_agency,
    "routes": _parse_route,
    "trips": _parse_trip,
    "calendar": _parse_calendar,
    "stops": _parse_stop,
    "stop_times": _parse_stop_time,
}


def _read_rows(path: Path) -> list[tuple[int, dict]]:
    with open(path, newline="", encoding="utf-8-sig") as handle:
        reader = csv.DictReader(handle)
        # line 1 is the header, data starts at 2
        return [(i, row) for i, row in enumerate(reader, start=2)]


def _parse_file(path: Path, name: str, errors: list[RowError], cap: int) -> list:
    records = []
    parser = _ROW_PARSERS[name]
    file_errors = 0
    for line, row in _read_rows(path):
        try:
            records.append(parser(row))
        except (ValueError, KeyError) as exc:
            err = MalformedRow(f"{name}.txt", line, str(exc))
            logger.warning("skipping malformed row: %s", err)
            errors.append(RowError(f"{name}.txt", line, str(exc)))
            file_errors += 1
            if file_errors > cap:
                raise FeedFormatError(
                    f"{name}.txt: more than {cap} malformed rows, aborting"
                ) from err
    return records


def _parse_shapes(path: Path, errors: list[RowError], cap: int) -> list[RawShape]:
    """Group shapes.txt rows into ordered point lists keyed by shape_id."""
    grouped: dict[str, list[tuple[int, float, float]]] = {}
    order: list[str] = []
    file_errors = 0
    for line, row in _read_rows(path):
        try:
            shape_id = _require(row, "shape_id")
            seq = int(_require(row, "shape_pt_sequence"))
            lat = float(_require(row, "shape_pt_lat"))
            lon = float(_require(row, "shape_pt_lon"))
        except (ValueError, KeyError) as exc:
            logger.warning("skipping malformed row: shapes.txt:%s: %s", line, exc)
            errors.append(RowError("shapes.txt", line, str(exc)))
            file_errors += 1
            if file_errors > cap:
                raise FeedFormatError(f"shapes.txt: more than {cap} malformed rows, aborting")
            continue
        if shape_id not in grouped:
            grouped[shape_id] = []
            order.append(shape_id)
        grouped[shape_id].append((seq, lat, lon))

    shapes = []
    for shape_id in order:
        rows = sorted(grouped[shape_id])
        shapes.append(RawShape(shape_id=shape_id, points=[(lat, lon) for _, lat, lon in rows]))
    return shapes


def parse_feed(path: str | Path, agency_tag: str, error_cap: int = DEFAULT_ERROR_CAP) -> FeedBundle:
    """Parse the GTFS CSV files under ``path`` into a :class:`FeedBundle`.

    Raises :class:`MissingFile` when a required file is absent and
    :class:`FeedFormatError` when a file exceeds the malformed-row cap or a
    must-have file parses to zero records.
    """
    directory = Path(path)
    if not directory.is_dir():
        raise MissingFile("<feed directory>", str(directory))
    if not agency_tag or not agency_tag.strip():
        raise ValueError("agency_tag must be non-empty")

    bundle = FeedBundle(agency_tag=agency_tag.strip(), source_path=str(directory))
    for name in REQUIRED_FILES:
        file_path = directory / f"{name}.txt"
        if not file_path.is_file():
            raise MissingFile(name, str(directory))
        if name == "shapes":
            bundle.files[name] = _parse_shapes(file_path, bundle.row_errors, error_cap)
        else:
            bundle.files[name] = _parse_file(file_path, name, bundle.row_errors, error_cap)

    for name in NON_EMPTY_FILES:
        if not bundle.files[name]:
            raise FeedFormatError(f"{name}.txt parsed to zero records")

    seen_agencies = set()
    for agency in bundle.agencies:
        if agency.agency_id in seen_agencies:
            raise FeedFormatError(f"duplicate agency_id {agency.agency_id!r} in agency.txt")
        seen_agencies.add(agency.agency_id)

    if bundle.row_errors:
        logger.warning(
            "feed %s: skipped %d malformed rows", bundle.agency_tag, len(bundle.row_errors)
        )
    return bundle
