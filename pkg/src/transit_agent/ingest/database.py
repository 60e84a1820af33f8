"""SQLite storage for the merged feeds plus the route-geometry view.

The whole application reads the data through standard SQL; writes happen
only here, during the single-threaded ingest batch.
"""

from __future__ import annotations

import json
import logging
import sqlite3
import time
from pathlib import Path

from transit_agent.errors import ConstraintViolation, QueryTimeout
from transit_agent.ingest.records import FeedBundle, MunicipalityRecord
from transit_agent.ingest.shapes import decompose_shapes

logger = logging.getLogger(__name__)

SCHEMA = """
CREATE TABLE agency (
    agency_id TEXT PRIMARY KEY,
    agency_name TEXT NOT NULL,
    agency_hq_city TEXT
);

CREATE TABLE municipalities (
    code TEXT PRIMARY KEY,
    name TEXT NOT NULL,
    boundary TEXT NOT NULL
);

CREATE TABLE routes (
    agency_id TEXT NOT NULL REFERENCES agency(agency_id),
    route_id TEXT NOT NULL,
    short_name TEXT,
    long_name TEXT,
    PRIMARY KEY (agency_id, route_id)
);

CREATE TABLE calendar (
    agency_id TEXT NOT NULL REFERENCES agency(agency_id),
    service_id TEXT NOT NULL,
    monday INTEGER NOT NULL,
    tuesday INTEGER NOT NULL,
    wednesday INTEGER NOT NULL,
    thursday INTEGER NOT NULL,
    friday INTEGER NOT NULL,
    saturday INTEGER NOT NULL,
    sunday INTEGER NOT NULL,
    start_date TEXT NOT NULL,
    end_date TEXT NOT NULL,
    PRIMARY KEY (agency_id, service_id)
);

CREATE TABLE shapes (
    agency_id TEXT NOT NULL REFERENCES agency(agency_id),
    shape_id TEXT NOT NULL,
    PRIMARY KEY (agency_id, shape_id)
);

CREATE TABLE shape_points (
    agency_id TEXT NOT NULL REFERENCES agency(agency_id),
    point_id INTEGER NOT NULL,
    lat REAL NOT NULL,
    lon REAL NOT NULL,
    PRIMARY KEY (agency_id, point_id)
);

CREATE TABLE shape_sequences (
    agency_id TEXT NOT NULL,
    shape_id TEXT NOT NULL,
    seq INTEGER NOT NULL,
    point_id INTEGER NOT NULL,
    PRIMARY KEY (agency_id, shape_id, seq),
    FOREIGN KEY (agency_id, shape_id) REFERENCES shapes(agency_id, shape_id),
    FOREIGN KEY (agency_id, point_id) REFERENCES shape_points(agency_id, point_id)
);

CREATE TABLE stops (
    agency_id TEXT NOT NULL REFERENCES agency(agency_id),
    stop_id TEXT NOT NULL,
    name TEXT NOT NULL,
    lat REAL NOT NULL,
    lon REAL NOT NULL,
    municipality_code TEXT REFERENCES municipalities(code),
    PRIMARY KEY (agency_id, stop_id)
);

CREATE TABLE trips (
    agency_id TEXT NOT NULL REFERENCES agency(agency_id),
    trip_id TEXT NOT NULL,
    route_id TEXT NOT NULL,
    service_id TEXT NOT NULL,
    shape_id TEXT,
    direction TEXT NOT NULL CHECK (direction IN ('andata', 'ritorno')),
    PRIMARY KEY (agency_id, trip_id),
    FOREIGN KEY (agency_id, route_id) REFERENCES routes(agency_id, route_id),
    FOREIGN KEY (agency_id, service_id) REFERENCES calendar(agency_id, service_id),
    FOREIGN KEY (agency_id, shape_id) REFERENCES shapes(agency_id, shape_id)
);

CREATE TABLE stop_times (
    agency_id TEXT NOT NULL,
    trip_id TEXT NOT NULL,
    stop_id TEXT NOT NULL,
    stop_sequence INTEGER NOT NULL,
    arrival INTEGER NOT NULL,
    departure INTEGER NOT NULL,
    PRIMARY KEY (agency_id, trip_id, stop_sequence),
    FOREIGN KEY (agency_id, trip_id) REFERENCES trips(agency_id, trip_id),
    FOREIGN KEY (agency_id, stop_id) REFERENCES stops(agency_id, stop_id)
);

CREATE INDEX idx_trips_route ON trips(agency_id, route_id);
CREATE INDEX idx_stop_times_trip ON stop_times(agency_id, trip_id);
CREATE INDEX idx_stop_times_stop ON stop_times(agency_id, stop_id);
CREATE INDEX idx_shape_sequences_shape ON shape_sequences(agency_id, shape_id);

CREATE VIEW route_geometry AS
SELECT r.agency_id AS agency_id, r.route_id AS route_id, t.trip_id AS trip_id,
       t.direction AS direction, t.shape_id AS shape_id,
       'shape_point' AS kind, ss.seq AS seq, sp.lat AS lat, sp.lon AS lon,
       NULL AS stop_id, NULL AS stop_name
FROM routes r
JOIN trips t ON t.agency_id = r.agency_id AND t.route_id = r.route_id
JOIN shape_sequences ss ON ss.agency_id = t.agency_id AND ss.shape_id = t.shape_id
JOIN shape_points sp ON sp.agency_id = ss.agency_id AND sp.point_id = ss.point_id
UNION ALL
SELECT r.agency_id AS agency_id, r.route_id AS route_id, t.trip_id AS trip_id,
       t.direction AS direction, t.shape_id AS shape_id,
       'stop' AS kind, st.stop_sequence AS seq, s.lat AS lat, s.lon AS lon,
       s.stop_id AS stop_id, s.name AS stop_name
FROM routes r
JOIN trips t ON t.agency_id = r.agency_id AND t.route_id = r.route_id
JOIN stop_times st ON st.agency_id = t.agency_id AND st.trip_id = t.trip_id
JOIN stops s ON s.agency_id = st.agency_id AND s.stop_id = st.stop_id;
"""

DEFAULT_QUERY_TIMEOUT = 30.0

TABLES = (
    "agency",
    "municipalities",
    "routes",
    "calendar",
    "shapes",
    "shape_points",
    "shape_sequences",
    "stops",
    "trips",
    "stop_times",
)


class DatabaseHandle:
    """Thin wrapper around one SQLite file.

    The ingest batch writes through :func:`build_database`; everything else
    opens read-only connections, so the file can safely serve concurrent
    readers.
    """

    def __init__(self, path: str | Path):
        self.path = Path(path)

    def connect(self, readonly: bool = True) -> sqlite3.Connection:
        if readonly:
            conn = sqlite3.connect(f"file:{self.path}?mode=ro", uri=True)
        else:
            conn = sqlite3.connect(self.path)
        conn.execute("PRAGMA foreign_keys = ON")
        return conn

    def execute_query(
        self,
        sql: str,
        params: tuple = (),
        timeout_s: float = DEFAULT_QUERY_TIMEOUT,
        max_rows: int | None = None,
    ) -> tuple[list[str], list[tuple]]:
        """Run one read-only query and return (column names, rows).

        Execution is cancelled through a progress handler once the deadline
        passes, raising :class:`QueryTimeout`.
        """
        conn = self.connect(readonly=True)
        deadline = time.monotonic() + timeout_s
        conn.set_progress_handler(lambda: 1 if time.monotonic() > deadline else 0, 5000)
        try:
            cursor = conn.execute(sql, params)
            columns = [d[0] for d in cursor.description] if cursor.description else []
            if max_rows is None:
                rows = cursor.fetchall()
            else:
                rows = cursor.fetchmany(max_rows)
            return columns, [tuple(row) for row in rows]
        except sqlite3.OperationalError as exc:
            if "interrupt" in str(exc).lower():
                raise QueryTimeout(f"query exceeded {timeout_s}s: {sql[:120]}") from exc
            raise
        finally:
            conn.close()

    def table_names(self) -> list[str]:
        columns, rows = self.execute_query(
            "SELECT name FROM sqlite_master WHERE type IN ('table', 'view') ORDER BY name"
        )
        return [row[0] for row in rows]

    def table_columns(self, table: str) -> list[tuple[str, str]]:
        """(column, declared type) pairs, in declaration order."""
        conn = self.connect(readonly=True)
        try:
            rows = conn.execute(f"PRAGMA table_info({_quote_ident(table)})").fetchall()
        finally:
            conn.close()
        return [(row[1], row[2] or "") for row in rows]

    def table_sql(self, table: str) -> str:
        columns, rows = self.execute_query(
            "SELECT sql FROM sqlite_master WHERE name = ?", (table,)
        )
        return rows[0][0] if rows else ""

    def row_count(self, table: str) -> int:
        _, rows = self.execute_query(f"SELECT count(*) FROM {_quote_ident(table)}")
        return rows[0][0]

    def foreign_key_violations(self) -> list[tuple]:
        conn = self.connect(readonly=True)
        try:
            return conn.execute("PRAGMA foreign_key_check").fetchall()
        finally:
            conn.close()


def _quote_ident(name: str) -> str:
    return '"' + name.replace('"', '""') + '"'


def _insert_all(conn: sqlite3.Connection, table: str, columns: list[str], rows: list[tuple]):
    placeholders = ", ".join("?" for _ in columns)
    sql = f"INSERT INTO {table} ({', '.join(columns)}) VALUES ({placeholders})"
    for row in rows:
        try:
            conn.execute(sql, row)
        except sqlite3.IntegrityError as exc:
            raise ConstraintViolation(table, row, str(exc)) from exc


def build_database(
    bundles: list[FeedBundle],
    municipalities: list[MunicipalityRecord],
    path: str | Path,
) -> DatabaseHandle:
    """Create the SQLite file and load every normalized bundle into it.

    Shapes are decomposed on the way in; foreign keys are enforced during
    the load and surfaced as :class:`ConstraintViolation` with the offending
    row.  An existing file at ``path`` is replaced.
    """
    for bundle in bundles:
        if not bundle.normalized:
            raise ValueError(f"bundle {bundle.agency_tag!r} must be normalized before loading")

    db_path = Path(path)
    if db_path.exists():
        logger.warning("replacing existing database at %s", db_path)
        db_path.unlink()
    db_path.parent.mkdir(parents=True, exist_ok=True)

    conn = sqlite3.connect(db_path)
    conn.execute("PRAGMA foreign_keys = ON")
    try:
        conn.executescript(SCHEMA)
        _insert_all(
            conn,
            "municipalities",
            ["code", "name", "boundary"],
            [(m.code, m.name, json.dumps(m.boundary)) for m in municipalities],
        )
        for bundle in bundles:
            _load_bundle(conn, bundle)
        conn.commit()
    finally:
        conn.close()

    handle = DatabaseHandle(db_path)
    logger.info(
        "built database %s: %s",
        db_path,
        ", ".join(f"{t}={handle.row_count(t)}" for t in TABLES),
    )
    return handle


def _load_bundle(conn: sqlite3.Connection, bundle: FeedBundle):
    _insert_all(
        conn,
        "agency",
        ["agency_id", "agency_name", "agency_hq_city"],
        [(a.agency_id, a.agency_name, a.agency_hq_city) for a in bundle.agencies],
    )
    _insert_all(
        conn,
        "routes",
        ["agency_id", "route_id", "short_name", "long_name"],
        [(r.agency_id, r.route_id, r.short_name, r.long_name) for r in bundle.routes],
    )
    _insert_all(
        conn,
        "calendar",
        [
            "agency_id",
            "service_id",
            "monday",
            "tuesday",
            "wednesday",
            "thursday",
            "friday",
            "saturday",
            "sunday",
            "start_date",
            "end_date",
        ],
        [
            (
                c.agency_id,
                c.service_id,
                *(int(flag) for flag in c.weekday_flags),
                c.start_date.isoformat(),
                c.end_date.isoformat(),
            )
            for c in bundle.calendars
        ],
    )
    shapes, points, sequences = decompose_shapes(bundle)
    _insert_all(conn, "shapes", ["agency_id", "shape_id"], [(s.agency_id, s.shape_id) for s in shapes])
    _insert_all(
        conn,
        "shape_points",
        ["agency_id", "point_id", "lat", "lon"],
        [(p.agency_id, p.point_id, p.lat, p.lon) for p in points],
    )
    _insert_all(
        conn,
        "shape_sequences",
        ["agency_id", "shape_id", "seq", "point_id"],
        [(s.agency_id, s.shape_id, s.seq, s.point_id) for s in sequences],
    )
    _insert_all(
        conn,
        "stops",
        ["agency_id", "stop_id", "name", "lat", "lon", "municipality_code"],
        [
            (s.agency_id, s.stop_id, s.name, s.lat, s.lon, s.municipality_code or None)
            for s in bundle.stops
        ],
    )
    _insert_all(
        conn,
        "trips",
        ["agency_id", "trip_id", "route_id", "service_id", "shape_id", "direction"],
        [
            (t.agency_id, t.trip_id, t.route_id, t.service_id, t.shape_id or None, t.direction)
            for t in bundle.trips
        ],
    )
    _insert_all(
        conn,
        "stop_times",
        ["agency_id", "trip_id", "stop_id", "stop_sequence", "arrival", "departure"],
        [
            (st.agency_id, st.trip_id, st.stop_id, st.stop_sequence, st.arrival, st.departure)
            for st in bundle.stop_times
        ],
    )
