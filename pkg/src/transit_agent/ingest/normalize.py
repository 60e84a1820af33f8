"""Key augmentation: namespace every record of a feed under its agency tag.

A single GTFS feed describes one agency's service, so local ids are only
unique within the feed.  Normalization rewrites every record key to the
composite (agency_tag, local id), which makes records from different feeds
collide-free once merged into one database.
"""

from __future__ import annotations

import dataclasses
import logging

from transit_agent.errors import DanglingReference
from transit_agent.ingest.records import FeedBundle, RowError

logger = logging.getLogger(__name__)


def normalize_keys(bundle: FeedBundle) -> FeedBundle:
    """Return a new bundle with every key augmented by the agency tag.

    Raises :class:`DanglingReference` when a record points at a parent that
    does not exist within the feed.  Duplicate keys are dropped keep-first
    and reported through ``row_errors``.
    """
    tag = bundle.agency_tag
    out = FeedBundle(
        agency_tag=tag,
        source_path=bundle.source_path,
        row_errors=list(bundle.row_errors),
        normalized=True,
    )

    original_agency_ids = {a.agency_id for a in bundle.agencies}
    if len(bundle.agencies) > 1:
        logger.warning(
            "feed %s: agency.txt has %d rows; keeping %r as the canonical agency",
            tag,
            len(bundle.agencies),
            bundle.agencies[0].agency_name,
        )
    canonical = dataclasses.replace(bundle.agencies[0], agency_id=tag)
    out.files["agency"] = [canonical]

    def dedupe(records, key, relation):
        seen = set()
        kept = []
        for record in records:
            k = key(record)
            if k in seen:
                out.row_errors.append(RowError(relation, 0, f"duplicate key {k!r}, kept first"))
                logger.warning("feed %s: duplicate %s key %r dropped", tag, relation, k)
                continue
            seen.add(k)
            kept.append(record)
        return kept

    routes = []
    for route in bundle.routes:
        if route.agency_id and route.agency_id not in original_agency_ids:
            raise DanglingReference((tag, route.route_id), (tag, route.agency_id), "routes.agency_id")
        routes.append(dataclasses.replace(route, agency_id=tag))
    out.files["routes"] = dedupe(routes, lambda r: (r.agency_id, r.route_id), "routes")

    out.files["calendar"] = dedupe(
        [dataclasses.replace(c, agency_id=tag) for c in bundle.calendars],
        lambda c: (c.agency_id, c.service_id),
        "calendar",
    )
    out.files["stops"] = dedupe(
        [dataclasses.replace(s, agency_id=tag) for s in bundle.stops],
        lambda s: (s.agency_id, s.stop_id),
        "stops",
    )
    out.files["shapes"] = dedupe(list(bundle.shapes), lambda s: s.shape_id, "shapes")

    route_ids = {r.route_id for r in out.files["routes"]}
    service_ids = {c.service_id for c in out.files["calendar"]}
    shape_ids = {s.shape_id for s in out.files["shapes"]}

    trips = []
    for trip in bundle.trips:
        if trip.route_id not in route_ids:
            raise DanglingReference((tag, trip.trip_id), (tag, trip.route_id), "trips.route_id")
        if trip.service_id not in service_ids:
            raise DanglingReference((tag, trip.trip_id), (tag, trip.service_id), "trips.service_id")
        if trip.shape_id and trip.shape_id not in shape_ids:
            raise DanglingReference((tag, trip.trip_id), (tag, trip.shape_id), "trips.shape_id")
        trips.append(dataclasses.replace(trip, agency_id=tag))
    out.files["trips"] = dedupe(trips, lambda t: (t.agency_id, t.trip_id), "trips")

    trip_ids = {t.trip_id for t in out.files["trips"]}
    stop_ids = {s.stop_id for s in out.files["stops"]}

    stop_times = []
    for st in bundle.stop_times:
        if st.trip_id not in trip_ids:
            raise DanglingReference(
                (tag, st.trip_id, st.stop_sequence), (tag, st.trip_id), "stop_times.trip_id"
            )
        if st.stop_id not in stop_ids:
            raise DanglingReference(
                (tag, st.trip_id, st.stop_sequence), (tag, st.stop_id), "stop_times.stop_id"
            )
        stop_times.append(dataclasses.replace(st, agency_id=tag))
    out.files["stop_times"] = dedupe(
        stop_times, lambda s: (s.agency_id, s.trip_id, s.stop_sequence), "stop_times"
    )

    return out


def check_references(bundles: list[FeedBundle]) -> list[DanglingReference]:
    """Linear-scan reference check over one or more normalized bundles.

    Returns the list of dangling references found (empty when the merge is
    referentially sound).
    """
    agency_keys = set()
    route_keys = set()
    service_keys = set()
    shape_keys = set()
    stop_keys = set()
    trip_keys = set()
    for bundle in bundles:
        for a in bundle.agencies:
            agency_keys.add(a.agency_id)
        for r in bundle.routes:
            route_keys.add((r.agency_id, r.route_id))
        for c in bundle.calendars:
            service_keys.add((c.agency_id, c.service_id))
        for s in bundle.shapes:
            shape_keys.add((bundle.agency_tag, s.shape_id))
        for s in bundle.stops:
            stop_keys.add((s.agency_id, s.stop_id))
        for t in bundle.trips:
            trip_keys.add((t.agency_id, t.trip_id))

    dangling = []
    for bundle in bundles:
        for r in bundle.routes:
            if r.agency_id not in agency_keys:
                dangling.append(
                    DanglingReference((r.agency_id, r.route_id), (r.agency_id,), "routes.agency_id")
                )
        for t in bundle.trips:
            if (t.agency_id, t.route_id) not in route_keys:
                dangling.append(
                    DanglingReference(
                        (t.agency_id, t.trip_id), (t.agency_id, t.route_id), "trips.route_id"
                    )
                )
            if (t.agency_id, t.service_id) not in service_keys:
                dangling.append(
                    DanglingReference(
                        (t.agency_id, t.trip_id), (t.agency_id, t.service_id), "trips.service_id"
                    )
                )
            if t.shape_id and (t.agency_id, t.shape_id) not in shape_keys:
                dangling.append(
                    DanglingReference(
                        (t.agency_id, t.trip_id), (t.agency_id, t.shape_id), "trips.shape_id"
                    )
                )
        for st in bundle.stop_times:
            if (st.agency_id, st.trip_id) not in trip_keys:
                dangling.append(
                    DanglingReference(
                        (st.agency_id, st.trip_id, st.stop_sequence),
                        (st.agency_id, st.trip_id),
                        "stop_times.trip_id",
                    )
                )
            if (st.agency_id, st.stop_id) not in stop_keys:
                dangling.append(
                    DanglingReference(
                        (st.agency_id, st.trip_id, st.stop_sequence),
                        (st.agency_id, st.stop_id),
                        "stop_times.stop_id",
                    )
                )
    return dangling
