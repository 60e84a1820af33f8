"""Decompose GTFS shapes into shape / point / sequence relations.

A trip only carries a shape id, while shapes.txt keys rows by (shape id,
point position).  Splitting the file into three relations gives each trip a
single parent row and lets identical coordinate pairs be stored once.
"""

from __future__ import annotations

from transit_agent.ingest.records import (
    FeedBundle,
    ShapePointRecord,
    ShapeRecord,
    ShapeSequenceRecord,
)


def decompose_shapes(
    bundle: FeedBundle,
) -> tuple[list[ShapeRecord], list[ShapePointRecord], list[ShapeSequenceRecord]]:
    """Split the bundle's raw shapes into three relations.

    Coordinate pairs are deduplicated into points per agency; the sequence
    relation preserves the source ordering with a contiguous 1..n run per
    shape.  An empty shapes file yields three empty relations.
    """
    tag = bundle.agency_tag
    shapes: list[ShapeRecord] = []
    points: list[ShapePointRecord] = []
    sequences: list[ShapeSequenceRecord] = []
    point_ids: dict[tuple[float, float], int] = {}

    for raw in bundle.shapes:
        shapes.append(ShapeRecord(agency_id=tag, shape_id=raw.shape_id))
        for seq, (lat, lon) in enumerate(raw.points, start=1):
            point_id = point_ids.get((lat, lon))
            if point_id is None:
                point_id = len(point_ids) + 1
                point_ids[(lat, lon)] = point_id
                points.append(ShapePointRecord(agency_id=tag, point_id=point_id, lat=lat, lon=lon))
            sequences.append(
                ShapeSequenceRecord(agency_id=tag, shape_id=raw.shape_id, seq=seq, point_id=point_id)
            )
    return shapes, points, sequences


def reconstruct_shape(
    shape_id: str,
    points: list[ShapePointRecord],
    sequences: list[ShapeSequenceRecord],
) -> list[tuple[float, float]]:
    """Rebuild a shape's ordered (lat, lon) list from the decomposed relations."""
    by_id = {p.point_id: (p.lat, p.lon) for p in points}
    rows = sorted((s.seq, s.point_id) for s in sequences if s.shape_id == shape_id)
    return [by_id[point_id] for _, point_id in rows]
