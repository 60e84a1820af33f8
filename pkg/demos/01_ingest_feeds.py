"""Walk through feed ingestion: parse, normalize, decompose, enrich, load.

Builds demos/build/transit.sqlite from the two bundled fixture feeds.
"""

import logging
from pathlib import Path

from transit_agent.ingest import (
    assign_stop_municipality,
    build_database,
    decompose_shapes,
    load_municipalities,
    normalize_keys,
    parse_feed,
    reconstruct_shape,
)

logging.basicConfig(level=logging.INFO, format="%(levelname)s %(message)s")

HERE = Path(__file__).resolve().parent
FIXTURES = HERE.parent / "fixtures"
BUILD = HERE / "build"
BUILD.mkdir(exist_ok=True)

print("== 1. parse the raw GTFS files ==")
bundles = []
for tag in ("brt", "mvt"):
    bundle = parse_feed(FIXTURES / "feeds" / tag, tag)
    print(
        f"feed {tag}: {len(bundle.routes)} routes, {len(bundle.trips)} trips, "
        f"{len(bundle.stops)} stops, {len(bundle.stop_times)} stop_times, "
        f"{len(bundle.shapes)} shapes, {len(bundle.row_errors)} skipped rows"
    )
    bundles.append(bundle)

print("\n== 2. normalize keys: every record namespaced under its agency tag ==")
bundles = [normalize_keys(b) for b in bundles]
route_18 = [(r.agency_id, r.route_id) for b in bundles for r in b.routes if r.route_id == "18"]
print(f"route id '18' appears in both feeds and stays distinct: {route_18}")

print("\n== 3. decompose shapes into shape / point / sequence relations ==")
for bundle in bundles:
    shapes, points, sequences = decompose_shapes(bundle)
    print(
        f"feed {bundle.agency_tag}: {len(shapes)} shapes, {len(points)} unique points, "
        f"{len(sequences)} sequence rows"
    )
    first = shapes[0].shape_id
    rebuilt = reconstruct_shape(first, points, sequences)
    assert rebuilt == bundle.shapes[0].points
    print(f"  round-trip check on {first}: {len(rebuilt)} points reconstructed exactly")

print("\n== 4. enrich stops with their municipality ==")
municipalities = load_municipalities(FIXTURES / "municipalities.geojson")
print(f"loaded {len(municipalities)} municipality boundaries")
for bundle in bundles:
    bundle.files["stops"] = assign_stop_municipality(bundle.stops, municipalities)
    assigned = sum(1 for s in bundle.stops if s.municipality_code)
    print(f"feed {bundle.agency_tag}: {assigned}/{len(bundle.stops)} stops assigned")

print("\n== 5. load everything into one SQLite database ==")
db = build_database(bundles, municipalities, BUILD / "transit.sqlite")
for table in ("agency", "routes", "trips", "stops", "stop_times", "shape_points", "municipalities"):
    print(f"  {table}: {db.row_count(table)} rows")
print(f"foreign-key violations: {len(db.foreign_key_violations())}")

print("\n== 6. the route-geometry view the map tool reads ==")
columns, rows = db.execute_query(
    "SELECT kind, count(*) FROM route_geometry WHERE agency_id = 'brt' AND route_id = '11' GROUP BY kind"
)
print(f"route brt/11 geometry rows by kind: {dict(rows)}")
print(f"\ndatabase ready at {BUILD / 'transit.sqlite'}")
