"""Exercise the SQL guard: read-only enforcement, diagnostics, repairs, limits."""

from pathlib import Path

from transit_agent.catalog import describe_database
from transit_agent.guard import (
    QueryCandidate,
    apply_repair_rules,
    enforce_read_only,
    inject_limit,
    syntax_check,
)
from transit_agent.ingest.database import DatabaseHandle

HERE = Path(__file__).resolve().parent
FIXTURES = HERE.parent / "fixtures"

db = DatabaseHandle(HERE / "build" / "transit.sqlite")
catalog = describe_database(db, FIXTURES / "annotations.txt")

print("== read-only enforcement ==")
for sql in (
    "select count(*) from routes",
    "with t as (select 1) select * from t",
    "DROP TABLE trips",
    "select 1; delete from routes",
):
    report = enforce_read_only(QueryCandidate(sql))
    codes = ", ".join(d.code for d in report.diagnostics) or "-"
    print(f"  {report.verdict:8s} [{codes}] {sql}")

print("\n== syntax check against the catalog ==")
for sql in (
    "select count(distinct r.route_id) from routes r join agency a using (agency_id) "
    "where upper(a.agency_hq_city) like upper('%Bologna%')",
    "select r.route_id from routes where route_id = '18'",
    "select routes.color from routes",
    "select trip_id from trips where direction = 0",
    "select median(arrival) from stop_times",
):
    report = syntax_check(QueryCandidate(sql), catalog, db)
    codes = ", ".join(f"{d.code}" for d in report.diagnostics) or "-"
    print(f"  {report.verdict:8s} [{codes}] {sql[:70]}")

print("\n== deterministic repair of direction literals ==")
candidate = QueryCandidate("select trip_id from trips where direction = 0 or direction in (0, 1)")
repaired, report = apply_repair_rules(candidate)
print(f"  before: {candidate.sql}")
print(f"  after:  {repaired.sql}")
print(f"  applied rules: {report.applied_rules}")
again, second = apply_repair_rules(repaired)
print(f"  applying twice changes nothing: {again.sql == repaired.sql}")

print("\n== row-limit injection for chat answers ==")
for sql in (
    "select route_id from routes",
    "select route_id from routes limit 5",
    "select count(*) from trips",
):
    print(f"  {inject_limit(QueryCandidate(sql), 50).sql}")
