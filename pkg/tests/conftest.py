import json
import threading
from pathlib import Path

import pytest

from transit_agent.catalog import describe_database
from transit_agent.cli import ingest_feeds
from transit_agent.config import AppConfig
from transit_agent.exemplars import ExemplarStore, load_exemplars
from transit_agent.ingest import load_municipalities, normalize_keys, parse_feed
from transit_agent.providers import load_scripted_provider
from transit_agent.service import TransitService, make_server

FIXTURES = Path(__file__).resolve().parent.parent / "fixtures"

FEED_DIRS = [FIXTURES / "feeds" / "brt", FIXTURES / "feeds" / "mvt"]
FEED_TAGS = ["brt", "mvt"]


@pytest.fixture(scope="session")
def fixtures_dir() -> Path:
    return FIXTURES


@pytest.fixture(scope="session")
def raw_bundles():
    return [parse_feed(directory, tag) for directory, tag in zip(FEED_DIRS, FEED_TAGS)]


@pytest.fixture(scope="session")
def bundles(raw_bundles):
    return [normalize_keys(bundle) for bundle in raw_bundles]


@pytest.fixture(scope="session")
def municipalities():
    return load_municipalities(FIXTURES / "municipalities.geojson")


@pytest.fixture(scope="session")
def transit_db(tmp_path_factory):
    db_path = tmp_path_factory.mktemp("db") / "transit.sqlite"
    return ingest_feeds(FEED_DIRS, FEED_TAGS, FIXTURES / "municipalities.geojson", db_path)


@pytest.fixture(scope="session")
def catalog(transit_db):
    return describe_database(transit_db, FIXTURES / "annotations.txt")


@pytest.fixture(scope="session")
def scripted_provider():
    return load_scripted_provider(FIXTURES / "provider.json")


@pytest.fixture(scope="session")
def exemplar_store(catalog):
    return ExemplarStore(load_exemplars(FIXTURES / "exemplars.json", catalog))


@pytest.fixture(scope="session")
def app_config(transit_db, tmp_path_factory):
    return AppConfig(
        db_path=str(transit_db.path),
        runstore_path=str(tmp_path_factory.mktemp("runstore") / "runstore.sqlite"),
        annotations_path=str(FIXTURES / "annotations.txt"),
        exemplars_path=str(FIXTURES / "exemplars.json"),
        provider={"kind": "scripted", "script": str(FIXTURES / "provider.json")},
        row_limit=None,  # evaluation needs full result sets
    )


@pytest.fixture(scope="session")
def service(app_config):
    return TransitService(app_config)


@pytest.fixture(scope="session")
def api_endpoint(service):
    server = make_server(service)
    thread = threading.Thread(target=server.serve_forever, daemon=True)
    thread.start()
    host, port = server.server_address
    yield f"http://{host}:{port}"
    server.shutdown()


@pytest.fixture(scope="session")
def map_classifier_cases():
    return json.loads((FIXTURES / "map_classifier_cases.json").read_text(encoding="utf-8"))


def write_minimal_feed(directory: Path, **overrides):
    """A tiny self-consistent feed for parse-level tests."""
    files = {
        "agency.txt": "agency_id,agency_name,agency_hq_city\nA1,Test Agency,Testville\n",
        "routes.txt": (
            "route_id,agency_id,route_short_name,route_long_name\n"
            "R1,A1,1,One\nR2,A1,2,Two\nR3,A1,3,Three\n"
        ),
        "calendar.txt": (
            "service_id,monday,tuesday,wednesday,thursday,friday,saturday,sunday,start_date,end_date\n"
            "S,1,1,1,1,1,0,0,20250101,20251231\n"
        ),
        "trips.txt": (
            "route_id,service_id,trip_id,shape_id,direction_id\n"
            "R1,S,T1,SH1,0\nR2,S,T2,,1\n"
        ),
        "stops.txt": (
            "stop_id,stop_name,stop_lat,stop_lon\n"
            "P1,First,44.0,11.0\nP2,Second,44.1,11.1\n"
        ),
        "stop_times.txt": (
            "trip_id,arrival_time,departure_time,stop_id,stop_sequence\n"
            "T1,08:00:00,08:01:00,P1,1\nT1,08:10:00,08:11:00,P2,2\n"
            "T2,09:00:00,09:01:00,P2,1\nT2,09:10:00,09:11:00,P1,2\n"
        ),
        "shapes.txt": (
            "shape_id,shape_pt_lat,shape_pt_lon,shape_pt_sequence\n"
            "SH1,44.0,11.0,1\nSH1,44.05,11.05,2\nSH1,44.1,11.1,3\n"
        ),
    }
    files.update(overrides)
    directory.mkdir(parents=True, exist_ok=True)
    for name, content in files.items():
        if content is None:
            continue
        (directory / name).write_text(content, encoding="utf-8")
    return directory
