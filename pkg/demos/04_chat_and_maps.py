"""Start the HTTP service in-process and hold a short conversation,
including a route-map request.
"""

import json
import threading
from pathlib import Path

import requests

from transit_agent.config import AppConfig
from transit_agent.service import TransitService, make_server

HERE = Path(__file__).resolve().parent
FIXTURES = HERE.parent / "fixtures"
BUILD = HERE / "build"

config = AppConfig(
    db_path=str(BUILD / "transit.sqlite"),
    runstore_path=str(BUILD / "runstore.sqlite"),
    annotations_path=str(FIXTURES / "annotations.txt"),
    exemplars_path=str(FIXTURES / "exemplars.json"),
    provider={"kind": "scripted", "script": str(FIXTURES / "provider.json")},
    row_limit=50,
)
service = TransitService(config)
server = make_server(service)
threading.Thread(target=server.serve_forever, daemon=True).start()
base = "http://{}:{}".format(*server.server_address)
print(f"service listening on {base}")
print("health:", requests.get(base + "/api/health").json())

session_id = None
for question in (
    "How many routes are managed by the agency of Bologna?",
    "Which municipalities are served by route 18?",
    "What is the average number of trips that belong to route 18 and use the stop Piazza Maggiore?",
    "Draw the map of line 18",
):
    payload = {"message": question}
    if session_id:
        payload["session_id"] = session_id
    body = requests.post(base + "/api/chat", json=payload).json()
    session_id = body["session_id"]
    print(f"\nQ: {question}")
    print(f"A: {body['answer_text']}")
    if body.get("sql"):
        print(f"   sql: {body['sql'][:100]}...")
    if body.get("rows"):
        print(f"   rows: {body['rows']['data'][:5]}")
    if body.get("map_id"):
        document = requests.get(base + f"/api/maps/{body['map_id']}").json()
        line = document["features"][0]
        stops = document["features"][1:]
        print(
            f"   map {body['map_id']}: LineString with "
            f"{len(line['geometry']['coordinates'])} points, {len(stops)} stop markers"
        )
        out = BUILD / "line18.geojson"
        out.write_text(json.dumps(document, indent=2), encoding="utf-8")
        print(f"   map document written to {out}")

server.shutdown()
print("\ndone; the conversation is persisted in", config.runstore_path)
