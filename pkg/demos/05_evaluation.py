"""Run the whole evaluation loop: expand templates, ask the chatbot over
its API, grade against gold queries, and print the summary.
"""

import threading
from pathlib import Path

from transit_agent.config import AppConfig
from transit_agent.evaluation import (
    ExpansionConfig,
    expand_templates,
    grade_all,
    render_text,
    run_suite,
    summarize,
)
from transit_agent.ingest.database import DatabaseHandle
from transit_agent.runstore import RunStore
from transit_agent.service import TransitService, make_server

HERE = Path(__file__).resolve().parent
FIXTURES = HERE.parent / "fixtures"
BUILD = HERE / "build"

config = AppConfig(
    db_path=str(BUILD / "transit.sqlite"),
    runstore_path=str(BUILD / "eval_sessions.sqlite"),
    annotations_path=str(FIXTURES / "annotations.txt"),
    exemplars_path=str(FIXTURES / "exemplars.json"),
    provider={"kind": "scripted", "script": str(FIXTURES / "provider.json")},
    row_limit=None,  # grading needs full result sets
)
service = TransitService(config)
server = make_server(service)
threading.Thread(target=server.serve_forever, daemon=True).start()
base = "http://{}:{}".format(*server.server_address)

db = DatabaseHandle(BUILD / "transit.sqlite")
print("== expand the three templates with database values (seed 11) ==")
questions, gold = expand_templates(db, ExpansionConfig(seed=11))
for q in questions:
    marker = " [invalid pair]" if q.injected_invalid else ""
    print(f"  {q.id}: {q.text}{marker}")

store = RunStore(BUILD / "eval_runstore.sqlite")
store.replace_questions([q.to_dict() for q in questions], [g.to_dict() for g in gold])

print("\n== ask every question via the chat API ==")
records = run_suite(store.list_questions(), base, repeats=1, runstore=store)
failures = sum(1 for r in records if r.error)
print(f"stored {len(records)} run records ({failures} with in-pipeline failures)")

print("\n== grade against the gold queries ==")
graded = grade_all(store, db)
print(f"graded {graded} runs")

print("\n== summary ==")
print(render_text(summarize(store.list_outcomes())))

server.shutdown()
