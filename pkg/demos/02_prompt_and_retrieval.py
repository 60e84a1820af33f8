"""Show the schema catalog, the rendered generation prompt and exemplar retrieval.

Run demos/01_ingest_feeds.py first to create demos/build/transit.sqlite.
"""

from pathlib import Path

from transit_agent.catalog import build_prompt_document, describe_database, render_prompt
from transit_agent.exemplars import ExemplarStore, load_exemplars
from transit_agent.ingest.database import DatabaseHandle
from transit_agent.providers import load_scripted_provider

HERE = Path(__file__).resolve().parent
FIXTURES = HERE.parent / "fixtures"
DB = HERE / "build" / "transit.sqlite"

db = DatabaseHandle(DB)
catalog = describe_database(db, FIXTURES / "annotations.txt")
print(f"catalog: {len(catalog.tables)} tables/views, {len(catalog.foreign_keys)} foreign keys")
if catalog.warnings:
    print("warnings:", *catalog.warnings, sep="\n  ")

provider = load_scripted_provider(FIXTURES / "provider.json")
store = ExemplarStore(load_exemplars(FIXTURES / "exemplars.json", catalog))

question = "Which municipalities does line 18 pass through?"
top = store.top_k(question, 3, provider)
print(f"\ntop-3 exemplars for: {question!r}")
for pair in top:
    print(f"  [{pair.id}] {pair.question}")

document = build_prompt_document(catalog, exemplars=[(p.question, p.sql) for p in top])
prompt = render_prompt(document)
print(f"\nrendered prompt: {len(prompt)} characters; first 40 lines:\n")
print("\n".join(prompt.splitlines()[:40]))

capped = render_prompt(document, char_limit=len(prompt) - 1)
print(f"\nwith a character budget one below full size, the least similar exemplar is dropped:")
print(f"  full={len(prompt)} chars, capped={len(capped)} chars")
