"""Agent chatbot over multi-agency GTFS transit data.

The package is organised as a pipeline:

* :mod:`transit_agent.ingest` parses GTFS feeds, normalizes keys across
  agencies, decomposes shapes and loads everything into a SQLite database.
* :mod:`transit_agent.catalog` describes that database and renders the
  tagged prompt used for SQL generation.
* :mod:`transit_agent.providers` abstracts the completion/embedding
  services (remote HTTP or a scripted offline stand-in).
* :mod:`transit_agent.exemplars` retrieves the most similar curated
  question/SQL pairs for few-shot prompting.
* :mod:`transit_agent.guard` validates and repairs generated SQL before
  anything touches the database.
* :mod:`transit_agent.agent` is the orchestration loop tying the tools
  together; :mod:`transit_agent.maps` builds route GeoJSON documents.
* :mod:`transit_agent.service` exposes the chat/map/health HTTP API and
  :mod:`transit_agent.evaluation` grades generated queries against gold
  queries.
"""

__version__ = "0.1.0"
