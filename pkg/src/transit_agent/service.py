"""HTTP facade: chat, map retrieval, health.

Plain stdlib HTTP server: three JSON endpoints, CORS for the UI origin,
per-session serialization and a hard per-request time budget.  In-pipeline
failures return 200 with an ``error`` field so the evaluation harness can
grade them as outcomes rather than transport errors.
"""

from __future__ import annotations

import json
import logging
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

from transit_agent import __version__
from transit_agent.agent import Agent, Conversation, AgentTurn, AnswerPayload
from transit_agent.catalog import DatabaseCatalog, describe_database
from transit_agent.config import AppConfig, build_provider
from transit_agent.exemplars import ExemplarStore, load_exemplars
from transit_agent.ingest.database import DatabaseHandle
from transit_agent.providers import HttpProvider
from transit_agent.runstore import RunStore

logger = logging.getLogger(__name__)

MAX_MESSAGE_CHARS = 4000


class TransitService:
    """Owns the agent, the stores and the session locks."""

    def __init__(self, config: AppConfig):
        self.config = config
        self.db = DatabaseHandle(config.db_path)
        self.runstore = RunStore(config.runstore_path)
        self.provider = build_provider(config)
        self.startup_error: str | None = None
        try:
            self.catalog = describe_database(self.db, config.annotations_path)
        except Exception as exc:
            # degraded start: health reports the database problem, chat
            # declines queries instead of crashing the process
            logger.error("could not introspect the database: %s", exc)
            self.startup_error = str(exc)
            self.catalog = DatabaseCatalog(tables=[], foreign_keys=[], column_types={})
        try:
            pairs = load_exemplars(config.exemplars_path, self.catalog) if config.exemplars_path else []
        except Exception as exc:
            logger.error("could not load exemplars: %s", exc)
            pairs = []
        self.exemplar_store = ExemplarStore(pairs)
        self.agent = Agent(
            db=self.db,
            catalog=self.catalog,
            provider=self.provider,
            exemplar_store=self.exemplar_store,
            config=config,
            map_saver=self.runstore.save_map,
        )
        self._session_locks: dict[str, threading.Lock] = {}
        self._locks_guard = threading.Lock()

    # -- request handling -------------------------------------------------

    def chat(self, payload: dict) -> tuple[int, dict]:
        message = payload.get("message")
        if not isinstance(message, str) or not message.strip():
            return 400, {"error": {"code": "INVALID_REQUEST", "message": "message must be non-empty"}}
        if len(message) > MAX_MESSAGE_CHARS:
            return 400, {
                "error": {
                    "code": "INVALID_REQUEST",
                    "message": f"message exceeds {MAX_MESSAGE_CHARS} characters",
                }
            }
        session_id = payload.get("session_id")
        if session_id is not None and not isinstance(session_id, str):
            return 400, {"error": {"code": "INVALID_REQUEST", "message": "session_id must be a string"}}
        if isinstance(self.provider, HttpProvider):
            import os

            if not os.environ.get(self.provider.config.api_key_env):
                return 503, {
                    "error": {
                        "code": "PROVIDER_UNAVAILABLE",
                        "message": "the completion provider is not configured",
                    }
                }

        if not session_id or not self.runstore.session_exists(
            session_id, self.config.session_idle_hours
        ):
            session_id = self.runstore.create_session()

        with self._session_lock(session_id):
            conversation = self._load_conversation(session_id)
            turn = self._handle_with_budget(conversation, message.strip())
            self.runstore.append_turn(
                session_id,
                message.strip(),
                turn.answer.to_dict() if turn.answer else {},
                [t.to_dict() for t in turn.tool_trace],
            )
            self.runstore.touch_session(session_id)

        answer = turn.answer
        response = {
            "session_id": session_id,
            "answer_text": answer.text,
            "sql": answer.sql,
            "rows": answer.rows,
            "map_id": answer.map,
            "assumptions": answer.assumptions,
            "guard": answer.guard,
            "error": answer.error,
        }
        return 200, response

    def _handle_with_budget(self, conversation: Conversation, message: str) -> AgentTurn:
        """Run the turn in a worker so a stuck provider cannot hold the
        request past the configured budget."""
        result: dict = {}

        def work():
            result["turn"] = self.agent.handle_question(conversation, message)

        worker = threading.Thread(target=work, daemon=True)
        worker.start()
        worker.join(self.config.request_timeout_s)
        if "turn" not in result:
            turn = AgentTurn(question=message)
            turn.answer = AnswerPayload(
                text="The request timed out before an answer could be produced.",
                error={"code": "TIMEOUT", "message": "request exceeded the time budget"},
            )
            return turn
        return result["turn"]

    def _load_conversation(self, session_id: str) -> Conversation:
        conversation = Conversation(session_id=session_id)
        for question, answer in self.runstore.session_turns(session_id):
            turn = AgentTurn(question=question)
            turn.answer = AnswerPayload(
                text=answer.get("text", ""),
                sql=answer.get("sql"),
                rows=answer.get("rows") if answer.get("sql") else None,
                map=answer.get("map"),
                assumptions=answer.get("assumptions", []),
                guard=answer.get("guard"),
                error=answer.get("error"),
            )
            conversation.turns.append(turn)
        return conversation

    def get_map(self, map_id: str) -> tuple[int, dict]:
        document = self.runstore.get_map(map_id)
        if document is None:
            return 404, {"error": {"code": "NOT_FOUND", "message": f"unknown map id {map_id!r}"}}
        return 200, document

    def health(self) -> tuple[int, dict]:
        try:
            self.db.execute_query("SELECT 1")
            db_status = "ok"
        except Exception as exc:
            db_status = f"error: {exc}"
        if isinstance(self.provider, HttpProvider):
            import os

            provider_status = (
                "ok" if os.environ.get(self.provider.config.api_key_env) else "unconfigured"
            )
        else:
            provider_status = "ok"
        return 200, {
            "db": db_status if db_status == "ok" else "error",
            "db_detail": db_status,
            "provider": provider_status,
            "version": __version__,
        }

    def _session_lock(self, session_id: str) -> threading.Lock:
        with self._locks_guard:
            if session_id not in self._session_locks:
                self._session_locks[session_id] = threading.Lock()
            return self._session_locks[session_id]


class _Handler(BaseHTTPRequestHandler):
    service: TransitService  # set by make_server

    def log_message(self, fmt, *args):
        logger.debug("http: " + fmt, *args)

    def _send(self, status: int, payload: dict):
        body = json.dumps(payload).encode("utf-8")
        self.send_response(status)
        self.send_header("Content-Type", "application/json; charset=utf-8")
        self.send_header("Content-Length", str(len(body)))
        self.send_header("Access-Control-Allow-Origin", self.service.config.cors_origin)
        self.send_header("Access-Control-Allow-Headers", "Content-Type")
        self.send_header("Access-Control-Allow-Methods", "GET, POST, OPTIONS")
        self.end_headers()
        self.wfile.write(body)

    def do_OPTIONS(self):
        self._send(204, {})

    def do_GET(self):
        if self.path == "/api/health":
            status, payload = self.service.health()
            self._send(status, payload)
            return
        if self.path.startswith("/api/maps/"):
            map_id = self.path[len("/api/maps/") :]
            status, payload = self.service.get_map(map_id)
            self._send(status, payload)
            return
        self._send(404, {"error": {"code": "NOT_FOUND", "message": self.path}})

    def do_POST(self):
        if self.path != "/api/chat":
            self._send(404, {"error": {"code": "NOT_FOUND", "message": self.path}})
            return
        length = int(self.headers.get("Content-Length") or 0)
        raw = self.rfile.read(length) if length else b""
        try:
            payload = json.loads(raw.decode("utf-8")) if raw else {}
        except (ValueError, UnicodeDecodeError):
            self._send(400, {"error": {"code": "INVALID_REQUEST", "message": "body is not valid JSON"}})
            return
        try:
            status, response = self.service.chat(payload)
        except Exception as exc:
            logger.exception("chat handler crashed")
            status, response = 500, {"error": {"code": "INTERNAL", "message": str(exc)}}
        self._send(status, response)


def make_server(service: TransitService, host: str = "127.0.0.1", port: int = 0) -> ThreadingHTTPServer:
    """Create (but do not start) the HTTP server; port 0 picks a free port."""
    handler = type("BoundHandler", (_Handler,), {"service": service})
    server = ThreadingHTTPServer((host, port), handler)
    server.daemon_threads = True
    return server


def serve(config: AppConfig, host: str, port: int):
    service = TransitService(config)
    server = make_server(service, host, port)
    logger.info("serving on http://%s:%d", *server.server_address)
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        pass
    finally:
        server.shutdown()
