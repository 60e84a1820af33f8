"""The orchestration loop: question in, answered turn out.

Every question runs the same tool pipeline: retrieve exemplars, render the
prompt, generate SQL, guard/repair it, execute it, synthesize an answer
(and build a map when the question asks for one).  No exception escapes
:meth:`Agent.handle_question`; failures become error answers with the full
tool trace preserved.
"""

from __future__ import annotations

import datetime as dt
import json
import logging
import re
import time
import uuid
from dataclasses import dataclass, field

from transit_agent.catalog import DatabaseCatalog, build_prompt_document, render_prompt
from transit_agent.config import AppConfig
from transit_agent.errors import (
    EmptyStore,
    ProviderUnavailable,
    QueryTimeout,
    RepairFailed,
    TransitAgentError,
)
from transit_agent.exemplars import ExemplarStore
from transit_agent.guard import (
    QueryCandidate,
    ValidationReport,
    apply_repair_rules,
    enforce_read_only,
    extract_sql,
    inject_limit,
    llm_repair,
    syntax_check,
)
from transit_agent.ingest.database import DatabaseHandle
from transit_agent.maps import fetch_route_geometry, to_geo_document
from transit_agent.providers import CompletionRequest, Provider

logger = logging.getLogger(__name__)

TOOL_NAMES = ("retrieve_examples", "generate_sql", "guard", "execute_sql", "build_map", "synthesize")

CANNOT_ANSWER_TEXT = (
    "I could not produce a valid query for this question, so I do not know the answer."
)

_MAP_KEYWORDS = re.compile(r"\b(map|mappa|draw|disegna|plot)\b", re.IGNORECASE)

_DATE_HINTS = re.compile(
    r"\b(\d{4}-\d{2}-\d{2}|today|tomorrow|yesterday|from .* to |between .* and \d{4})\b",
    re.IGNORECASE,
)

CURRENT_DATE_ASSUMPTION = (
    "Only services active on the current date are considered, "
    "because the question gives no date range."
)


@dataclass
class ToolInvocation:
    tool: str
    input_digest: str
    output_digest: str = ""
    duration_ms: float = 0.0
    outcome: str = "ok"  # ok | error

    def __post_init__(self):
        if self.tool not in TOOL_NAMES:
            raise ValueError(f"unknown tool {self.tool!r}")
        if self.duration_ms < 0:
            raise ValueError("duration must be >= 0")

    def to_dict(self) -> dict:
        return {
            "tool": self.tool,
            "input_digest": self.input_digest,
            "output_digest": self.output_digest,
            "duration_ms": self.duration_ms,
            "outcome": self.outcome,
        }


@dataclass
class AnswerPayload:
    text: str
    sql: str | None = None
    rows: dict | None = None  # {"columns": [...], "data": [[...], ...]}
    map: str | None = None  # map document reference (id)
    assumptions: list[str] = field(default_factory=list)
    guard: dict | None = None  # serialized ValidationReport
    error: dict | None = None  # {"code", "message"}

    def __post_init__(self):
        if self.rows is not None and self.sql is None:
            raise ValueError("rows require the final sql to be present")

    def to_dict(self) -> dict:
        return {
            "text": self.text,
            "sql": self.sql,
            "rows": self.rows,
            "map": self.map,
            "assumptions": list(self.assumptions),
            "guard": self.guard,
            "error": self.error,
        }


@dataclass
class AgentTurn:
    question: str
    tool_trace: list[ToolInvocation] = field(default_factory=list)
    answer: AnswerPayload | None = None


@dataclass
class Conversation:
    session_id: str = field(default_factory=lambda: uuid.uuid4().hex)
    turns: list[AgentTurn] = field(default_factory=list)
    created_at: str = field(default_factory=lambda: dt.datetime.now(dt.timezone.utc).isoformat())


def classify_map_request(question: str, provider: Provider | None = None, use_provider: bool = False) -> bool:
    """True when the question asks to draw/show a route map.

    Keyword matching decides first; an optional provider classification
    backs it up for keyword-free phrasings (scripted in tests).
    """
    if _MAP_KEYWORDS.search(question):
        return True
    if use_provider and provider is not None:
        try:
            reply = provider.complete(
                CompletionRequest(
                    system_prompt="",
                    messages=[
                        (
                            "user",
                            "Does the following question ask to draw or display a route on a map? "
                            f"Answer yes or no.\nQuestion: {question}",
                        )
                    ],
                )
            )
            return reply.strip().lower().startswith("y")
        except ProviderUnavailable:
            return False
    return False


def _digest(value, limit: int = 160) -> str:
    text = value if isinstance(value, str) else json.dumps(value, default=str, sort_keys=True)
    text = " ".join(text.split())
    return text if len(text) <= limit else text[: limit - 3] + "..."


class Agent:
    """Single-agent pipeline over one transit database."""

    def __init__(
        self,
        db: DatabaseHandle,
        catalog: DatabaseCatalog,
        provider: Provider,
        exemplar_store: ExemplarStore | None = None,
        config: AppConfig | None = None,
        map_saver=None,  # callable(document: dict) -> map_id
    ):
        self.db = db
        self.catalog = catalog
        self.provider = provider
        self.exemplar_store = exemplar_store
        self.config = config or AppConfig()
        self.map_saver = map_saver

    # -- pipeline ----------------------------------------------------------

    def handle_question(self, conversation: Conversation, question: str) -> AgentTurn:
        turn = AgentTurn(question=question)
        trace = turn.tool_trace
        assumptions = self._assumptions(question)
        map_request = classify_map_request(
            question, self.provider, self.config.classify_with_provider
        )

        exemplars = self._invoke(
            trace, "retrieve_examples", question, self._retrieve_exemplars, question
        )
        if exemplars is None:
            exemplars = []

        sql_text = self._invoke(
            trace, "generate_sql", question, self._generate_sql, conversation, question, exemplars
        )
        if not sql_text:
            turn.answer = AnswerPayload(
                text=CANNOT_ANSWER_TEXT,
                assumptions=assumptions,
                error={"code": "GENERATION_FAILED", "message": "the model produced no SQL"},
            )
            conversation.turns.append(turn)
            return turn

        candidate, guard_report = self._invoke(
            trace, "guard", sql_text, self._guard, sql_text
        ) or (None, None)
        if candidate is None:
            report_dict = guard_report.to_dict() if guard_report else None
            turn.answer = AnswerPayload(
                text=CANNOT_ANSWER_TEXT,
                sql=sql_text,
                assumptions=assumptions,
                guard=report_dict,
                error={"code": "GUARD_REJECTED", "message": "the generated query is invalid"},
            )
            conversation.turns.append(turn)
            return turn

        if self.config.row_limit:
            candidate = inject_limit(candidate, self.config.row_limit)

        executed = self._invoke(trace, "execute_sql", candidate.sql, self._execute, candidate.sql)
        if executed is None:
            turn.answer = AnswerPayload(
                text=CANNOT_ANSWER_TEXT,
                sql=candidate.sql,
                assumptions=assumptions,
                guard=guard_report.to_dict(),
                error={"code": "EXECUTION_FAILED", "message": "the query failed to execute"},
            )
            conversation.turns.append(turn)
            return turn
        columns, rows = executed
        rows_payload = {"columns": columns, "data": [list(row) for row in rows]}

        map_id = None
        if map_request:
            map_id = self._invoke(trace, "build_map", candidate.sql, self._build_map, columns, rows)

        text = self._invoke(
            trace,
            "synthesize",
            question,
            self._synthesize,
            question,
            candidate.sql,
            columns,
            rows,
        )
        if text is None:
            text = self.fallback_answer(columns, rows)

        if map_request and map_id is None:
            text += " (I could not build the requested map from the query results.)"

        turn.answer = AnswerPayload(
            text=text,
            sql=candidate.sql,
            rows=rows_payload,
            map=map_id,
            assumptions=assumptions,
            guard=guard_report.to_dict(),
        )
        conversation.turns.append(turn)
        return turn

    # -- tool wrappers -------------------------------------------------------

    def _invoke(self, trace: list[ToolInvocation], tool: str, input_value, fn, *args):
        started = time.monotonic()
        try:
            result = fn(*args)
        except TransitAgentError as exc:
            trace.append(
                ToolInvocation(
                    tool=tool,
                    input_digest=_digest(input_value),
                    output_digest=f"{type(exc).__name__}: {exc}",
                    duration_ms=(time.monotonic() - started) * 1000.0,
                    outcome="error",
                )
            )
            logger.warning("tool %s failed: %s", tool, exc)
            return None
        except Exception as exc:  # totality: nothing escapes the pipeline
            trace.append(
                ToolInvocation(
                    tool=tool,
                    input_digest=_digest(input_value),
                    output_digest=f"{type(exc).__name__}: {exc}",
                    duration_ms=(time.monotonic() - started) * 1000.0,
                    outcome="error",
                )
            )
            logger.exception("tool %s crashed", tool)
            return None
        trace.append(
            ToolInvocation(
                tool=tool,
                input_digest=_digest(input_value),
                output_digest=_digest(result),
                duration_ms=(time.monotonic() - started) * 1000.0,
                outcome="ok",
            )
        )
        return result

    def _retrieve_exemplars(self, question: str) -> list[tuple[str, str]]:
        if self.exemplar_store is None or not self.exemplar_store.pairs:
            return []
        try:
            pairs = self.exemplar_store.top_k(question, self.config.retrieval_k, self.provider)
        except EmptyStore:
            return []
        return [(pair.question, pair.sql) for pair in pairs]

    def _generate_sql(
        self, conversation: Conversation, question: str, exemplars: list[tuple[str, str]]
    ) -> str:
        document = build_prompt_document(self.catalog, exemplars=exemplars)
        system_prompt = render_prompt(document, char_limit=self.config.prompt_char_limit)
        messages: list[tuple[str, str]] = []
        for turn in conversation.turns[-self.config.memory_turns :]:
            messages.append(("user", turn.question))
            if turn.answer is not None:
                messages.append(("assistant", turn.answer.text))
        messages.append(("user", question))
        reply = self.provider.complete(
            CompletionRequest(system_prompt=system_prompt, messages=messages)
        )
        return extract_sql(reply)

    def _guard(self, sql_text: str) -> tuple[QueryCandidate | None, ValidationReport]:
        """Read-only check, deterministic repairs, syntax check, model repair."""
        candidate = QueryCandidate(sql=sql_text, origin="generated")
        read_only = enforce_read_only(candidate)
        if read_only.verdict == "rejected":
            return None, read_only

        candidate, repair_report = apply_repair_rules(candidate, self.config.repair_rules)
        syntax = syntax_check(candidate, self.catalog, self.db)
        if syntax.verdict == "rejected":
            try:
                candidate = llm_repair(
                    candidate,
                    syntax.diagnostics,
                    self.provider,
                    self.catalog,
                    self.db,
                    rounds=self.config.repair_rounds,
                )
            except RepairFailed as exc:
                merged = ValidationReport(
                    "rejected",
                    applied_rules=repair_report.applied_rules,
                    diagnostics=syntax.diagnostics,
                )
                logger.info("repair failed: %s", exc)
                return None, merged
            syntax = syntax_check(candidate, self.catalog, self.db)
            if syntax.verdict == "rejected":
                return None, syntax
            return candidate, ValidationReport(
                "repaired",
                applied_rules=repair_report.applied_rules + ["LLM_REPAIR"],
                diagnostics=syntax.diagnostics,
            )

        if repair_report.verdict == "repaired":
            return candidate, ValidationReport(
                "repaired",
                applied_rules=repair_report.applied_rules,
                diagnostics=repair_report.diagnostics + syntax.diagnostics,
            )
        return candidate, ValidationReport("accepted", diagnostics=syntax.diagnostics)

    def _execute(self, sql: str) -> tuple[list[str], list[tuple]]:
        try:
            return self.db.execute_query(sql, timeout_s=self.config.query_timeout_s)
        except QueryTimeout:
            raise
        except Exception as exc:
            raise TransitAgentError(f"execution failed: {exc}") from exc

    def _build_map(self, columns: list[str], rows: list[tuple]) -> str | None:
        """Build and store a map document for the route the query resolved.

        The generated SQL for a map question is expected to return
        agency_id and route_id columns (the exemplars steer it that way).
        """
        lowered = [c.lower() for c in columns]
        if "agency_id" not in lowered or "route_id" not in lowered or not rows:
            raise TransitAgentError("query result does not identify a route to draw")
        agency_id = rows[0][lowered.index("agency_id")]
        route_id = rows[0][lowered.index("route_id")]
        direction = None
        if "direction" in lowered:
            direction = rows[0][lowered.index("direction")]
        geometry = fetch_route_geometry(self.db, (str(agency_id), str(route_id)), direction)
        document = to_geo_document(geometry)
        if self.map_saver is None:
            raise TransitAgentError("no map store configured")
        return self.map_saver(document)

    def _synthesize(self, question: str, sql: str, columns: list[str], rows: list[tuple]) -> str:
        try:
            return self.synthesize_answer(question, sql, columns, rows)
        except ProviderUnavailable:
            return self.fallback_answer(columns, rows)

    # -- answer synthesis ------------------------------------------------------

    def synthesize_answer(
        self, question: str, sql: str, columns: list[str], rows: list[tuple]
    ) -> str:
        """Provider-backed answer generation from the executed rows.

        Raises :class:`ProviderUnavailable` so callers can fall back to the
        deterministic renderer.
        """
        capped = rows[: self.config.synthesis_row_cap]
        if len(rows) > len(capped):
            rows_text = (
                json.dumps([list(r) for r in capped], default=str)
                + f" ... ({len(rows)} rows in total)"
            )
        else:
            rows_text = json.dumps([list(r) for r in capped], default=str)
        prompt = (
            "Answer the user's question using only the data below. "
            "If the rows are empty, say that no results were found.\n"
            f"Question: {question}\n"
            f"SQL: {sql}\n"
            f"Columns: {json.dumps(columns)}\n"
            f"Rows: {rows_text}"
        )
        return self.provider.complete(
            CompletionRequest(system_prompt="", messages=[("user", prompt)])
        ).strip()

    @staticmethod
    def fallback_answer(columns: list[str], rows: list[tuple]) -> str:
        """Deterministic rendering used when the provider is down.

        Every value quoted in the text appears verbatim in the rows.
        """
        if not rows:
            return "The query returned no results."
        if len(rows) == 1 and len(rows[0]) == 1:
            return f"The answer is {rows[0][0]}."
        shown = rows[:10]
        lines = [f"The query returned {len(rows)} rows."]
        for row in shown:
            lines.append("; ".join(f"{col}={val}" for col, val in zip(columns, row)))
        if len(rows) > len(shown):
            lines.append(f"... and {len(rows) - len(shown)} more rows.")
        return "\n".join(lines)

    @staticmethod
    def _assumptions(question: str) -> list[str]:
        if _DATE_HINTS.search(question):
            return []
        return [CURRENT_DATE_ASSUMPTION]
