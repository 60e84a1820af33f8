"""Drive the chat API with the expanded question set and store every run."""

from __future__ import annotations

import datetime as dt
import json
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import requests

from transit_agent.errors import EndpointUnreachable

logger = logging.getLogger(__name__)

DEFAULT_REQUEST_TIMEOUT = 75.0


@dataclass
class RunRecord:
    question_id: str
    attempt: int
    generated_sql: str | None
    guard_report: dict | None
    rows_or_value: dict | None
    answer_text: str
    error: str | None
    started_at: str
    finished_at: str

    def to_dict(self) -> dict:
        return {
            "question_id": self.question_id,
            "attempt": self.attempt,
            "generated_sql": self.generated_sql,
            "guard_report": self.guard_report,
            "rows_or_value": self.rows_or_value,
            "answer_text": self.answer_text,
            "error": self.error,
            "started_at": self.started_at,
            "finished_at": self.finished_at,
        }

    def comparable_json(self) -> str:
        """Canonical JSON of the record without its timestamps."""
        data = self.to_dict()
        data.pop("started_at")
        data.pop("finished_at")
        return json.dumps(data, sort_keys=True)


def _now() -> str:
    return dt.datetime.now(dt.timezone.utc).isoformat()


def _ask(endpoint: str, question: dict, attempt: int, timeout_s: float) -> RunRecord:
    started = _now()
    # Every evaluation question runs in a fresh session: no memory bleed
    # between questions, repeats stay independent.
    try:
        response = requests.post(
            endpoint.rstrip("/") + "/api/chat",
            json={"message": question["text"]},
            timeout=timeout_s,
        )
    except requests.Timeout:
        # a slow answer is a recordable failure, not a dead endpoint
        return RunRecord(
            question_id=question["question_id"],
            attempt=attempt,
            generated_sql=None,
            guard_report=None,
            rows_or_value=None,
            answer_text="",
            error="request timed out",
            started_at=started,
            finished_at=_now(),
        )
    finished = _now()
    if response.status_code != 200:
        return RunRecord(
            question_id=question["question_id"],
            attempt=attempt,
            generated_sql=None,
            guard_report=None,
            rows_or_value=None,
            answer_text="",
            error=f"HTTP {response.status_code}",
            started_at=started,
            finished_at=finished,
        )
    body = response.json()
    error = body.get("error")
    return RunRecord(
        question_id=question["question_id"],
        attempt=attempt,
        generated_sql=body.get("sql"),
        guard_report=body.get("guard"),
        rows_or_value=body.get("rows"),
        answer_text=body.get("answer_text", ""),
        error=json.dumps(error, sort_keys=True) if error else None,
        started_at=started,
        finished_at=finished,
    )


def run_suite(
    questions: list[dict],
    api_endpoint: str,
    repeats: int = 1,
    runstore=None,
    timeout_s: float = DEFAULT_REQUEST_TIMEOUT,
    parallelism: int = 1,
) -> list[RunRecord]:
    """Ask every question repeatedly against the chat API.

    ``repeats`` is the uniform repeat count; a question dict may carry its
    own ``repeats`` key to override it, so uneven repeat patterns (the
    per-question distribution is plain configuration) are expressible.
    Records are persisted as they arrive (failures included, never
    dropped).  If the endpoint becomes unreachable the suite aborts with
    :class:`EndpointUnreachable` after flagging the stored results partial.
    """
    if repeats <= 0:
        raise ValueError("repeats must be positive")
    records: list[RunRecord] = []
    if runstore is not None:
        runstore.set_meta("suite_partial", "false")

    max_repeats = max(
        [int(q.get("repeats", repeats)) for q in questions] + [repeats]
    )
    try:
        for attempt in range(1, max_repeats + 1):
            due = [q for q in questions if attempt <= int(q.get("repeats", repeats))]
            if not due:
                continue
            if parallelism > 1:
                with ThreadPoolExecutor(max_workers=parallelism) as pool:
                    batch = list(
                        pool.map(lambda q: _ask(api_endpoint, q, attempt, timeout_s), due)
                    )
            else:
                batch = [_ask(api_endpoint, q, attempt, timeout_s) for q in due]
            for record in batch:
                records.append(record)
                if runstore is not None:
                    runstore.record_run(record.to_dict())
    except requests.ConnectionError as exc:
        if runstore is not None:
            runstore.set_meta("suite_partial", "true")
        raise EndpointUnreachable(
            f"chat API unreachable after {len(records)} records: {exc}"
        ) from exc

    logger.info(
        "suite complete: %d records (%d questions, up to %d repeats)",
        len(records),
        len(questions),
        max_repeats,
    )
    return records
