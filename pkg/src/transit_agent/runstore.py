"""Persistence for sessions, map documents and evaluation records.

Everything lives in one SQLite file, separate from the transit data, so
evaluation runs and chat history never touch the ingested feeds.
"""

from __future__ import annotations

import datetime as dt
import json
import sqlite3
import threading
import uuid
from pathlib import Path

SCHEMA = """
CREATE TABLE IF NOT EXISTS sessions (
    session_id TEXT PRIMARY KEY,
    created_at TEXT NOT NULL,
    last_active TEXT NOT NULL
);
CREATE TABLE IF NOT EXISTS turns (
    session_id TEXT NOT NULL,
    turn_index INTEGER NOT NULL,
    question TEXT NOT NULL,
    answer_json TEXT NOT NULL,
    trace_json TEXT NOT NULL,
    created_at TEXT NOT NULL,
    PRIMARY KEY (session_id, turn_index)
);
CREATE TABLE IF NOT EXISTS maps (
    map_id TEXT PRIMARY KEY,
    document TEXT NOT NULL,
    created_at TEXT NOT NULL
);
CREATE TABLE IF NOT EXISTS questions (
    question_id TEXT PRIMARY KEY,
    template_id TEXT NOT NULL,
    text TEXT NOT NULL,
    bindings_json TEXT NOT NULL,
    riders_json TEXT NOT NULL,
    injected_invalid INTEGER NOT NULL,
    paraphrase_seed INTEGER NOT NULL,
    answer_kind TEXT NOT NULL
);
CREATE TABLE IF NOT EXISTS gold (
    question_id TEXT PRIMARY KEY,
    gold_sql TEXT NOT NULL,
    expected_kind TEXT NOT NULL
);
CREATE TABLE IF NOT EXISTS runs (
    question_id TEXT NOT NULL,
    attempt INTEGER NOT NULL,
    generated_sql TEXT,
    guard_json TEXT,
    rows_json TEXT,
    answer_text TEXT,
    error TEXT,
    started_at TEXT NOT NULL,
    finished_at TEXT NOT NULL,
    PRIMARY KEY (question_id, attempt)
);
CREATE TABLE IF NOT EXISTS outcomes (
    question_id TEXT NOT NULL,
    attempt INTEGER NOT NULL,
    category TEXT NOT NULL,
    fp_rate REAL,
    fn_rate REAL,
    scalar_delta REAL,
    PRIMARY KEY (question_id, attempt)
);
CREATE TABLE IF NOT EXISTS meta (
    key TEXT PRIMARY KEY,
    value TEXT NOT NULL
);
"""


def _now() -> str:
    return dt.datetime.now(dt.timezone.utc).isoformat()


class RunStore:
    """Thread-safe access to the run-store database."""

    def __init__(self, path: str | Path):
        self.path = Path(path)
        self.path.parent.mkdir(parents=True, exist_ok=True)
        self._lock = threading.Lock()
        with self._connect() as conn:
            conn.executescript(SCHEMA)

    def _connect(self) -> sqlite3.Connection:
        return sqlite3.connect(self.path)

    def _execute(self, sql: str, params: tuple = ()):
        with self._lock, self._connect() as conn:
            return conn.execute(sql, params).fetchall()

    # -- sessions -----------------------------------------------------------

    def create_session(self) -> str:
        session_id = uuid.uuid4().hex
        now = _now()
        self._execute(
            "INSERT INTO sessions (session_id, created_at, last_active) VALUES (?, ?, ?)",
            (session_id, now, now),
        )
        return session_id

    def session_exists(self, session_id: str, idle_hours: float = 24.0) -> bool:
        rows = self._execute(
            "SELECT last_active FROM sessions WHERE session_id = ?", (session_id,)
        )
        if not rows:
            return False
        last_active = dt.datetime.fromisoformat(rows[0][0])
        age = dt.datetime.now(dt.timezone.utc) - last_active
        if age > dt.timedelta(hours=idle_hours):
            return False
        return True

    def touch_session(self, session_id: str):
        self._execute(
            "UPDATE sessions SET last_active = ? WHERE session_id = ?", (_now(), session_id)
        )

    def append_turn(self, session_id: str, question: str, answer: dict, trace: list[dict]):
        rows = self._execute(
            "SELECT coalesce(max(turn_index), -1) + 1 FROM turns WHERE session_id = ?",
            (session_id,),
        )
        index = rows[0][0]
        self._execute(
            "INSERT INTO turns (session_id, turn_index, question, answer_json, trace_json, created_at) "
            "VALUES (?, ?, ?, ?, ?, ?)",
            (session_id, index, question, json.dumps(answer), json.dumps(trace), _now()),
        )

    def session_turns(self, session_id: str) -> list[tuple[str, dict]]:
        rows = self._execute(
            "SELECT question, answer_json FROM turns WHERE session_id = ? ORDER BY turn_index",
            (session_id,),
        )
        return [(question, json.loads(answer)) for question, answer in rows]

    # -- map documents ---------------------------------------------------------

    def save_map(self, document: dict) -> str:
        map_id = uuid.uuid4().hex
        self._execute(
            "INSERT INTO maps (map_id, document, created_at) VALUES (?, ?, ?)",
            (map_id, json.dumps(document), _now()),
        )
        return map_id

    def get_map(self, map_id: str) -> dict | None:
        rows = self._execute("SELECT document FROM maps WHERE map_id = ?", (map_id,))
        return json.loads(rows[0][0]) if rows else None

    # -- evaluation records ------------------------------------------------------

    def replace_questions(self, questions: list[dict], gold: list[dict]):
        with self._lock, self._connect() as conn:
            conn.execute("DELETE FROM questions")
            conn.execute("DELETE FROM gold")
            for q in questions:
                conn.execute(
                    "INSERT INTO questions VALUES (?, ?, ?, ?, ?, ?, ?, ?)",
                    (
                        q["question_id"],
                        q["template_id"],
                        q["text"],
                        json.dumps(q["bindings"]),
                        json.dumps(q["riders"]),
                        int(q["injected_invalid"]),
                        q["paraphrase_seed"],
                        q["answer_kind"],
                    ),
                )
            for g in gold:
                conn.execute(
                    "INSERT INTO gold VALUES (?, ?, ?)",
                    (g["question_id"], g["gold_sql"], g["expected_kind"]),
                )

    def list_questions(self) -> list[dict]:
        rows = self._execute(
            "SELECT question_id, template_id, text, bindings_json, riders_json, "
            "injected_invalid, paraphrase_seed, answer_kind FROM questions ORDER BY question_id"
        )
        return [
            {
                "question_id": r[0],
                "template_id": r[1],
                "text": r[2],
                "bindings": json.loads(r[3]),
                "riders": json.loads(r[4]),
                "injected_invalid": bool(r[5]),
                "paraphrase_seed": r[6],
                "answer_kind": r[7],
            }
            for r in rows
        ]

    def gold_for(self, question_id: str) -> dict | None:
        rows = self._execute(
            "SELECT gold_sql, expected_kind FROM gold WHERE question_id = ?", (question_id,)
        )
        return {"gold_sql": rows[0][0], "expected_kind": rows[0][1]} if rows else None

    def clear_runs(self):
        self._execute("DELETE FROM runs")
        self._execute("DELETE FROM outcomes")

    def record_run(self, record: dict):
        self._execute(
            "INSERT OR REPLACE INTO runs VALUES (?, ?, ?, ?, ?, ?, ?, ?, ?)",
            (
                record["question_id"],
                record["attempt"],
                record.get("generated_sql"),
                json.dumps(record.get("guard_report")),
                json.dumps(record.get("rows_or_value")),
                record.get("answer_text"),
                record.get("error"),
                record["started_at"],
                record["finished_at"],
            ),
        )

    def list_runs(self) -> list[dict]:
        rows = self._execute(
            "SELECT question_id, attempt, generated_sql, guard_json, rows_json, "
            "answer_text, error, started_at, finished_at FROM runs ORDER BY question_id, attempt"
        )
        return [
            {
                "question_id": r[0],
                "attempt": r[1],
                "generated_sql": r[2],
                "guard_report": json.loads(r[3]) if r[3] else None,
                "rows_or_value": json.loads(r[4]) if r[4] else None,
                "answer_text": r[5],
                "error": r[6],
                "started_at": r[7],
                "finished_at": r[8],
            }
            for r in rows
        ]

    def record_outcome(self, question_id: str, attempt: int, outcome: dict):
        self._execute(
            "INSERT OR REPLACE INTO outcomes VALUES (?, ?, ?, ?, ?, ?)",
            (
                question_id,
                attempt,
                outcome["category"],
                outcome.get("fp_rate"),
                outcome.get("fn_rate"),
                outcome.get("scalar_delta"),
            ),
        )

    def list_outcomes(self) -> list[dict]:
        rows = self._execute(
            "SELECT o.question_id, o.attempt, o.category, o.fp_rate, o.fn_rate, o.scalar_delta, "
            "q.template_id FROM outcomes o JOIN questions q ON q.question_id = o.question_id "
            "ORDER BY o.question_id, o.attempt"
        )
        return [
            {
                "question_id": r[0],
                "attempt": r[1],
                "category": r[2],
                "fp_rate": r[3],
                "fn_rate": r[4],
                "scalar_delta": r[5],
                "template_id": r[6],
            }
            for r in rows
        ]

    # -- meta ----------------------------------------------------------------

    def set_meta(self, key: str, value: str):
        self._execute("INSERT OR REPLACE INTO meta VALUES (?, ?)", (key, value))

    def get_meta(self, key: str) -> str | None:
        rows = self._execute("SELECT value FROM meta WHERE key = ?", (key,))
        return rows[0][0] if rows else None
