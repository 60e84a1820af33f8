"""Grading generated results against gold results.

Result sets are compared as sets of rows after sorting columns
alphabetically (duplicates collapse, NULLs compare equal); scalars are
compared by difference.  Every run gets exactly one category from the
taxonomy, so grading is total.
"""

from __future__ import annotations

from dataclasses import dataclass

from transit_agent.ingest.database import DatabaseHandle

CATEGORIES = (
    "syntax_error",
    "wrong_shape",
    "exact_match",
    "superset",
    "subset",
    "disjoint",
    "partial_overlap",
    "scalar_exact",
    "scalar_diff",
    "zero_result",
)

DEFAULT_SCALAR_TOLERANCE = 1e-6  # relative


@dataclass
class ComparisonOutcome:
    category: str
    fp_rate: float | None = None
    fn_rate: float | None = None
    scalar_delta: float | None = None

    def __post_init__(self):
        if self.category not in CATEGORIES:
            raise ValueError(f"unknown category {self.category!r}")
        if (self.fp_rate is not None) != (self.category == "superset"):
            raise ValueError("fp_rate is set exactly for superset outcomes")
        if (self.fn_rate is not None) != (self.category == "subset"):
            raise ValueError("fn_rate is set exactly for subset outcomes")
        for rate in (self.fp_rate, self.fn_rate):
            if rate is not None and not 0.0 <= rate <= 1.0:
                raise ValueError(f"rate out of [0, 1]: {rate}")

    def to_dict(self) -> dict:
        return {
            "category": self.category,
            "fp_rate": self.fp_rate,
            "fn_rate": self.fn_rate,
            "scalar_delta": self.scalar_delta,
        }


def _normalize(columns: list[str], rows: list) -> tuple[tuple[str, ...], frozenset]:
    names = [str(c).lower() for c in columns]
    order = sorted(range(len(names)), key=lambda i: names[i])
    sorted_names = tuple(names[i] for i in order)
    row_set = frozenset(tuple(row[i] for i in order) for row in rows)
    return sorted_names, row_set


def compare_result_sets(
    gold: tuple[list[str], list], generated: tuple[list[str], list]
) -> ComparisonOutcome:
    """Categorize a generated entity list against the gold list.

    Column names are sorted alphabetically before comparison; a mismatch in
    column count or names is wrong_shape.  fp_rate = |generated \\ gold| /
    |generated| (superset only); fn_rate = |gold \\ generated| / |gold|
    (subset only).
    """
    gold_names, gold_set = _normalize(*gold)
    generated_names, generated_set = _normalize(*generated)
    if gold_names != generated_names:
        return ComparisonOutcome("wrong_shape")
    if generated_set == gold_set:
        return ComparisonOutcome("exact_match")
    if generated_set > gold_set:
        extra = len(generated_set - gold_set)
        return ComparisonOutcome("superset", fp_rate=extra / len(generated_set))
    if generated_set < gold_set:
        missing = len(gold_set - generated_set)
        return ComparisonOutcome("subset", fn_rate=missing / len(gold_set))
    if not (generated_set & gold_set):
        return ComparisonOutcome("disjoint")
    return ComparisonOutcome("partial_overlap")


def compare_scalar(
    gold_value, generated_value, tolerance: float = DEFAULT_SCALAR_TOLERANCE
) -> ComparisonOutcome:
    """Categorize a generated scalar against the gold scalar.

    ``generated_value`` may be None (the query produced no value): that is
    graded zero_result, matching the observed failure mode of queries that
    come back empty or zero.
    """
    if generated_value is None:
        return ComparisonOutcome("zero_result")
    gold_value = float(gold_value)
    generated_value = float(generated_value)
    delta = generated_value - gold_value
    if abs(delta) <= tolerance * max(abs(gold_value), abs(generated_value), 1.0):
        return ComparisonOutcome("scalar_exact", scalar_delta=0.0)
    if generated_value == 0.0 and gold_value > 0.0:
        return ComparisonOutcome("zero_result", scalar_delta=delta)
    return ComparisonOutcome("scalar_diff", scalar_delta=delta)


def grade_run(
    run: dict,
    gold_entry: dict,
    db: DatabaseHandle,
    tolerance: float = DEFAULT_SCALAR_TOLERANCE,
) -> ComparisonOutcome:
    """Grade one run record against its gold query.

    Runs that produced no executable query or no result snapshot are
    syntax_error: the chatbot answered without data.
    """
    rows_or_value = run.get("rows_or_value")
    if not run.get("generated_sql") or run.get("error") or rows_or_value is None:
        return ComparisonOutcome("syntax_error")

    gold_columns, gold_rows = db.execute_query(gold_entry["gold_sql"])
    generated_columns = rows_or_value.get("columns", [])
    generated_rows = [tuple(row) for row in rows_or_value.get("data", [])]

    if gold_entry["expected_kind"] == "scalar":
        gold_value = gold_rows[0][0] if gold_rows and gold_rows[0] else None
        if gold_value is None:
            gold_value = 0
        if len(generated_rows) == 0:
            return ComparisonOutcome("zero_result")
        if len(generated_rows) != 1 or len(generated_rows[0]) != 1:
            return ComparisonOutcome("wrong_shape")
        value = generated_rows[0][0]
        if value is not None and not isinstance(value, (int, float)):
            return ComparisonOutcome("wrong_shape")
        return compare_scalar(gold_value, value, tolerance)

    return compare_result_sets((gold_columns, gold_rows), (generated_columns, generated_rows))


def grade_all(runstore, db: DatabaseHandle, tolerance: float = DEFAULT_SCALAR_TOLERANCE) -> int:
    """Grade every stored run; returns the number of outcomes written."""
    graded = 0
    for run in runstore.list_runs():
        gold_entry = runstore.gold_for(run["question_id"])
        if gold_entry is None:
            continue
        outcome = grade_run(run, gold_entry, db, tolerance)
        runstore.record_outcome(run["question_id"], run["attempt"], outcome.to_dict())
        graded += 1
    return graded
