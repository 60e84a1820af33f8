"""Evaluation harness: template expansion, suite runner, grading, reports."""

from transit_agent.evaluation.templates import (
    ExpansionConfig,
    GeneratedQuestion,
    GoldEntry,
    QuestionTemplate,
    TEMPLATES,
    expand_templates,
)
from transit_agent.evaluation.grading import (
    ComparisonOutcome,
    compare_result_sets,
    compare_scalar,
    grade_run,
    grade_all,
)
from transit_agent.evaluation.runner import RunRecord, run_suite
from transit_agent.evaluation.report import MetricsSummary, render_text, summarize

__all__ = [
    "ComparisonOutcome",
    "ExpansionConfig",
    "GeneratedQuestion",
    "GoldEntry",
    "MetricsSummary",
    "QuestionTemplate",
    "RunRecord",
    "TEMPLATES",
    "compare_result_sets",
    "compare_scalar",
    "expand_templates",
    "grade_all",
    "grade_run",
    "render_text",
    "run_suite",
    "summarize",
]
