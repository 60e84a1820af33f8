"""Validation and repair of generated SQL before it reaches the database."""

from transit_agent.guard.rules import (
    Diagnostic,
    QueryCandidate,
    RepairRule,
    ValidationReport,
    REPAIR_RULES,
    apply_repair_rules,
    enforce_read_only,
    extract_sql,
    inject_limit,
    llm_repair,
    syntax_check,
)

__all__ = [
    "Diagnostic",
    "QueryCandidate",
    "REPAIR_RULES",
    "RepairRule",
    "ValidationReport",
    "apply_repair_rules",
    "enforce_read_only",
    "extract_sql",
    "inject_limit",
    "llm_repair",
    "syntax_check",
]
