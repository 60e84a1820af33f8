"""Machine-readable database description and the tagged generation prompt.

Human text (table descriptions, column comments) lives in a versioned
sidecar file so the catalog stays portable across storage engines; the DDL
and key structure are introspected from the database itself.
"""

from __future__ import annotations

import logging
import re
from dataclasses import dataclass, field
from pathlib import Path

from transit_agent.ingest.database import DatabaseHandle

logger = logging.getLogger(__name__)

# The first three rules mirror the baseline prompt rules; the rest encode
# dataset interpretation conventions the model must follow.
BASELINE_RULES = (
    "Query only relevant columns.",
    "If a query returns nothing, report the empty result.",
    "Always double check your query.",
    "When the question gives no date or date range, consider only services that are active on the current date.",
    "The trips.direction column contains only the strings 'andata' (outbound) and 'ritorno' (inbound).",
)

DEFAULT_TASK_TEXT = (
    "You are an AI assistant designed to answer questions about public "
    "transport services by writing SQL queries against the database "
    "described below. Produce a single SELECT statement and nothing else."
)

PLACEHOLDER_COMMENT = "no description available"


@dataclass
class TableDescriptor:
    name: str
    description: str
    ddl: str
    column_comments: list[tuple[str, str]]  # one entry per column, in order

    def comment_for(self, column: str) -> str:
        for name, comment in self.column_comments:
            if name == column:
                return comment
        return ""


@dataclass
class ForeignKeyDescriptor:
    child_table: str
    child_columns: list[str]
    parent_table: str
    parent_columns: list[str]

    def constraint_sql(self) -> str:
        name = f"{self.child_table}_to_{self.parent_table}"
        return (
            f"ALTER TABLE {self.child_table} ADD CONSTRAINT {name} "
            f"FOREIGN KEY ({', '.join(self.child_columns)}) "
            f"REFERENCES {self.parent_table}({', '.join(self.parent_columns)});"
        )


@dataclass
class RuleSet:
    rules: list[str]

    def __post_init__(self):
        if not self.rules:
            raise ValueError("rule set must not be empty")


@dataclass
class DatabaseCatalog:
    """Everything the guard and the prompt need to know about the schema."""

    tables: list[TableDescriptor]
    foreign_keys: list[ForeignKeyDescriptor]
    column_types: dict[str, dict[str, str]]  # table -> column -> TEXT|INTEGER|REAL|ANY
    warnings: list[str] = field(default_factory=list)

    def table_names(self) -> list[str]:
        return [t.name for t in self.tables]

    def has_table(self, name: str) -> bool:
        return name.lower() in self.column_types

    def columns_of(self, table: str) -> list[str]:
        return list(self.column_types.get(table.lower(), {}))

    def column_type(self, table: str, column: str) -> str | None:
        return self.column_types.get(table.lower(), {}).get(column.lower())


@dataclass
class PromptDocument:
    task_text: str
    tables: list[TableDescriptor]
    foreign_keys: list[ForeignKeyDescriptor]
    rules: RuleSet
    exemplars: list[tuple[str, str]] = field(default_factory=list)  # best match first


def parse_annotations(path: str | Path) -> dict[str, str]:
    """Read the sidecar file: lines of ``table: text`` or ``table.column: text``."""
    annotations: dict[str, str] = {}
    for line_no, raw in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        key, sep, text = line.partition(":")
        if not sep or not text.strip():
            logger.warning("annotations:%d: ignoring malformed line %r", line_no, raw)
            continue
        annotations[key.strip().lower()] = text.strip()
    return annotations


def _canonical_type(declared: str) -> str:
    declared = declared.upper()
    if "INT" in declared:
        return "INTEGER"
    if "CHAR" in declared or "TEXT" in declared or "CLOB" in declared:
        return "TEXT"
    if "REAL" in declared or "FLOA" in declared or "DOUB" in declared or "NUMERIC" in declared:
        return "REAL"
    return "ANY"


def describe_database(db: DatabaseHandle, annotations_path: str | Path) -> DatabaseCatalog:
    """Build descriptors for every table and view, merging sidecar comments.

    Columns without an annotation get a placeholder comment and a warning;
    annotation keys that match nothing are reported too.
    """
    annotations = parse_annotations(annotations_path)
    used_keys: set[str] = set()
    warnings: list[str] = []

    # sqlite_master order == creation order, which lists parents before
    # children and keeps rendering stable.
    _, master = db.execute_query(
        "SELECT name, type, sql FROM sqlite_master "
        "WHERE type IN ('table', 'view') AND name NOT LIKE 'sqlite_%' ORDER BY rowid"
    )

    tables: list[TableDescriptor] = []
    column_types: dict[str, dict[str, str]] = {}
    for name, _type, sql in master:
        description = annotations.get(name.lower(), "")
        if description:
            used_keys.add(name.lower())
        else:
            warnings.append(f"table {name} has no description")
            description = PLACEHOLDER_COMMENT

        comments: list[tuple[str, str]] = []
        types: dict[str, str] = {}
        for column, declared in db.table_columns(name):
            types[column.lower()] = _canonical_type(declared)
            key = f"{name.lower()}.{column.lower()}"
            comment = annotations.get(key, "")
            if comment:
                used_keys.add(key)
            else:
                warnings.append(f"column {name}.{column} has no comment")
                comment = PLACEHOLDER_COMMENT
            comments.append((column, comment))
        tables.append(
            TableDescriptor(name=name, description=description, ddl=(sql or "").strip(), column_comments=comments)
        )
        column_types[name.lower()] = types

    unknown = sorted(set(annotations) - used_keys)
    if unknown:
        warnings.append("annotations for unknown tables/columns: " + ", ".join(unknown))
    for warning in warnings:
        logger.warning("catalog: %s", warning)

    foreign_keys = _introspect_foreign_keys(db, [t.name for t in tables])
    return DatabaseCatalog(
        tables=tables, foreign_keys=foreign_keys, column_types=column_types, warnings=warnings
    )


def _introspect_foreign_keys(db: DatabaseHandle, tables: list[str]) -> list[ForeignKeyDescriptor]:
    descriptors = []
    conn = db.connect(readonly=True)
    try:
        for table in tables:
            rows = conn.execute(f'PRAGMA foreign_key_list("{table}")').fetchall()
            # rows: (id, seq, parent_table, from, to, on_update, on_delete, match)
            grouped: dict[int, ForeignKeyDescriptor] = {}
            for fk_id, _seq, parent, child_col, parent_col, *_ in rows:
                if fk_id not in grouped:
                    grouped[fk_id] = ForeignKeyDescriptor(table, [], parent, [])
                grouped[fk_id].child_columns.append(child_col)
                grouped[fk_id].parent_columns.append(parent_col or child_col)
            descriptors.extend(grouped[k] for k in sorted(grouped))
    finally:
        conn.close()
    return descriptors


def build_prompt_document(
    catalog: DatabaseCatalog,
    exemplars: list[tuple[str, str]] | None = None,
    task_text: str = DEFAULT_TASK_TEXT,
    rules: list[str] | None = None,
) -> PromptDocument:
    return PromptDocument(
        task_text=task_text,
        tables=catalog.tables,
        foreign_keys=catalog.foreign_keys,
        rules=RuleSet(list(rules) if rules is not None else list(BASELINE_RULES)),
        exemplars=list(exemplars or []),
    )


def render_prompt(doc: PromptDocument, char_limit: int | None = None) -> str:
    """Render the tagged prompt text.

    Rendering is deterministic.  When a character limit is given and the
    output exceeds it, exemplars are dropped lowest-similarity first (they
    are the only variable-size section).
    """
    exemplars = list(doc.exemplars)
    while True:
        text = _render(doc, exemplars)
        if char_limit is None or len(text) <= char_limit or not exemplars:
            if char_limit is not None and len(text) > char_limit:
                logger.warning(
                    "prompt still %d chars over the %d limit with no exemplars left",
                    len(text) - char_limit,
                    char_limit,
                )
            return text
        exemplars.pop()


def _render(doc: PromptDocument, exemplars: list[tuple[str, str]]) -> str:
    lines: list[str] = ["<prompt>"]
    lines.append(f"  <task>{doc.task_text}</task>")
    lines.append("  <database>")
    for table in doc.tables:
        lines.append("    <table>")
        lines.append(f"      <name>{table.name}</name>")
        lines.append(f"      <description>{table.description}</description>")
        lines.append(f"      <definition>{_flatten(table.ddl)}</definition>")
        lines.append("      <comments>")
        for column, comment in table.column_comments:
            lines.append(
                f"        COMMENT ON column {table.name}.{column} IS {_sql_quote(comment)};"
            )
        lines.append("      </comments>")
        lines.append("    </table>")
    lines.append("    <foreign_keys>")
    for fk in doc.foreign_keys:
        lines.append(f"      {fk.constraint_sql()}")
    lines.append("    </foreign_keys>")
    lines.append("  </database>")
    lines.append("  <rules>")
    for rule in doc.rules.rules:
        lines.append(f"    <rule>{rule}</rule>")
    lines.append("  </rules>")
    if exemplars:
        lines.append("  <examples>")
        for question, sql in exemplars:
            lines.append("    <example>")
            lines.append(f"      <question>{question}</question>")
            lines.append(f"      <sql>{_flatten(sql)}</sql>")
            lines.append("    </example>")
        lines.append("  </examples>")
    lines.append("</prompt>")
    return "\n".join(lines) + "\n"


def _flatten(sql: str) -> str:
    return re.sub(r"\s+", " ", sql.strip())


def _sql_quote(text: str) -> str:
    return "'" + text.replace("'", "''") + "'"
