"""Guard operations: read-only enforcement, syntax checking, repairs.

Deterministic rewrites run before the (optional) model-assisted repair, so
the cheap reproducible fixes are never delegated to the provider.
"""

from __future__ import annotations

import logging
import re
from dataclasses import dataclass, field

from transit_agent.errors import ProviderUnavailable, RepairFailed
from transit_agent.guard.analysis import (
    AGGREGATE_FUNCTIONS,
    Diagnostic,
    analyze_statement,
)
from transit_agent.guard.tokens import (
    IDENT,
    NUMBER,
    OP,
    PUNCT,
    Token,
    TokenizeError,
    matching_paren,
    split_statements,
    tokenize,
)

logger = logging.getLogger(__name__)

ORIGINS = ("generated", "repaired", "gold")

# Statement verbs that can change state; any appearance outside a string
# literal rejects the query.
MUTATING_KEYWORDS = frozenset(
    """
    INSERT UPDATE DELETE DROP CREATE ALTER TRUNCATE REPLACE MERGE GRANT
    REVOKE ATTACH DETACH PRAGMA VACUUM REINDEX BEGIN COMMIT ROLLBACK
    SAVEPOINT RELEASE EXEC EXECUTE CALL COPY LOAD SET INTO UPSERT
    """.split()
)

_STATEMENT_VERBS = frozenset({"SELECT", "VALUES"} | MUTATING_KEYWORDS)


@dataclass
class QueryCandidate:
    sql: str
    origin: str = "generated"

    def __post_init__(self):
        if not self.sql or not self.sql.strip():
            raise ValueError("query text must be non-empty")
        if self.origin not in ORIGINS:
            raise ValueError(f"origin must be one of {ORIGINS}")


@dataclass
class ValidationReport:
    verdict: str  # accepted | repaired | rejected
    applied_rules: list[str] = field(default_factory=list)
    diagnostics: list[Diagnostic] = field(default_factory=list)

    def __post_init__(self):
        if self.verdict == "repaired" and not self.applied_rules:
            raise ValueError("repaired verdict requires applied rules")
        if self.verdict == "rejected" and not self.diagnostics:
            raise ValueError("rejected verdict requires diagnostics")

    @property
    def ok(self) -> bool:
        return self.verdict != "rejected"

    def to_dict(self) -> dict:
        return {
            "verdict": self.verdict,
            "applied_rules": list(self.applied_rules),
            "diagnostics": [d.to_dict() for d in self.diagnostics],
        }


def _tokenize_single(sql: str) -> tuple[list[Token] | None, list[Diagnostic]]:
    try:
        tokens = tokenize(sql)
    except TokenizeError as exc:
        return None, [Diagnostic("PARSE_ERROR", str(exc), exc.position, exc.position + 1)]
    statements = split_statements(tokens)
    if not statements:
        return None, [Diagnostic("EMPTY_QUERY", "no statement found")]
    if len(statements) > 1:
        extra = statements[1][0]
        return None, [
            Diagnostic(
                "MULTIPLE_STATEMENTS",
                f"{len(statements)} statements found; only one is allowed",
                extra.start,
                extra.end,
            )
        ]
    return statements[0], []


def _main_verb(tokens: list[Token]) -> Token | None:
    """First statement verb at paren depth zero, skipping a WITH prolog."""
    depth = 0
    for token in tokens:
        if token.kind == PUNCT and token.value == "(":
            depth += 1
        elif token.kind == PUNCT and token.value == ")":
            depth -= 1
        elif depth == 0 and token.kind == IDENT and not token.quoted:
            word = token.upper()
            if word in _STATEMENT_VERBS:
                return token
    return None


def enforce_read_only(candidate: QueryCandidate) -> ValidationReport:
    """Accept only a single SELECT statement (CTEs included).

    Rejection is a verdict, never an exception: mutating statements,
    multiple statements and unparseable input all come back as rejected
    reports with diagnostics.
    """
    tokens, diagnostics = _tokenize_single(candidate.sql)
    if tokens is None:
        return ValidationReport("rejected", diagnostics=diagnostics)

    first = tokens[0]
    if not first.is_keyword("SELECT", "WITH"):
        return ValidationReport(
            "rejected",
            diagnostics=[
                Diagnostic(
                    "NON_SELECT",
                    f"statement starts with {first.value!r}; only SELECT is allowed",
                    first.start,
                    first.end,
                )
            ],
        )

    verb = _main_verb(tokens)
    if verb is None or not verb.is_keyword("SELECT"):
        found = verb.value if verb else "nothing"
        where = verb or first
        return ValidationReport(
            "rejected",
            diagnostics=[
                Diagnostic(
                    "NON_SELECT",
                    f"main statement is {found!r}, not SELECT",
                    where.start,
                    where.end,
                )
            ],
        )

    for token in tokens:
        if token.kind == IDENT and not token.quoted and token.upper() in MUTATING_KEYWORDS:
            return ValidationReport(
                "rejected",
                diagnostics=[
                    Diagnostic(
                        "NON_SELECT",
                        f"forbidden keyword {token.value!r}",
                        token.start,
                        token.end,
                    )
                ],
            )
    return ValidationReport("accepted")


def syntax_check(candidate: QueryCandidate, catalog, db=None) -> ValidationReport:
    """Check that the statement parses and resolves against the catalog.

    Structural analysis flags unknown tables/columns/aliases and literal
    type mismatches; unknown functions are warnings only.  When a database
    handle is supplied the statement is additionally compiled (EXPLAIN,
    never executed) to catch residual grammar errors.
    """
    tokens, diagnostics = _tokenize_single(candidate.sql)
    if tokens is None:
        return ValidationReport("rejected", diagnostics=diagnostics)

    diagnostics = analyze_statement(tokens, catalog)
    if db is not None and not any(d.severity == "error" for d in diagnostics):
        diagnostics.extend(_compile_check(candidate.sql, db))

    errors = [d for d in diagnostics if d.severity == "error"]
    if errors:
        return ValidationReport("rejected", diagnostics=diagnostics)
    return ValidationReport("accepted", diagnostics=diagnostics)


def _compile_check(sql: str, db) -> list[Diagnostic]:
    """Compile the statement on a read-only connection via EXPLAIN."""
    import sqlite3

    conn = db.connect(readonly=True)
    try:
        conn.execute("EXPLAIN " + sql)
        return []
    except sqlite3.Error as exc:
        message = str(exc)
        lowered = message.lower()
        if "no such function" in lowered:
            return [Diagnostic("FUNCTION_UNKNOWN", message, severity="warning")]
        if "no such table" in lowered:
            code = "UNKNOWN_TABLE"
        elif "no such column" in lowered:
            code = "UNKNOWN_COLUMN"
        elif "ambiguous" in lowered:
            code = "AMBIGUOUS_COLUMN"
        else:
            code = "PARSE_ERROR"
        return [Diagnostic(code, message)]
    finally:
        conn.close()


@dataclass
class RepairRule:
    id: str
    description: str

    def apply(self, sql: str) -> tuple[str, list[Diagnostic]]:
        raise NotImplementedError


class DirectionLiteralRule(RepairRule):
    """Rewrite numeric direction literals to the canonical strings.

    The GTFS standard encodes direction as 0/1, but the trips table stores
    only 'andata'/'ritorno'; equality and IN comparisons are rewritten.
    """

    def __init__(self):
        super().__init__(
            id="DIRECTION_LITERAL",
            description="direction compared to 0/1 instead of 'andata'/'ritorno'",
        )

    _MAPPING = {"0": "'andata'", "1": "'ritorno'"}

    def apply(self, sql: str) -> tuple[str, list[Diagnostic]]:
        try:
            tokens = tokenize(sql)
        except TokenizeError:
            return sql, []
        replacements: list[tuple[int, int, str, str]] = []  # start, end, old, new

        def is_direction_path(index: int) -> bool:
            token = tokens[index]
            return token.kind == IDENT and token.value.lower() == "direction"

        for i, token in enumerate(tokens):
            if not is_direction_path(i):
                continue
            j = i + 1
            if j < len(tokens) and tokens[j].kind == OP and tokens[j].value in ("=", "!=", "<>"):
                k = j + 1
                if k < len(tokens) and tokens[k].kind == NUMBER and tokens[k].value in self._MAPPING:
                    literal = tokens[k]
                    replacements.append(
                        (literal.start, literal.end, literal.value, self._MAPPING[literal.value])
                    )
                continue
            if j < len(tokens) and tokens[j].is_keyword("NOT"):
                j += 1
            if j < len(tokens) and tokens[j].is_keyword("IN"):
                k = j + 1
                if k < len(tokens) and tokens[k].kind == PUNCT and tokens[k].value == "(":
                    close = matching_paren(tokens, k)
                    if close == -1:
                        continue
                    for m in range(k + 1, close):
                        t = tokens[m]
                        if t.kind == NUMBER and t.value in self._MAPPING:
                            replacements.append((t.start, t.end, t.value, self._MAPPING[t.value]))

        if not replacements:
            return sql, []
        diagnostics = []
        out = sql
        for start, end, old, new in sorted(replacements, reverse=True):
            out = out[:start] + new + out[end:]
            diagnostics.append(
                Diagnostic(
                    "DIRECTION_LITERAL",
                    f"rewrote direction literal {old} to {new}",
                    start,
                    end,
                    severity="warning",
                )
            )
        diagnostics.reverse()
        return out, diagnostics


# Applied in rule-id order; every rule's rewrite must preserve the
# read-only property of the query.
REPAIR_RULES: tuple[RepairRule, ...] = (DirectionLiteralRule(),)


def apply_repair_rules(
    candidate: QueryCandidate, rule_ids: list[str] | None = None
) -> tuple[QueryCandidate, ValidationReport]:
    """Run the deterministic rewrite rules in rule-id order.

    ``rule_ids`` restricts the rule set (None enables every rule).
    Applying the rules twice equals applying them once; a query no rule
    matches comes back unchanged with an accepted report.
    """
    sql = candidate.sql
    applied: list[str] = []
    diagnostics: list[Diagnostic] = []
    for rule in sorted(REPAIR_RULES, key=lambda r: r.id):
        if rule_ids is not None and rule.id not in rule_ids:
            continue
        sql, rule_diagnostics = rule.apply(sql)
        if rule_diagnostics:
            applied.append(rule.id)
            diagnostics.extend(rule_diagnostics)
    if not applied:
        return candidate, ValidationReport("accepted")
    repaired = QueryCandidate(sql=sql, origin="repaired")
    return repaired, ValidationReport("repaired", applied_rules=applied, diagnostics=diagnostics)


REPAIR_PROMPT = """The following SQL query was rejected by a validation tool.

Common errors to look for:
- table aliases that are used but never declared in FROM;
- references to tables or columns that do not exist in the schema;
- comparisons between values of different types (the trips.direction column
  holds the strings 'andata' and 'ritorno', never the integers 0/1);
- general SQL syntax mistakes.

Diagnostics:
{diagnostics}

Query:
{sql}

Return only the corrected SQL query, with no explanation."""


def extract_sql(text: str) -> str:
    """Pull a SQL statement out of a model reply (code fences, labels)."""
    fenced = re.search(r"```(?:sql)?\s*(.+?)```", text, re.DOTALL | re.IGNORECASE)
    if fenced:
        text = fenced.group(1)
    text = text.strip()
    text = re.sub(r"^(sql\s*:)\s*", "", text, flags=re.IGNORECASE)
    return text.strip()


def llm_repair(
    candidate: QueryCandidate,
    diagnostics: list[Diagnostic],
    provider,
    catalog,
    db=None,
    rounds: int = 1,
) -> QueryCandidate:
    """Ask the provider to rewrite a rejected query, then re-validate.

    The rewritten query must pass both the read-only check and the syntax
    check; otherwise (or when the provider is down) :class:`RepairFailed`
    is raised.
    """
    from transit_agent.providers import CompletionRequest

    current = candidate
    current_diagnostics = diagnostics
    last_error = "no repair attempted"
    for _ in range(max(1, rounds)):
        prompt = REPAIR_PROMPT.format(
            diagnostics="\n".join(f"- {d.code}: {d.message}" for d in current_diagnostics) or "- (none)",
            sql=current.sql,
        )
        try:
            reply = provider.complete(
                CompletionRequest(system_prompt="", messages=[("user", prompt)])
            )
        except ProviderUnavailable as exc:
            raise RepairFailed(f"provider unavailable during repair: {exc}") from exc
        repaired_sql = extract_sql(reply)
        if not repaired_sql:
            last_error = "provider returned no SQL"
            continue
        repaired = QueryCandidate(sql=repaired_sql, origin="repaired")
        read_only = enforce_read_only(repaired)
        if read_only.verdict == "rejected":
            last_error = f"repair is not read-only: {read_only.diagnostics[0].message}"
            current, current_diagnostics = repaired, read_only.diagnostics
            continue
        syntax = syntax_check(repaired, catalog, db)
        if syntax.verdict == "rejected":
            last_error = f"repair still invalid: {syntax.diagnostics[0].message}"
            current, current_diagnostics = repaired, syntax.diagnostics
            continue
        return repaired
    raise RepairFailed(last_error)


def inject_limit(candidate: QueryCandidate, n: int) -> QueryCandidate:
    """Append ``limit n`` unless a limit exists or the query is a bare
    single-row aggregate."""
    if n <= 0:
        raise ValueError("limit must be positive")
    try:
        tokens = tokenize(candidate.sql)
    except TokenizeError:
        return candidate
    statements = split_statements(tokens)
    if len(statements) != 1:
        return candidate
    tokens = statements[0]

    depth = 0
    has_limit = False
    has_group_by = False
    select_at = None
    from_at = None
    for i, token in enumerate(tokens):
        if token.kind == PUNCT and token.value == "(":
            depth += 1
        elif token.kind == PUNCT and token.value == ")":
            depth -= 1
        elif depth == 0 and token.kind == IDENT and not token.quoted:
            word = token.upper()
            if word == "LIMIT":
                has_limit = True
            elif word == "GROUP":
                has_group_by = True
            elif word == "SELECT" and select_at is None:
                select_at = i
            elif word == "FROM" and from_at is None and select_at is not None:
                from_at = i
    if has_limit:
        return candidate

    if select_at is not None and not has_group_by:
        end = from_at if from_at is not None else len(tokens)
        depth = 0
        for i in range(select_at + 1, end):
            token = tokens[i]
            if token.kind == PUNCT and token.value == "(":
                depth += 1
            elif token.kind == PUNCT and token.value == ")":
                depth -= 1
            elif (
                depth == 0
                and token.kind == IDENT
                and token.value.lower() in AGGREGATE_FUNCTIONS
                and i + 1 < end
                and tokens[i + 1].kind == PUNCT
                and tokens[i + 1].value == "("
            ):
                return candidate  # single-row aggregate

    sql = candidate.sql.rstrip().rstrip(";").rstrip()
    return QueryCandidate(sql=f"{sql} limit {n}", origin=candidate.origin)
