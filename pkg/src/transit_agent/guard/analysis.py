"""Structural analysis of SELECT statements against the schema catalog.

Resolves table references, aliases and column paths scope by scope
(including CTEs and subqueries) and flags literal-vs-column type mismatches
in comparisons.  The analysis is deliberately conservative: when a scope
contains an opaque source (``select *`` subquery, unparseable projection)
unresolved columns are not reported, so exotic-but-valid queries degrade to
fewer checks instead of false rejections.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from transit_agent.guard.tokens import (
    IDENT,
    NUMBER,
    OP,
    PUNCT,
    STRING,
    Token,
    matching_paren,
)

KEYWORDS = frozenset(
    """
    SELECT FROM WHERE GROUP BY HAVING ORDER LIMIT OFFSET AS ON USING JOIN
    LEFT RIGHT FULL INNER OUTER CROSS NATURAL UNION INTERSECT EXCEPT ALL
    DISTINCT AND OR NOT IN IS NULL LIKE GLOB REGEXP MATCH BETWEEN CASE WHEN
    THEN ELSE END EXISTS CAST WITH RECURSIVE ASC DESC COLLATE ESCAPE VALUES
    CURRENT_DATE CURRENT_TIME CURRENT_TIMESTAMP TRUE FALSE FILTER OVER
    PARTITION WINDOW
    """.split()
)

KNOWN_FUNCTIONS = frozenset(
    """
    count sum avg min max total group_concat abs round length upper lower
    substr substring trim ltrim rtrim replace coalesce ifnull nullif instr
    printf format char unicode hex typeof date time datetime julianday
    strftime unixepoch iif sign floor ceil ceiling pow power sqrt exp ln
    log log10 mod pi random row_number rank dense_rank ntile lag lead
    first_value last_value nth_value cume_dist percent_rank
    """.split()
)

AGGREGATE_FUNCTIONS = frozenset("count sum avg min max total group_concat".split())

_CAST_TYPE_NAMES = frozenset(
    "integer int bigint smallint tinyint text varchar char clob real float double decimal numeric blob date datetime boolean".split()
)

_CLAUSE_STARTERS = ("FROM", "WHERE", "GROUP", "HAVING", "ORDER", "LIMIT", "WINDOW")
_JOIN_WORDS = ("JOIN", "LEFT", "RIGHT", "FULL", "INNER", "OUTER", "CROSS", "NATURAL")
_SET_OPS = ("UNION", "INTERSECT", "EXCEPT")
_COMPARISON_OPS = frozenset({"=", "!=", "<>", "<", ">", "<=", ">=", "=="})


@dataclass
class Diagnostic:
    code: str
    message: str
    start: int = 0
    end: int = 0
    severity: str = "error"  # "error" rejects, "warning" does not

    def to_dict(self) -> dict:
        return {"code": self.code, "message": self.message, "span": {"start": self.start, "end": self.end}}


@dataclass
class TableSource:
    alias: str  # lowercased lookup key; "" for unnamed subqueries
    table: str | None  # catalog or CTE name, lowercased; None for subqueries
    columns: list[str] | None  # lowercased; None = opaque


@dataclass
class Scope:
    sources: list[TableSource] = field(default_factory=list)
    parent: "Scope | None" = None
    select_aliases: set[str] = field(default_factory=set)

    def chain(self):
        scope = self
        while scope is not None:
            yield scope
            scope = scope.parent


class StatementAnalysis:
    """Single-statement analyzer; collects diagnostics and the projection."""

    def __init__(self, tokens: list[Token], catalog):
        self.tokens = tokens
        self.catalog = catalog
        self.diagnostics: list[Diagnostic] = []
        self.projection: list[str] | None = None

    def run(self) -> list[Diagnostic]:
        if not self.tokens:
            self.diagnostics.append(Diagnostic("EMPTY_QUERY", "empty statement"))
            return self.diagnostics
        self.projection = self._scope(0, len(self.tokens), None, {})
        return self.diagnostics

    # -- scope handling ---------------------------------------------------

    def _scope(self, lo: int, hi: int, parent: Scope | None, ctes: dict) -> list[str] | None:
        """Analyze [WITH ...] SELECT ... [set-op SELECT ...] in tokens[lo:hi)."""
        ctes = dict(ctes)
        i = lo
        if i < hi and self.tokens[i].is_keyword("WITH"):
            i += 1
            if i < hi and self.tokens[i].is_keyword("RECURSIVE"):
                i += 1
            while i < hi:
                if self.tokens[i].kind != IDENT:
                    self._error("PARSE_ERROR", "expected CTE name", self.tokens[i])
                    return None
                cte_name = self.tokens[i].value.lower()
                i += 1
                explicit_columns = None
                if self._is_punct(i, "("):
                    close = matching_paren(self.tokens, i)
                    if close == -1 or close >= hi:
                        self._error("PARSE_ERROR", "unbalanced parentheses", self.tokens[i])
                        return None
                    explicit_columns = [
                        t.value.lower() for t in self.tokens[i + 1 : close] if t.kind == IDENT
                    ]
                    i = close + 1
                if not (i < hi and self.tokens[i].is_keyword("AS")):
                    self._error("PARSE_ERROR", f"expected AS after CTE {cte_name}", self.tokens[min(i, hi - 1)])
                    return None
                i += 1
                if not self._is_punct(i, "("):
                    self._error("PARSE_ERROR", f"expected ( after CTE {cte_name} AS", self.tokens[min(i, hi - 1)])
                    return None
                close = matching_paren(self.tokens, i)
                if close == -1 or close >= hi:
                    self._error("PARSE_ERROR", "unbalanced parentheses", self.tokens[i])
                    return None
                body_projection = self._scope(i + 1, close, parent, ctes)
                ctes[cte_name] = explicit_columns if explicit_columns is not None else body_projection
                i = close + 1
                if self._is_punct(i, ","):
                    i += 1
                    continue
                break

        # Split the compound select on set operators at this nesting level.
        branches = []
        start = i
        j = i
        depth = 0
        while j < hi:
            token = self.tokens[j]
            if token.kind == PUNCT and token.value == "(":
                depth += 1
            elif token.kind == PUNCT and token.value == ")":
                depth -= 1
            elif depth == 0 and token.is_keyword(*_SET_OPS):
                branches.append((start, j))
                start = j + 1
                if start < hi and self.tokens[start].is_keyword("ALL"):
                    start += 1
            j += 1
        branches.append((start, hi))

        projection: list[str] | None = None
        for index, (blo, bhi) in enumerate(branches):
            branch_projection = self._branch(blo, bhi, parent, ctes)
            if index == 0:
                projection = branch_projection
        return projection

    def _branch(self, lo: int, hi: int, parent: Scope | None, ctes: dict) -> list[str] | None:
        if lo >= hi:
            self._error("PARSE_ERROR", "empty select branch", self.tokens[min(lo, len(self.tokens) - 1)])
            return None
        first = self.tokens[lo]
        if first.kind == PUNCT and first.value == "(":
            # Fully parenthesized branch: (select ...)
            close = matching_paren(self.tokens, lo)
            if close == hi - 1:
                return self._scope(lo + 1, close, parent, ctes)
        if first.is_keyword("VALUES"):
            return None
        if not first.is_keyword("SELECT"):
            self._error("PARSE_ERROR", f"expected SELECT, found {first.value!r}", first)
            return None

        clause_at: dict[str, int] = {}
        depth = 0
        j = lo + 1
        while j < hi:
            token = self.tokens[j]
            if token.kind == PUNCT and token.value == "(":
                depth += 1
            elif token.kind == PUNCT and token.value == ")":
                depth -= 1
            elif depth == 0 and token.kind == IDENT and not token.quoted:
                word = token.upper()
                if word in _CLAUSE_STARTERS and word not in clause_at:
                    clause_at[word] = j
            j += 1

        select_list_end = min(
            [pos for pos in clause_at.values()] + [hi]
        )
        from_start = clause_at.get("FROM")
        from_end = min([pos for name, pos in clause_at.items() if name != "FROM" and pos > (from_start or 0)] + [hi]) if from_start is not None else None

        scope = Scope(parent=parent)
        skip: set[int] = set()  # token indexes already consumed structurally
        if from_start is not None:
            self._parse_from(from_start + 1, from_end, scope, ctes, skip, parent)

        select_lo = lo + 1
        if select_lo < hi and self.tokens[select_lo].is_keyword("DISTINCT", "ALL"):
            select_lo += 1

        projection, aliases = self._infer_projection(select_lo, select_list_end)
        scope.select_aliases = aliases

        self._scan_expressions(lo + 1, hi, scope, ctes, skip)
        self._check_comparisons(lo + 1, hi, scope, skip)
        return projection

    # -- FROM parsing ------------------------------------------------------

    def _parse_from(self, lo: int, hi: int, scope: Scope, ctes: dict, skip: set[int], parent: Scope | None):
        i = lo
        expecting_ref = True
        while i < hi:
            token = self.tokens[i]
            if expecting_ref:
                if token.kind == PUNCT and token.value == "(":
                    close = matching_paren(self.tokens, i)
                    if close == -1 or close > hi:
                        self._error("PARSE_ERROR", "unbalanced parentheses in FROM", token)
                        return
                    inner = i + 1
                    if inner < close and (
                        self.tokens[inner].is_keyword("SELECT", "WITH", "VALUES")
                    ):
                        columns = self._scope(inner, close, parent, ctes)
                        skip.update(range(i, close + 1))
                        i = close + 1
                        alias, i = self._read_alias(i, hi, skip)
                        scope.sources.append(TableSource(alias=alias, table=None, columns=columns))
                    else:
                        # parenthesized join: parse the inside as more refs
                        self._parse_from(inner, close, scope, ctes, skip, parent)
                        skip.add(i)
                        skip.add(close)
                        i = close + 1
                    expecting_ref = False
                    continue
                if token.kind == IDENT and not token.is_keyword(*_JOIN_WORDS, "ON", "USING"):
                    parts = [token]
                    skip.add(i)
                    j = i + 1
                    while self._is_punct(j, ".") and j + 1 < hi and self.tokens[j + 1].kind == IDENT:
                        skip.update((j, j + 1))
                        parts.append(self.tokens[j + 1])
                        j += 2
                    name = parts[-1].value.lower()
                    alias, j = self._read_alias(j, hi, skip)
                    source = self._resolve_table(name, alias, ctes, parts[-1])
                    scope.sources.append(source)
                    i = j
                    expecting_ref = False
                    continue
                self._error("PARSE_ERROR", f"unexpected token {token.value!r} in FROM", token)
                return
            # between refs: joins, commas, ON / USING clauses
            if token.kind == PUNCT and token.value == ",":
                skip.add(i)
                i += 1
                expecting_ref = True
                continue
            if token.kind == IDENT and token.is_keyword(*_JOIN_WORDS):
                skip.add(i)
                if token.is_keyword("JOIN"):
                    expecting_ref = True
                i += 1
                continue
            if token.kind == IDENT and token.is_keyword("USING"):
                skip.add(i)
                if self._is_punct(i + 1, "("):
                    close = matching_paren(self.tokens, i + 1)
                    if close == -1 or close > hi:
                        self._error("PARSE_ERROR", "unbalanced USING clause", token)
                        return
                    for k in range(i + 2, close):
                        skip.add(k)
                        t = self.tokens[k]
                        if t.kind == IDENT:
                            self._resolve_column(scope, [t])
                    skip.update((i + 1, close))
                    i = close + 1
                    continue
                i += 1
                continue
            if token.kind == IDENT and token.is_keyword("ON"):
                skip.add(i)
                i += 1
                # the ON expression itself is scanned by _scan_expressions
                depth = 0
                while i < hi:
                    t = self.tokens[i]
                    if t.kind == PUNCT and t.value == "(":
                        depth += 1
                    elif t.kind == PUNCT and t.value == ")":
                        depth -= 1
                    elif depth == 0 and t.kind == IDENT and (
                        t.is_keyword(*_JOIN_WORDS) or (t.kind == PUNCT and t.value == ",")
                    ):
                        break
                    elif depth == 0 and t.kind == PUNCT and t.value == ",":
                        break
                    i += 1
                continue
            # anything else inside FROM (e.g. expression tokens of ON) is fine
            i += 1

    def _read_alias(self, i: int, hi: int, skip: set[int]) -> tuple[str, int]:
        if i < hi and self.tokens[i].is_keyword("AS"):
            skip.add(i)
            i += 1
            if i < hi and self.tokens[i].kind == IDENT:
                skip.add(i)
                return self.tokens[i].value.lower(), i + 1
            return "", i
        if (
            i < hi
            and self.tokens[i].kind == IDENT
            and (self.tokens[i].quoted or self.tokens[i].upper() not in KEYWORDS)
        ):
            skip.add(i)
            return self.tokens[i].value.lower(), i + 1
        return "", i

    def _resolve_table(self, name: str, alias: str, ctes: dict, token: Token) -> TableSource:
        effective_alias = alias or name
        if name in ctes:
            return TableSource(alias=effective_alias, table=name, columns=ctes[name])
        if self.catalog is not None and self.catalog.has_table(name):
            return TableSource(alias=effective_alias, table=name, columns=self.catalog.columns_of(name))
        if self.catalog is not None:
            self._error("UNKNOWN_TABLE", f"unknown table {name!r}", token)
        return TableSource(alias=effective_alias, table=name, columns=None)

    # -- expression scanning -----------------------------------------------

    def _scan_expressions(self, lo: int, hi: int, scope: Scope, ctes: dict, skip: set[int]):
        i = lo
        cast_as_positions = self._cast_type_positions(lo, hi)
        while i < hi:
            if i in skip:
                i += 1
                continue
            token = self.tokens[i]
            if token.kind == PUNCT and token.value == "(":
                close = matching_paren(self.tokens, i)
                inner = i + 1
                if close != -1 and close <= hi and inner < close and self.tokens[inner].is_keyword(
                    "SELECT", "WITH", "VALUES"
                ):
                    self._scope(inner, close, scope, ctes)
                    i = close + 1
                    continue
                i += 1
                continue
            if token.kind == IDENT and not token.quoted and token.upper() in KEYWORDS:
                i += 1
                continue
            if token.kind == IDENT:
                if i in cast_as_positions:
                    i += 1
                    continue
                if self._is_punct(i + 1, "(") and not self._is_punct(i - 1, "."):
                    name = token.value.lower()
                    if name not in KNOWN_FUNCTIONS:
                        self.diagnostics.append(
                            Diagnostic(
                                "FUNCTION_UNKNOWN",
                                f"function {name!r} is not in the known set",
                                token.start,
                                token.end,
                                severity="warning",
                            )
                        )
                    i += 1
                    continue
                # a column path: ident(.ident)* possibly ending in .*
                parts = [token]
                j = i + 1
                while self._is_punct(j, ".") and j + 1 < hi:
                    nxt = self.tokens[j + 1]
                    if nxt.kind == IDENT or (nxt.kind == OP and nxt.value == "*"):
                        parts.append(nxt)
                        j += 2
                        if nxt.kind == OP:
                            break
                    else:
                        break
                if self._is_punct(j, "(") and parts[-1].kind == IDENT:
                    # qualified function call like schema.fn(...)
                    i = j
                    continue
                if i - 1 >= lo and self.tokens[i - 1].is_keyword("AS"):
                    i = j  # alias definition, not a reference
                    continue
                self._resolve_column(scope, parts)
                i = j
                continue
            i += 1

    def _cast_type_positions(self, lo: int, hi: int) -> set[int]:
        """Indexes of type-name identifiers inside cast(... AS type) calls."""
        positions: set[int] = set()
        for i in range(lo, hi):
            token = self.tokens[i]
            if token.kind == IDENT and token.value.lower() == "cast" and self._is_punct(i + 1, "("):
                close = matching_paren(self.tokens, i + 1)
                if close == -1:
                    continue
                for j in range(i + 2, min(close, hi)):
                    if self.tokens[j].is_keyword("AS"):
                        k = j + 1
                        while k < close and self.tokens[k].kind == IDENT:
                            if self.tokens[k].value.lower() in _CAST_TYPE_NAMES:
                                positions.add(k)
                            k += 1
        return positions

    def _resolve_column(self, scope: Scope, parts: list[Token]):
        column_token = parts[-1]
        column = column_token.value.lower() if column_token.kind == IDENT else "*"
        if len(parts) >= 2:
            qualifier_token = parts[-2] if len(parts) == 2 else parts[-2]
            qualifier = parts[-2].value.lower()
            # tolerate db.table.column chains: use the second-to-last part
            source = None
            for s in scope.chain():
                for candidate in s.sources:
                    if candidate.alias == qualifier or (candidate.table == qualifier):
                        source = candidate
                        break
                if source:
                    break
            if source is None:
                self._error("UNKNOWN_ALIAS", f"alias or table {qualifier!r} is not declared", qualifier_token)
                return
            if column == "*" or source.columns is None:
                return
            if column not in source.columns:
                where = source.table or qualifier
                self._error("UNKNOWN_COLUMN", f"column {column!r} does not exist in {where!r}", column_token)
            return
        if column == "*":
            return
        any_opaque = False
        for s in scope.chain():
            for source in s.sources:
                if source.columns is None:
                    any_opaque = True
                elif column in source.columns:
                    return
            if column in s.select_aliases:
                return
        if not any_opaque and any(s.sources for s in scope.chain()):
            self._error("UNKNOWN_COLUMN", f"column {column!r} does not resolve against any table", column_token)

    def _infer_projection(self, lo: int, hi: int) -> tuple[list[str] | None, set[str]]:
        """(projected column names or None when opaque, declared aliases).

        Aliases cover only names introduced by the select list itself
        (``AS alias`` or an implicit trailing alias); bare column paths are
        part of the projection but still have to resolve as columns.
        """
        items: list[list[Token]] = [[]]
        depth = 0
        for i in range(lo, hi):
            token = self.tokens[i]
            if token.kind == PUNCT and token.value == "(":
                depth += 1
            elif token.kind == PUNCT and token.value == ")":
                depth -= 1
            if depth == 0 and token.kind == PUNCT and token.value == ",":
                items.append([])
            else:
                items[-1].append(token)

        aliases: set[str] = set()
        names: list[str] | None = []
        for item in items:
            if not item:
                return None, aliases
            last = item[-1]
            is_alias = last.kind == IDENT and (last.quoted or last.upper() not in KEYWORDS) and (
                (len(item) >= 2 and item[-2].is_keyword("AS"))
                or (
                    len(item) >= 2
                    and not (item[-2].kind == PUNCT and item[-2].value == ".")
                )
            )
            if is_alias:
                aliases.add(last.value.lower())
            if names is None:
                continue
            if last.kind == OP and last.value == "*":
                names = None  # star or qualified star: opaque projection
                continue
            if last.kind != IDENT or (not last.quoted and last.upper() in KEYWORDS):
                names = None  # unnamed expression
                continue
            names.append(last.value.lower())
        return names, aliases

    # -- comparisons --------------------------------------------------------

    def _check_comparisons(self, lo: int, hi: int, scope: Scope, skip: set[int]):
        for i in range(lo, hi):
            if i in skip:
                continue
            token = self.tokens[i]
            if token.kind == OP and token.value in _COMPARISON_OPS:
                left = self._operand_before(i, lo, skip)
                right = self._operand_after(i, hi, skip)
                self._check_pair(scope, left, right, token)
            elif token.kind == IDENT and token.is_keyword("IN") and self._is_punct(i + 1, "("):
                left = self._operand_before(i, lo, skip, allow_not=True)
                close = matching_paren(self.tokens, i + 1)
                if close == -1 or left is None or left[0] != "path":
                    continue
                if i + 2 < len(self.tokens) and self.tokens[i + 2].is_keyword("SELECT", "WITH"):
                    continue
                for j in range(i + 2, min(close, hi)):
                    t = self.tokens[j]
                    if t.kind in (NUMBER, STRING):
                        self._check_pair(scope, left, ("literal", t), t)

    def _operand_before(self, i: int, lo: int, skip: set[int], allow_not: bool = False):
        j = i - 1
        if allow_not and j >= lo and self.tokens[j].is_keyword("NOT"):
            j -= 1
        if j < lo or j in skip:
            return None
        token = self.tokens[j]
        if token.kind in (NUMBER, STRING):
            return ("literal", token)
        if token.kind == IDENT and (token.quoted or token.upper() not in KEYWORDS):
            if self._is_punct(j - 1, ")"):
                return None
            parts = [token]
            while j - 2 >= lo and self._is_punct(j - 1, ".") and self.tokens[j - 2].kind == IDENT:
                parts.insert(0, self.tokens[j - 2])
                j -= 2
            return ("path", parts)
        return None

    def _operand_after(self, i: int, hi: int, skip: set[int]):
        j = i + 1
        if j >= hi or j in skip:
            return None
        token = self.tokens[j]
        if token.kind == OP and token.value in ("+", "-") and j + 1 < hi and self.tokens[j + 1].kind == NUMBER:
            return ("literal", self.tokens[j + 1])
        if token.kind in (NUMBER, STRING):
            if self._is_punct(j + 1, "(") or self._is_punct(j + 1, "."):
                return None
            return ("literal", token)
        if token.kind == IDENT and (token.quoted or token.upper() not in KEYWORDS):
            if self._is_punct(j + 1, "("):
                return None
            parts = [token]
            k = j + 1
            while self._is_punct(k, ".") and k + 1 < hi and self.tokens[k + 1].kind == IDENT:
                parts.append(self.tokens[k + 1])
                k += 2
            return ("path", parts)
        return None

    def _check_pair(self, scope: Scope, left, right, op_token: Token):
        if left is None or right is None:
            return
        kinds = {left[0], right[0]}
        if kinds != {"path", "literal"}:
            return
        path = left[1] if left[0] == "path" else right[1]
        literal = left[1] if left[0] == "literal" else right[1]
        column_type = self._path_type(scope, path)
        if column_type is None:
            return
        literal_type = "INTEGER" if literal.kind == NUMBER else "TEXT"
        if column_type == "TEXT" and literal_type == "INTEGER":
            self._error(
                "TYPE_MISMATCH",
                f"column {path[-1].value!r} holds text but is compared to number {literal.value}",
                literal,
            )
        elif column_type in ("INTEGER", "REAL") and literal_type == "TEXT":
            self._error(
                "TYPE_MISMATCH",
                f"column {path[-1].value!r} holds numbers but is compared to string {literal.value!r}",
                literal,
            )

    def _path_type(self, scope: Scope, parts: list[Token]) -> str | None:
        if self.catalog is None:
            return None
        column = parts[-1].value.lower()
        if len(parts) >= 2:
            qualifier = parts[-2].value.lower()
            for s in scope.chain():
                for source in s.sources:
                    if source.alias == qualifier or source.table == qualifier:
                        if source.table and self.catalog.has_table(source.table):
                            return self.catalog.column_type(source.table, column)
                        return None
            return None
        hits = []
        for s in scope.chain():
            for source in s.sources:
                if source.table and self.catalog.has_table(source.table):
                    column_type = self.catalog.column_type(source.table, column)
                    if column_type:
                        hits.append(column_type)
        return hits[0] if len(hits) == 1 else None

    # -- helpers -------------------------------------------------------------

    def _is_punct(self, i: int, value: str) -> bool:
        return 0 <= i < len(self.tokens) and self.tokens[i].kind == PUNCT and self.tokens[i].value == value

    def _error(self, code: str, message: str, token: Token):
        self.diagnostics.append(Diagnostic(code, message, token.start, token.end))


def analyze_statement(tokens: list[Token], catalog) -> list[Diagnostic]:
    return StatementAnalysis(tokens, catalog).run()
