"""SQL tokenizer used by the guard.

Tokenizes the standard-SQL subset the application deals in: identifiers
(bare, double-quoted, backquoted or bracketed), single-quoted strings with
'' escaping, numbers, operators and punctuation, with both comment styles
skipped.  Every token keeps its character span so rewrites can splice the
original text without disturbing formatting.
"""

from __future__ import annotations

from dataclasses import dataclass

IDENT = "ident"
STRING = "string"
NUMBER = "number"
OP = "op"
PUNCT = "punct"


class TokenizeError(ValueError):
    def __init__(self, message: str, position: int):
        self.position = position
        super().__init__(f"{message} at offset {position}")


@dataclass
class Token:
    kind: str
    value: str  # normalized: unquoted identifier text, string body, raw number
    start: int
    end: int
    quoted: bool = False

    def upper(self) -> str:
        return self.value.upper()

    def is_keyword(self, *names: str) -> bool:
        return self.kind == IDENT and not self.quoted and self.value.upper() in names


_TWO_CHAR_OPS = ("||", "<=", ">=", "<>", "!=", "==")
_ONE_CHAR_OPS = "=<>+-*/%"
_PUNCT = "(),.;"


def tokenize(sql: str) -> list[Token]:
    tokens: list[Token] = []
    i = 0
    n = len(sql)
    while i < n:
        ch = sql[i]
        if ch.isspace():
            i += 1
            continue
        if ch == "-" and sql.startswith("--", i):
            end = sql.find("\n", i)
            i = n if end == -1 else end + 1
            continue
        if ch == "/" and sql.startswith("/*", i):
            end = sql.find("*/", i + 2)
            if end == -1:
                raise TokenizeError("unterminated block comment", i)
            i = end + 2
            continue
        if ch == "'":
            j = i + 1
            body = []
            while True:
                if j >= n:
                    raise TokenizeError("unterminated string literal", i)
                if sql[j] == "'":
                    if j + 1 < n and sql[j + 1] == "'":
                        body.append("'")
                        j += 2
                        continue
                    break
                body.append(sql[j])
                j += 1
            tokens.append(Token(STRING, "".join(body), i, j + 1))
            i = j + 1
            continue
        if ch == '"' or ch == "`":
            quote = ch
            j = i + 1
            body = []
            while True:
                if j >= n:
                    raise TokenizeError("unterminated quoted identifier", i)
                if sql[j] == quote:
                    if j + 1 < n and sql[j + 1] == quote:
                        body.append(quote)
                        j += 2
                        continue
                    break
                body.append(sql[j])
                j += 1
            tokens.append(Token(IDENT, "".join(body), i, j + 1, quoted=True))
            i = j + 1
            continue
        if ch == "[":
            end = sql.find("]", i)
            if end == -1:
                raise TokenizeError("unterminated bracketed identifier", i)
            tokens.append(Token(IDENT, sql[i + 1 : end], i, end + 1, quoted=True))
            i = end + 1
            continue
        if ch.isdigit() or (ch == "." and i + 1 < n and sql[i + 1].isdigit()):
            j = i
            seen_dot = False
            while j < n and (sql[j].isdigit() or (sql[j] == "." and not seen_dot)):
                if sql[j] == ".":
                    seen_dot = True
                j += 1
            if j < n and sql[j] in "eE":
                k = j + 1
                if k < n and sql[k] in "+-":
                    k += 1
                if k < n and sql[k].isdigit():
                    j = k
                    while j < n and sql[j].isdigit():
                        j += 1
            tokens.append(Token(NUMBER, sql[i:j], i, j))
            i = j
            continue
        if ch.isalpha() or ch == "_":
            j = i
            while j < n and (sql[j].isalnum() or sql[j] == "_"):
                j += 1
            tokens.append(Token(IDENT, sql[i:j], i, j))
            i = j
            continue
        two = sql[i : i + 2]
        if two in _TWO_CHAR_OPS:
            tokens.append(Token(OP, two, i, i + 2))
            i += 2
            continue
        if ch in _ONE_CHAR_OPS:
            tokens.append(Token(OP, ch, i, i + 1))
            i += 1
            continue
        if ch in _PUNCT:
            tokens.append(Token(PUNCT, ch, i, i + 1))
            i += 1
            continue
        if ch == "?" or ch == ":" or ch == "@" or ch == "$":
            # bound-parameter markers; the agent never emits them but a
            # generated query might, and they tokenize fine
            tokens.append(Token(OP, ch, i, i + 1))
            i += 1
            continue
        raise TokenizeError(f"unexpected character {ch!r}", i)
    return tokens


def split_statements(tokens: list[Token]) -> list[list[Token]]:
    """Split on semicolons; empty statements are dropped."""
    statements: list[list[Token]] = []
    current: list[Token] = []
    for token in tokens:
        if token.kind == PUNCT and token.value == ";":
            if current:
                statements.append(current)
                current = []
            continue
        current.append(token)
    if current:
        statements.append(current)
    return statements


def paren_depths(tokens: list[Token]) -> list[int]:
    """Depth of each token; the depth of '(' is the outer depth."""
    depths = []
    depth = 0
    for token in tokens:
        if token.kind == PUNCT and token.value == "(":
            depths.append(depth)
            depth += 1
        elif token.kind == PUNCT and token.value == ")":
            depth -= 1
            depths.append(depth)
        else:
            depths.append(depth)
    return depths


def matching_paren(tokens: list[Token], open_index: int) -> int:
    """Index of the ')' matching the '(' at open_index; -1 if unbalanced."""
    depth = 0
    for i in range(open_index, len(tokens)):
        token = tokens[i]
        if token.kind == PUNCT and token.value == "(":
            depth += 1
        elif token.kind == PUNCT and token.value == ")":
            depth -= 1
            if depth == 0:
                return i
    return -1
