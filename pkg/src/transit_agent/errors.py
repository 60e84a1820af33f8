"""Exception types shared across the package."""


class TransitAgentError(Exception):
    """Base class for all package errors."""


class MissingFile(TransitAgentError):
    """A required GTFS file is absent from the feed directory."""

    def __init__(self, name: str, path: str = ""):
        self.name = name
        self.path = path
        super().__init__(f"required GTFS file missing: {name}" + (f" (in {path})" if path else ""))


class MalformedRow(TransitAgentError):
    """A CSV row failed type checks.  Carries file name and line number."""

    def __init__(self, file: str, line: int, reason: str):
        self.file = file
        self.line = line
        self.reason = reason
        super().__init__(f"{file}:{line}: {reason}")


class FeedFormatError(TransitAgentError):
    """Too many malformed rows in one file; the feed is considered unusable."""


class DanglingReference(TransitAgentError):
    """A record references a parent that does not exist."""

    def __init__(self, child_key: tuple, parent_key: tuple, relation: str):
        self.child_key = child_key
        self.parent_key = parent_key
        self.relation = relation
        super().__init__(f"{relation}: {child_key} references missing {parent_key}")


class MalformedGeometry(TransitAgentError):
    """A boundary feature violates the polygon contract (e.g. unclosed ring)."""


class ConstraintViolation(TransitAgentError):
    """Loading a row into the database violated a declared constraint."""

    def __init__(self, table: str, row: tuple, cause: str):
        self.table = table
        self.row = row
        self.cause = cause
        super().__init__(f"constraint violation in {table}: {cause} (row: {row!r})")


class MissingAnnotation(TransitAgentError):
    """A column lacks a human description in the annotation sidecar."""


class ProviderUnavailable(TransitAgentError):
    """The text/embedding provider failed after retries or is not configured."""


class ContextOverflow(TransitAgentError):
    """The prompt exceeds the provider's context limit."""


class InvalidExemplar(TransitAgentError):
    """An exemplar's SQL failed the guard checks at load time."""


class DuplicateId(TransitAgentError):
    """Two exemplars share the same id."""


class EmptyStore(TransitAgentError):
    """Retrieval was attempted against an empty exemplar store."""


class RepairFailed(TransitAgentError):
    """The model-assisted repair did not produce a valid query."""


class UnknownRoute(TransitAgentError):
    """A route reference does not resolve in the database."""


class NoGeometry(TransitAgentError):
    """The route exists but none of its trips carries a shape."""


class EmptyGeometry(TransitAgentError):
    """A geometry document was requested for an empty geometry."""


class QueryTimeout(TransitAgentError):
    """Query execution exceeded its time budget and was cancelled."""


class InsufficientData(TransitAgentError):
    """The database lacks values needed to bind a question template."""


class EndpointUnreachable(TransitAgentError):
    """The chat API could not be reached while running an evaluation suite."""
