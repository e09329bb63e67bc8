"""Exception hierarchy shared across the package."""


class SqlDuelError(Exception):
    """Base class for all errors raised by this package."""


class ParseError(SqlDuelError):
    """Malformed input: bad SQL syntax or a malformed instance document."""

    def __init__(self, message: str, position: int | None = None):
        if position is not None:
            message = f"{message} (at offset {position})"
        super().__init__(message)
        self.position = position


class UnsupportedSql(SqlDuelError):
    """A syntactically valid construct outside the supported SQL subset."""


class BindError(SqlDuelError):
    """A table or column reference could not be resolved against the database."""


class TokenNotFound(SqlDuelError):
    """A provenance token does not name a row of the given database."""


class RewriteUnsupported(SqlDuelError):
    """A WHERE-clause subquery that cannot be turned into a join."""


class NotSeparableInput(SqlDuelError):
    """The two candidates already agree on the full database."""


class ResponseParseError(SqlDuelError):
    """An LLM reply that does not contain a usable answer object."""


class BackendError(SqlDuelError):
    """Transport-level failure talking to an LLM backend."""


class NoCritique(SqlDuelError):
    """The tournament winner agrees with the gold answer; nothing to criticise."""
