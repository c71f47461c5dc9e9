"""Exception types shared across the toolkit."""


class TckitError(Exception):
    """Base class for all toolkit errors."""


class ValidationError(TckitError):
    """A record violates one of its declared invariants.

    The message always names the offending field.
    """


class ReferentialError(TckitError):
    """A record references a key (e.g. doc_id) that does not exist."""


class NotFoundError(TckitError):
    """A requested entity (run, task, document) does not exist."""


class ConfigError(TckitError):
    """Invalid configuration value or unknown enum member."""


class ParseError(TckitError):
    """A text interchange file (qrels, run) could not be parsed."""

    def __init__(self, message: str, path: str | None = None, line: int | None = None):
        self.path = path
        self.line = line
        where = ""
        if path is not None:
            where += f" in {path}"
        if line is not None:
            where += f" at line {line}"
        super().__init__(message + where)


class GatewayError(TckitError):
    """A model provider failed after the configured retries."""
