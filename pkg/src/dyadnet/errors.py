"""Exception hierarchy and CLI exit codes."""

from __future__ import annotations

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_DATA = 3
EXIT_INTERNAL = 4


class DyadnetError(Exception):
    """Base class for all package errors."""


class ConfigError(DyadnetError):
    """Invalid configuration or arguments (CLI exit code 2)."""


class DataError(DyadnetError):
    """Invalid or inconsistent input data (CLI exit code 3)."""


class InfoboxParseError(DataError):
    """Recoverable wikitext parse failure; names the offending article."""

    def __init__(self, article: str, reason: str):
        self.article = article
        self.reason = reason
        super().__init__(f"{article}: {reason}")


class RedirectError(DataError):
    """Redirect resolution failed (cycle or depth limit)."""


class ValidationError(DataError):
    """Structural validation failed (e.g. entity in two combatant groups)."""


class MaskedFeatureError(DyadnetError):
    """A masked or hidden feature/label was queried through a restricted view."""


class ContractViolationError(DyadnetError):
    """An internal API precondition was violated."""


class NumericalError(DyadnetError):
    """Non-finite values where finite ones are required (e.g. gradients)."""
