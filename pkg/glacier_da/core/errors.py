"""Exception hierarchy for glacier-da.

Configuration problems map to CLI exit status 2, numerical failures of the
model or the filter map to exit status 3.
"""

from __future__ import annotations


class GlacierDAError(Exception):
    """Base class for all glacier-da errors."""

    exit_code: int = 1


class ConfigError(GlacierDAError):
    """Invalid or unreadable run configuration."""

    exit_code = 2


class ConfigParseError(ConfigError):
    """Syntax error in a ``key = value`` configuration file.

    Attributes
    ----------
    line : int or None
        1-based line number of the offending line, if known.
    """

    def __init__(self, message: str, line: int | None = None) -> None:
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class ValidationError(ConfigError, ValueError):
    """A configuration value violates a documented invariant."""


class ModelError(GlacierDAError):
    """The glacier model left its domain of validity."""

    exit_code = 3


class NonMarineBedError(ModelError):
    """Grounding line sits on bed at or above sea level (b(L) >= 0)."""


class StateBlowupError(ModelError):
    """An integration step produced a non-finite or non-positive state."""


class FilterError(GlacierDAError):
    """The ensemble filter could not complete an analysis."""

    exit_code = 3


class SingularInnovationError(FilterError):
    """The innovation covariance H C H' + R is numerically singular."""
