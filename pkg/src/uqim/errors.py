"""Exception taxonomy shared across the package.

Every error raised on purpose derives from :class:`UqError` so callers (and
the CLI) can catch one base class and still discriminate by subclass.
"""

from __future__ import annotations


class UqError(Exception):
    """Base class for all errors raised by this package."""


class DataError(UqError):
    """Malformed input data: bad file, bad cell, mismatched shapes."""


class ValidationError(UqError):
    """Invalid configuration or parameters.

    ``fields`` lists every offending field, not only the first one found.
    """

    def __init__(self, message: str, fields: list[str] | None = None):
        super().__init__(message)
        self.fields = list(fields or [])


class InsufficientDataError(UqError):
    """Too few observations for the requested estimate."""


class InvalidCovarianceError(UqError):
    """Covariance matrix is not symmetric positive semidefinite."""


class RankDeficiencyError(UqError):
    """Singular least-squares system with zero penalty."""


class ZeroSpreadError(UqError):
    """All values identical where spread is required (bandwidth rules)."""


class ConditioningError(UqError):
    """Linear algebra failed beyond the jitter escalation policy."""


class DomainError(UqError, ValueError):
    """Argument outside the mathematical domain of an operation."""


class InfeasibleError(UqError):
    """Confidence construction infeasible at the requested levels.

    ``min_delta`` carries the smallest delta that would make the
    construction feasible with everything else held fixed, when known.
    """

    def __init__(self, message: str, min_delta: float | None = None):
        super().__init__(message)
        self.min_delta = min_delta


class FitError(UqError):
    """Optimization failed to produce a usable fit."""
