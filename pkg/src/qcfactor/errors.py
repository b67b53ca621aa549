"""Shared exception types."""


class QcFactorError(Exception):
    """Base class for all package errors."""


class DomainError(QcFactorError, ValueError):
    """An argument is outside the documented domain of an operation."""


class ParseError(QcFactorError, ValueError):
    """A file or text payload is malformed."""


class ConstructionError(QcFactorError, RuntimeError):
    """A constructive search failed within its budget."""


class EstimationError(QcFactorError, RuntimeError):
    """An estimator could not locate a solution (e.g. no sign change)."""
