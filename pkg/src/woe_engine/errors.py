"""Semantic exception hierarchy shared across the package.

Every error raised on purpose derives from :class:`EngineError`, so callers
can catch one type at an API boundary (the CLI maps these to exit code 2).
"""

from __future__ import annotations


class EngineError(Exception):
    """Base class for all errors raised by this package."""


class InvalidDataError(EngineError, ValueError):
    """Input values violate a documented precondition (non-finite, out of range)."""


class DimensionError(InvalidDataError):
    """Vector or matrix shape does not match the model dimension."""


class UnderpopulatedClassError(InvalidDataError):
    """A class has too few samples to estimate its statistics."""


class SingularCovarianceError(EngineError):
    """A (conditional) covariance block is singular or not positive-definite."""


class NoAlternativesError(EngineError):
    """The alternative-hypothesis set is empty; a mixture cannot be formed."""


class InvalidDistributionError(InvalidDataError):
    """A probability vector has negative entries or does not sum to one."""


class DegenerateTargetError(InvalidDataError):
    """A target variable is constant and cannot be discretized by quantiles."""


class IngestionError(EngineError):
    """A data file violates its format; the message carries the location."""


class DocumentError(EngineError):
    """A persisted document cannot be parsed or fails validation."""


class VersionMismatchError(DocumentError):
    """A document declares an unsupported format version."""


class IntegrityError(DocumentError):
    """A document parsed but its contents violate a model invariant."""
