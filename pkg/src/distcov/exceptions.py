"""Exception hierarchy.

Data problems (bad input values) derive from :class:`DataError`; the CLI maps
them to exit code 2. Everything here is also a ``ValueError`` so callers that
already catch that keep working.
"""
from __future__ import annotations


class DistcovError(ValueError):
    """Base class for all package errors."""


class DataError(DistcovError):
    """Input data violates a precondition."""


class NonFiniteError(DataError):
    """NaN or infinity found in the input."""


class NotSquareError(DataError):
    """A distance matrix is not square."""


class AsymmetryError(DataError):
    """A distance matrix is not symmetric within tolerance."""


class NegativeDistanceError(DataError):
    """A distance matrix has a negative entry."""


class NonzeroDiagonalError(DataError):
    """A distance matrix has a diagonal entry away from zero."""


class DimensionMismatchError(DataError):
    """Two inputs that must share a sample size (or dimension) do not."""


class EmptySampleError(DataError):
    """A sample has no observations."""


class DomainError(DistcovError):
    """An estimator was called outside the sample sizes it is defined for."""


class DegenerateSampleError(DataError):
    """A normaliser is zero, typically because a sample is constant."""


class ModelError(DataError):
    """A linear model cannot be estimated (e.g. rank deficient design)."""


class InternalConsistencyError(DistcovError):
    """Floating point results left their mathematically guaranteed range."""
