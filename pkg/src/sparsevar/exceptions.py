"""Exception types that separate data problems from numerical failures."""

from __future__ import annotations


class DataError(Exception):
    """Raised when input data is malformed: bad schema, missing cells, misaligned series."""


class NumericalError(Exception):
    """Raised when a computation cannot proceed: non-positive-definite matrix,
    unstable dynamics, or a solver that failed to converge where convergence
    is a hard requirement."""
