"""Exception hierarchy.

Every failure raised by the library derives from :class:`CaaError`, so
callers can catch one type.  The CLI turns these into a single structured
line on stderr using :attr:`CaaError.kind`.
"""
from __future__ import annotations


class CaaError(Exception):
    """Base class for all library errors."""

    @property
    def kind(self) -> str:
        return type(self).__name__


class NonFinite(CaaError, ValueError):
    """Input contains NaN or infinite values."""


class DimensionMismatch(CaaError, ValueError):
    """Shapes of the inputs are incompatible."""


class InsufficientData(CaaError, ValueError):
    """Too few rows to estimate the requested quantity."""


class ConstantColumn(CaaError, ValueError):
    """A column has zero sample variance and cannot be standardized."""

    def __init__(self, column: int, name: str | None = None):
        self.column = column
        self.name = name
        label = f"{column}" if name is None else f"{column} ({name})"
        super().__init__(f"column {label} has zero variance")


class ConvergenceFailure(CaaError, RuntimeError):
    """An iterative routine did not converge."""


class ZeroVector(CaaError, ValueError):
    """An operation needs a vector with at least one nonzero entry."""


class ZeroMatrix(CaaError, ValueError):
    """An operation needs a matrix with at least one nonzero entry."""


class InvalidSpec(CaaError, ValueError):
    """A configuration or generator parameter is out of range."""


class NoPairsFound(CaaError, RuntimeError):
    """No canonical pair reached the relative sparseness target."""


class DegenerateProjection(CaaError, ValueError):
    """A pair projection has a singular covariance or constant coordinate."""


class SingleClass(CaaError, ValueError):
    """Evaluation needs both classes present."""


class SchemaError(CaaError, ValueError):
    """A file parsed correctly but its content does not fit the schema."""


class ParseError(CaaError, ValueError):
    """A file could not be parsed."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        where = "" if line is None else f"line {line}: "
        super().__init__(f"{where}{message}")


class ConfigError(CaaError, ValueError):
    """A configuration file or flag is invalid."""
