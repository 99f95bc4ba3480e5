"""Exception hierarchy for the SSRT pipeline."""

from typing import Any, Dict, Optional


class SsrtError(Exception):
    """Base class for every error raised by this package."""


class ParameterDomainError(SsrtError, ValueError):
    """A parameter, probability or sample lies outside its domain."""


class DesignError(SsrtError, ValueError):
    """A simulation design cannot produce a usable session."""


class PreconditionError(SsrtError, ValueError):
    """The data are too small or too degenerate for the requested estimator."""


class EstimatorUndefinedError(SsrtError, ValueError):
    """The estimator is undefined for these data (e.g. P(SI) of 0 or 1)."""


class NumericalError(SsrtError, ArithmeticError):
    def __init__(self, message: str, diagnostics: Optional[Dict[str, Any]] = None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}


class DataFormatError(SsrtError, ValueError):
    def __init__(self, message: str, line: Optional[int] = None):
        location = f" (line {line})" if line is not None else ""
        super().__init__(f"{message}{location}")
        self.line = line


class SchemaVersionError(SsrtError, ValueError):
    def __init__(self, found: Any, expected: int):
        super().__init__(f"Unsupported schema_version {found!r}; expected {expected}")
        self.found = found
        self.expected = expected
