"""
Error types for the EHE engine
Every failure raised by the library derives from EheError
"""

from typing import Any, Dict, Optional


class EheError(Exception):
    """Base class for all engine errors"""


class DimensionError(EheError, ValueError):
    """Vector, polynomial or circuit sizes do not agree"""


class ParameterError(EheError, ValueError):
    """A parameter is outside its admissible range"""


class UnsupportedOperationError(EheError):
    """The operation is not defined for this key or configuration"""


class SamplingError(EheError):
    """Rejection sampling ran out of retries"""

    def __init__(self, constraint: str, retries: int):
        super().__init__(f"sampling failed after {retries} retries: {constraint}")
        self.constraint = constraint
        self.retries = retries


class KeygenError(EheError):
    """Key generation could not satisfy its degree or budget targets"""

    def __init__(self, message: str, diagnostics: Optional[Dict[str, Any]] = None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}


class BudgetExceededError(EheError):
    """A polynomial grew past the monomial budget"""

    def __init__(self, where: str, count: int, budget: int):
        super().__init__(f"{where}: {count} monomials exceeds budget {budget}")
        self.where = where
        self.count = count
        self.budget = budget


class FormatError(EheError):
    """Base class for file format errors"""


class BadMagicError(FormatError):
    """File does not start with the EHE magic"""


class VersionMismatchError(FormatError):
    """File was written by an unsupported format version"""


class TruncatedDataError(FormatError):
    """File ended before the declared payload"""


class KindMismatchError(FormatError):
    """File holds a different artefact kind than requested"""
