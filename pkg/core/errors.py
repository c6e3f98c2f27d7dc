"""
Seafloor mixture error types
Data problems map to CLI exit code 2, numerical failures to exit code 3
"""
from typing import Optional


class SeafloorError(Exception):
    """Base class for every error raised by this package"""
    exit_code = 2


class DataError(SeafloorError, ValueError):
    """Input data or parameters violate a precondition"""
    exit_code = 2


class NumericalError(SeafloorError, ArithmeticError):
    """A computation produced a non-finite or otherwise unusable result"""
    exit_code = 3


class DomainError(DataError):
    """Argument outside the domain of a density, PFA or special function"""


class InsufficientData(DataError):
    """Too few samples for the requested number of mixture components"""


class OutOfBounds(DataError):
    """Tile specification does not fit inside the source grid"""


class GridFormatError(DataError):
    """Grid payload or header cannot be read"""


class MissingHeader(GridFormatError):
    pass


class ShapeMismatch(GridFormatError):
    pass


class InvalidQuantity(GridFormatError):
    pass


class ReportMismatch(DataError):
    """Fit report does not belong to the supplied data"""


class ModelSpecError(DataError):
    """Model-spec file failed to parse or validate"""

    def __init__(self, message: str, line: Optional[int] = None, field: Optional[str] = None):
        self.message = message
        self.line = line
        self.field = field
        where = []
        if line is not None:
            where.append(f"line {line}")
        if field:
            where.append(field)
        prefix = f"{', '.join(where)}: " if where else ""
        super().__init__(f"{prefix}{message}")


class NonFiniteLikelihood(NumericalError):
    """Some sample has zero density under every mixture component"""


class DegenerateComponentWarning(UserWarning):
    """A mixture weight stayed pinned at the weight floor"""
