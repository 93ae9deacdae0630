"""Exception hierarchy shared by all modules.

Validation problems derive from :class:`ValueError` so that callers who only
care about "bad input" can catch the builtin type.  Numerical failures carry
the diagnostics needed to understand them (smallest eigenvalue, condition
number) and map to a distinct CLI exit code.
"""

from __future__ import annotations


class KslError(Exception):
    """Base class for every error raised by this package."""

    prefix = "error"

    def __str__(self) -> str:
        return f"{self.prefix}: {super().__str__()}"


class ValidationError(KslError, ValueError):
    """Input violates a documented precondition."""

    prefix = "validation"


class DimensionMismatchError(ValidationError):
    """Point dimensions disagree with each other or with a kernel."""

    prefix = "dimension"


class ParseError(ValidationError):
    """Malformed CSV or JSON input."""

    prefix = "parse"


class NumericalError(KslError, ArithmeticError):
    """A computation could not be carried out in floating point.

    Parameters
    ----------
    message : str
        Human readable description.
    min_eig : float, optional
        Smallest eigenvalue of the offending matrix, when known.
    cond : float, optional
        Condition number of the offending matrix, when known.
    """

    prefix = "numerical"

    def __init__(self, message: str, min_eig: float | None = None, cond: float | None = None):
        super().__init__(message)
        self.min_eig = min_eig
        self.cond = cond

    def __str__(self) -> str:
        text = super().__str__()
        extra = []
        if self.min_eig is not None:
            extra.append(f"min_eig={self.min_eig!r}")
        if self.cond is not None:
            extra.append(f"cond={self.cond!r}")
        return text + (f" ({', '.join(extra)})" if extra else "")
