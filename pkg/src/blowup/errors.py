"""Exception hierarchy shared across the library."""

from __future__ import annotations


class BlowupError(Exception):
    """Base class for all library errors."""


class InvalidParameterError(BlowupError, ValueError):
    """A constructor or operation precondition was violated."""


class SingularIntegrandError(BlowupError, ArithmeticError):
    """The dichotomy integrand is undefined (h(s) <= 0) at some point.

    Carries the offending abscissa in ``where``.
    """

    def __init__(self, message: str, where: float | None = None):
        super().__init__(message)
        self.where = where


class NumericFailureError(BlowupError, ArithmeticError):
    """A numeric routine produced non-finite values or otherwise failed."""


class FiniteEscapeError(BlowupError, ArithmeticError):
    """The quadrature majorant itself escapes to infinity in finite time.

    ``escape_time`` is the (estimated) finite limit of the inverted
    integral; requests for times at or beyond it have no solution.
    """

    def __init__(self, message: str, escape_time: float):
        super().__init__(message)
        self.escape_time = escape_time


class BracketFailureError(BlowupError, ArithmeticError):
    """Monotone bracketing failed to enclose a root."""


class InternalConsistencyError(BlowupError, RuntimeError):
    """An internal invariant was violated (e.g. decreasing escape times)."""


class ConfigError(BlowupError, ValueError):
    """Config text failed to parse or validate.

    ``errors`` is the full list of per-line messages.
    """

    def __init__(self, errors: list[str]):
        super().__init__("; ".join(errors))
        self.errors = list(errors)


class StageError(BlowupError, RuntimeError):
    """Failure inside a pipeline stage, labelled with the stage name."""

    def __init__(self, stage: str, cause: BaseException):
        super().__init__(f"stage '{stage}' failed: {cause}")
        self.stage = stage
        self.cause = cause
