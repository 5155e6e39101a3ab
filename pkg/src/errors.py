"""
Exception hierarchy for the time-scale Volterra toolkit.

Every error raised on purpose by the library derives from `VolterraError`.
The CLI maps families to exit codes:
- ExprError and ProblemFileError          -> 2
- everything else deriving VolterraError    -> 3
"""

from __future__ import annotations

from typing import Any, Sequence


class VolterraError(Exception):
    """Base class for all library errors."""


# ---------------------------------------------------------------------
# timescale
# ---------------------------------------------------------------------


class TimeScaleError(VolterraError):
    pass


class EmptyScale(TimeScaleError):
    pass


class NonMonotone(TimeScaleError):
    pass


class NotAPoint(TimeScaleError):
    def __init__(self, value: float, message: str | None = None) -> None:
        self.value = value
        super().__init__(message or f"{value!r} is not a point of the time scale")


class KappaBoundary(TimeScaleError):
    pass


class NotRegressive(TimeScaleError):
    pass


class DivisionByZero(TimeScaleError):
    pass


class BackwardUnsupported(TimeScaleError):
    pass


# ---------------------------------------------------------------------
# exprlang
# ---------------------------------------------------------------------


class ExprError(VolterraError):
    pass


class ExprSyntaxError(ExprError):
    """
    Raised by the parser.

    Attributes:
        offset: 1-based character position of the offending token
            (len(text) + 1 for an unexpected end of input).
        expected: human readable description of what the parser wanted.
    """

    def __init__(self, offset: int, expected: str, text: str = "") -> None:
        self.offset = offset
        self.expected = expected
        self.text = text
        super().__init__(f"syntax error at offset {offset}: expected {expected}")


class UnknownFunction(ExprError):
    def __init__(self, name: str, offset: int) -> None:
        self.name = name
        self.offset = offset
        super().__init__(f"unknown function {name!r} at offset {offset}")


class BadArity(ExprError):
    def __init__(self, name: str, expected: int, got: int, offset: int) -> None:
        self.name = name
        self.expected = expected
        self.got = got
        self.offset = offset
        super().__init__(
            f"{name}() takes {expected} argument(s), got {got} (offset {offset})"
        )


class EvalError(VolterraError):
    pass


class UnboundVariable(EvalError):
    def __init__(self, name: str) -> None:
        self.name = name
        super().__init__(f"variable {name!r} is not bound")


class BadArgument(EvalError):
    pass


# ---------------------------------------------------------------------
# problems / solvers
# ---------------------------------------------------------------------


class ProblemError(VolterraError):
    pass


class InvalidProblem(ProblemError):
    pass


class ZeroDiagonal(ProblemError):
    def __init__(self, points: Sequence[float]) -> None:
        self.points = list(points)
        super().__init__(
            "kernel diagonal K(sigma(t), t) vanishes at t = "
            + ", ".join(repr(p) for p in self.points)
        )


class NonzeroAtA(ProblemError):
    def __init__(self, value: float) -> None:
        self.value = value
        super().__init__(f"first-kind forcing must vanish at a, got f(a) = {value!r}")


class OrderTooHigh(ProblemError):
    pass


class LambdaZero(ProblemError):
    pass


class SolverError(VolterraError):
    pass


class Truncated(SolverError):
    def __init__(self, message: str, *, report: Any, tail_bound: float) -> None:
        self.report = report
        self.tail_bound = tail_bound
        super().__init__(f"{message} (tail bound {tail_bound:.3e})")


class MaxIterations(SolverError):
    pass


class DomainExit(SolverError):
    def __init__(self, t: float, value: float, alpha: float) -> None:
        self.t = t
        self.value = value
        self.alpha = alpha
        super().__init__(
            f"iterate left |x| <= {alpha!r} at t = {t!r} (value {value!r})"
        )


# ---------------------------------------------------------------------
# files
# ---------------------------------------------------------------------


class ProblemFileError(VolterraError):
    """
    Unreadable or schema-invalid input file.

    Attributes:
        line / column / offset: position of a JSON syntax error (1-based line
            and column, 0-based byte offset), None for schema errors.
    """

    def __init__(
        self,
        message: str,
        *,
        line: int | None = None,
        column: int | None = None,
        offset: int | None = None,
    ) -> None:
        self.line = line
        self.column = column
        self.offset = offset
        super().__init__(message)


class CandidateFileError(ProblemFileError):
    """Candidate CSV does not match the problem's grid."""
