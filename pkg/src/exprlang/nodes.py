"""
Expression syntax tree.

Nodes are frozen dataclasses, so structural equality is plain `==`.
`to_text` prints a fully parenthesised form that parses back to an equal tree.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Union

VARIABLES = frozenset({"t", "s", "x", "a", "b"})

# name -> arity
FUNCTIONS: dict[str, int] = {
    "sigma": 1,
    "mu": 1,
    "hk": 3,
    "e": 3,
    "cos1": 2,
    "sin1": 2,
    "m": 3,
    "abs": 1,
}


@dataclass(frozen=True)
class Num:
    value: float


@dataclass(frozen=True)
class Var:
    name: str


@dataclass(frozen=True)
class Neg:
    operand: "Expr"


@dataclass(frozen=True)
class BinOp:
    op: str  # one of + - * /
    left: "Expr"
    right: "Expr"


@dataclass(frozen=True)
class Pow:
    base: "Expr"
    exponent: int


@dataclass(frozen=True)
class Call:
    name: str
    args: tuple["Expr", ...]


Expr = Union[Num, Var, Neg, BinOp, Pow, Call]


def to_text(expr: Expr) -> str:
    """Fully parenthesised text with shortest round-trip float literals."""
    if isinstance(expr, Num):
        text = repr(float(expr.value))
        return f"({text})" if expr.value < 0 else text
    if isinstance(expr, Var):
        return expr.name
    if isinstance(expr, Neg):
        return f"(-{to_text(expr.operand)})"
    if isinstance(expr, BinOp):
        return f"({to_text(expr.left)} {expr.op} {to_text(expr.right)})"
    if isinstance(expr, Pow):
        return f"({to_text(expr.base)}^{expr.exponent})"
    if isinstance(expr, Call):
        return f"{expr.name}(" + ", ".join(to_text(a) for a in expr.args) + ")"
    raise TypeError(f"not an expression node: {expr!r}")


def free_variables(expr: Expr) -> frozenset[str]:
    if isinstance(expr, Num):
        return frozenset()
    if isinstance(expr, Var):
        return frozenset({expr.name})
    if isinstance(expr, Neg):
        return free_variables(expr.operand)
    if isinstance(expr, BinOp):
        return free_variables(expr.left) | free_variables(expr.right)
    if isinstance(expr, Pow):
        return free_variables(expr.base)
    if isinstance(expr, Call):
        out: frozenset[str] = frozenset()
        for arg in expr.args:
            out |= free_variables(arg)
        return out
    raise TypeError(f"not an expression node: {expr!r}")
