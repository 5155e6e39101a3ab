"""
Evaluation of parsed formulas against a time scale.

Builtins delegate to `src.timescale.calculus`:
    sigma(u), mu(u)   -> jump
    hk(k, u, v)       -> monomial
    e(c, u, v)        -> exp_general with constant c
    cos1(u, v)        -> trig(λ=1), cosine part (t < s allowed)
    sin1(u, v)        -> trig(λ=1), sine part
    m(c, u, v)        -> mfunc

The sampling helpers sweep an expression over the grid once and return
GridFunction / KernelTable values; a failure at any grid point is reported
as EvalError naming that point. NotRegressive passes through unchanged so
callers can tell a singular exponential from a malformed formula.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np

from src.errors import (
    BadArgument,
    DivisionByZero,
    EvalError,
    NotRegressive,
    TimeScaleError,
    UnboundVariable,
)
from src.exprlang.nodes import BinOp, Call, Expr, Neg, Num, Pow, Var
from src.timescale import calculus
from src.timescale.scale import GridFunction, KernelTable, TimeScale

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class EvalEnv:
    """Bindings for one evaluation; t and s must be member points when bound."""

    ts: TimeScale
    t: float | None = None
    s: float | None = None
    x: float | None = None

    def __post_init__(self) -> None:
        for name in ("t", "s"):
            value = getattr(self, name)
            if value is not None:
                self.ts.index_of(value)


def _as_order(value: float) -> int:
    if not float(value).is_integer() or value < 0:
        raise BadArgument(f"hk order must be a nonnegative integer, got {value!r}")
    return int(value)


def _eval(node: Expr, env: EvalEnv) -> float:
    if isinstance(node, Num):
        return node.value

    if isinstance(node, Var):
        if node.name == "a":
            return env.ts.a
        if node.name == "b":
            return env.ts.b
        value = getattr(env, node.name)
        if value is None:
            raise UnboundVariable(node.name)
        return float(value)

    if isinstance(node, Neg):
        return -_eval(node.operand, env)

    if isinstance(node, BinOp):
        left = _eval(node.left, env)
        right = _eval(node.right, env)
        if node.op == "+":
            return left + right
        if node.op == "-":
            return left - right
        if node.op == "*":
            return left * right
        if right == 0.0:
            raise DivisionByZero("division by zero in expression")
        return left / right

    if isinstance(node, Pow):
        base = _eval(node.base, env)
        try:
            return base ** node.exponent
        except OverflowError as exc:
            raise EvalError(f"overflow in {base!r}^{node.exponent}") from exc

    if isinstance(node, Call):
        args = [_eval(arg, env) for arg in node.args]
        ts = env.ts
        name = node.name
        if name == "sigma":
            return calculus.jump(ts, args[0]).sigma
        if name == "mu":
            return calculus.jump(ts, args[0]).mu
        if name == "hk":
            return calculus.monomial(ts, _as_order(args[0]), args[1], args[2])
        if name == "e":
            return calculus.exp_general(ts, args[0], args[1], args[2])
        if name == "cos1":
            return calculus.trig(ts, 1.0, args[0], args[1], backward=True)[0]
        if name == "sin1":
            return calculus.trig(ts, 1.0, args[0], args[1], backward=True)[1]
        if name == "m":
            return calculus.mfunc(ts, args[0], args[1], args[2])
        if name == "abs":
            return abs(args[0])
        raise EvalError(f"no evaluator for builtin {name!r}")

    raise TypeError(f"not an expression node: {node!r}")


def evaluate(expr: Expr, env: EvalEnv) -> float:
    """
    Evaluate `expr` under `env`.

    Raises:
        UnboundVariable: t, s or x used but not bound.
        NotAPoint: a builtin argument is off the grid.
        DivisionByZero: literal division by zero.
        NotRegressive: propagated from e(...) or m(...).
        EvalError: non-finite result.
    """
    value = _eval(expr, env)
    if not math.isfinite(value):
        raise EvalError(f"expression produced a non-finite value {value!r}")
    return float(value)


# ---------------------------------------------------------------------
# Grid sweeps
# ---------------------------------------------------------------------


def sample_function(expr: Expr, ts: TimeScale, *, what: str = "forcing") -> GridFunction:
    """Evaluate an expression over t at every point of `ts`."""
    values = np.empty(ts.size)
    for i, t in enumerate(ts.points):
        try:
            values[i] = evaluate(expr, EvalEnv(ts=ts, t=float(t)))
        except NotRegressive:
            raise
        except TimeScaleError as exc:
            raise EvalError(f"{what} not evaluable at t={float(t)!r}: {exc}") from exc
    return GridFunction(ts=ts, values=values)


def sample_kernel(expr: Expr, ts: TimeScale, *, what: str = "kernel") -> KernelTable:
    """Evaluate an expression over (t, s) on the full triangle i >= j."""
    n = ts.size
    entries = np.zeros((n, n))
    pts = ts.points
    for i in range(n):
        for j in range(i + 1):
            t, s = float(pts[i]), float(pts[j])
            try:
                entries[i, j] = evaluate(expr, EvalEnv(ts=ts, t=t, s=s))
            except NotRegressive:
                raise
            except TimeScaleError as exc:
                raise EvalError(f"{what} not evaluable at (t={t!r}, s={s!r}): {exc}") from exc
    logger.debug("TSV_KERNEL_SWEEP_OK what=%s points=%d", what, n)
    return KernelTable(ts=ts, entries=entries)
