"""
Problem-file schema (schema_version 1).

A problem file is one JSON object:

    {
      "schema_version": 1,
      "timescale": {"type": "uniform", "start": 0, "stop": 10, "step": 1},
      "equation": {"kind": "second", "lambda": 1, "kernel": "1", "forcing": "1"},
      "solver": {"method": ["direct", "picard"], "tol": 1e-10}
    }

Unknown keys are rejected at every level. Expression fields are parsed
during validation, so a bad formula is a schema error with the field path.
"""

from __future__ import annotations

from typing import Annotated, Literal, Optional, Union

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from src.errors import ExprError
from src.exprlang.nodes import free_variables
from src.exprlang.parser import parse
from src.timescale.scale import TimeScaleSpec
from src.volterra2.problems import METHODS


def _check_expr(text: str, allowed: frozenset[str]) -> str:
    try:
        expr = parse(text)
    except ExprError as exc:
        raise ValueError(f"{exc} in {text!r}") from exc
    extra = free_variables(expr) - allowed
    if extra:
        raise ValueError(f"{text!r} uses {', '.join(sorted(extra))}, allowed here: {', '.join(sorted(allowed))}")
    return text


OVER_T = frozenset({"t", "a", "b"})
OVER_TS = frozenset({"t", "s", "a", "b"})
OVER_TSX = frozenset({"t", "s", "x", "a", "b"})


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid", populate_by_name=True)


class SolverBlock(_Strict):
    method: list[Literal["direct", "neumann", "picard", "resolvent"]] = Field(
        default_factory=lambda: ["direct"]
    )
    tol: Optional[float] = Field(default=None, gt=0)
    max_terms: Optional[int] = Field(default=None, ge=1)
    max_iter: Optional[int] = Field(default=None, ge=1)
    picard_initial: Optional[str] = None

    @field_validator("method", mode="before")
    @classmethod
    def _one_or_many(cls, v):
        return [v] if isinstance(v, str) else v

    @field_validator("picard_initial")
    @classmethod
    def _initial(cls, v: Optional[str]) -> Optional[str]:
        return None if v is None else _check_expr(v, OVER_T)


class SecondKindEquation(_Strict):
    kind: Literal["second"]
    lam: float = Field(alias="lambda")
    kernel: str
    forcing: str

    @field_validator("kernel")
    @classmethod
    def _kernel(cls, v: str) -> str:
        return _check_expr(v, OVER_TS)

    @field_validator("forcing")
    @classmethod
    def _forcing(cls, v: str) -> str:
        return _check_expr(v, OVER_T)


class FirstKindEquation(_Strict):
    kind: Literal["first"]
    kernel: str
    forcing: str

    @field_validator("kernel")
    @classmethod
    def _kernel(cls, v: str) -> str:
        return _check_expr(v, OVER_TS)

    @field_validator("forcing")
    @classmethod
    def _forcing(cls, v: str) -> str:
        return _check_expr(v, OVER_T)


class NonlinearEquation(_Strict):
    kind: Literal["nonlinear"]
    lam: float = Field(alias="lambda")
    F: str
    forcing: str
    lipschitz_L: float = Field(ge=0)
    bound_M: float = Field(ge=0)
    domain_alpha: float = Field(gt=0)

    @field_validator("F")
    @classmethod
    def _integrand(cls, v: str) -> str:
        return _check_expr(v, OVER_TSX)

    @field_validator("forcing")
    @classmethod
    def _forcing(cls, v: str) -> str:
        return _check_expr(v, OVER_T)


class SystemEquation(_Strict):
    kind: Literal["system"]
    lam: float = Field(alias="lambda")
    kernels: list[list[str]]
    forcings: list[str]

    @model_validator(mode="after")
    def _square(self) -> "SystemEquation":
        m = len(self.forcings)
        if m == 0 or len(self.kernels) != m or any(len(row) != m for row in self.kernels):
            raise ValueError(f"kernels must be a {m} x {m} matrix matching {m} forcings")
        for row in self.kernels:
            for k in row:
                _check_expr(k, OVER_TS)
        for f in self.forcings:
            _check_expr(f, OVER_T)
        return self


class IVPEquation(_Strict):
    kind: Literal["ivp"]
    order: int = Field(ge=1)
    p: list[str]
    q: str
    y0: list[float]
    s: Optional[float] = None
    convention: Literal["at_s", "at_sigma_s"] = "at_s"

    @model_validator(mode="after")
    def _lengths(self) -> "IVPEquation":
        if len(self.p) != self.order or len(self.y0) != self.order:
            raise ValueError(f"order {self.order} needs {self.order} entries in p and y0")
        for pk in self.p:
            _check_expr(pk, OVER_T)
        _check_expr(self.q, OVER_T)
        return self


class ConvolutionEquation(_Strict):
    """φ(t) = λ∫_a^t K̂(t,σ(η))φ(η)Δη + f(t); `kernel` is K as a function of t."""

    kind: Literal["convolution"]
    lam: float = Field(alias="lambda")
    kernel: str
    forcing: str

    @field_validator("kernel", "forcing")
    @classmethod
    def _over_t(cls, v: str) -> str:
        return _check_expr(v, OVER_T)


Equation = Annotated[
    Union[
        SecondKindEquation,
        FirstKindEquation,
        NonlinearEquation,
        SystemEquation,
        IVPEquation,
        ConvolutionEquation,
    ],
    Field(discriminator="kind"),
]


class ProblemFile(_Strict):
    schema_version: Literal[1]
    timescale: TimeScaleSpec
    equation: Equation
    solver: SolverBlock = Field(default_factory=SolverBlock)

    @model_validator(mode="after")
    def _methods_fit_kind(self) -> "ProblemFile":
        kind = self.equation.kind
        allowed = {
            "second": set(METHODS),
            "convolution": set(METHODS),
            "nonlinear": {"direct", "picard"},
            "system": {"direct", "picard"},
            "first": {"direct"},
            "ivp": {"direct"},
        }[kind]
        bad = [m for m in self.solver.method if m not in allowed]
        if bad:
            raise ValueError(f"method(s) {', '.join(bad)} not available for kind {kind!r}")
        return self
