"""
Problem and report types for second-kind equations.

    φ(t) = λ ∫_a^t K(t,η) φ(η) Δη + f(t)

Kernels and forcings are accepted either as parsed expressions or as
table-backed values (KernelTable / GridFunction). Either way they are swept
over the grid once, at construction, so an unevaluable kernel fails early
and solvers only ever touch arrays.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Any, Literal, Sequence, Union

import numpy as np

from src.config.settings import get_settings
from src.errors import EvalError, InvalidProblem, TimeScaleError
from src.exprlang.evaluate import EvalEnv, evaluate, sample_function, sample_kernel
from src.exprlang.nodes import BinOp, Call, Expr, Neg, Num, Pow, Var
from src.timescale.scale import GridFunction, KernelTable, TimeScale

logger = logging.getLogger(__name__)

KernelLike = Union[Expr, KernelTable]
FunctionLike = Union[Expr, GridFunction, float, int]

Method = Literal["direct", "neumann", "picard", "resolvent"]
METHODS: tuple[str, ...] = ("direct", "neumann", "picard", "resolvent")

_EXPR_TYPES = (Num, Var, Neg, BinOp, Pow, Call)


def sample_over_t(ts: TimeScale, value: FunctionLike, *, what: str = "forcing") -> np.ndarray:
    """Grid values of a function of t given as expression, table or constant."""
    if isinstance(value, GridFunction):
        if not ts.same_points(value.ts):
            raise InvalidProblem(f"{what} lives on a different time scale")
        return np.asarray(value.values)
    if isinstance(value, _EXPR_TYPES):
        return np.asarray(sample_function(value, ts, what=what).values)
    return np.full(ts.size, float(value))


def sample_over_ts(ts: TimeScale, value: KernelLike, *, what: str = "kernel") -> KernelTable:
    """Kernel table of a function of (t, s) given as expression or table."""
    if isinstance(value, KernelTable):
        if not ts.same_points(value.ts):
            raise InvalidProblem(f"{what} lives on a different time scale")
        return value
    if isinstance(value, _EXPR_TYPES):
        return sample_kernel(value, ts, what=what)
    raise InvalidProblem(f"{what} must be an expression or a KernelTable, got {type(value).__name__}")


@dataclass(frozen=True)
class SolverOptions:
    """
    Per-run solver knobs. Defaults come from SolverSettings.

    tol:
        Agreement / convergence tolerance, applied as tol * (1 + max|φ|).
    max_terms:
        Neumann series terms (φ_0 included) before Truncated is raised.
    max_iter:
        Picard iterations before MaxIterations is raised.
    """

    tol: float = field(default_factory=lambda: get_settings().tol)
    max_terms: int = field(default_factory=lambda: get_settings().max_terms)
    max_iter: int = field(default_factory=lambda: get_settings().max_iter)


@dataclass(frozen=True, eq=False)
class ProblemSpec:
    """
    One second-kind equation on a time scale.

    The kernel is swept over every pair i >= j and the forcing over every
    point at construction; `kernel_table` and `forcing_values` hold the result.
    """

    ts: TimeScale
    lam: float
    kernel: KernelLike
    forcing: FunctionLike
    options: SolverOptions = field(default_factory=SolverOptions)
    picard_initial: FunctionLike | None = None

    def __post_init__(self) -> None:
        if not np.isfinite(self.lam):
            raise InvalidProblem(f"lambda must be finite, got {self.lam!r}")
        object.__setattr__(self, "lam", float(self.lam))
        object.__setattr__(self, "kernel_table", sample_over_ts(self.ts, self.kernel))
        object.__setattr__(self, "forcing_values", sample_over_t(self.ts, self.forcing))
        if self.picard_initial is None:
            initial = self.forcing_values
        else:
            initial = sample_over_t(self.ts, self.picard_initial, what="picard_initial")
        object.__setattr__(self, "initial_values", initial)

    # Populated in __post_init__.
    kernel_table: KernelTable = field(init=False, repr=False)
    forcing_values: np.ndarray = field(init=False, repr=False)
    initial_values: np.ndarray = field(init=False, repr=False)

    @property
    def forcing_function(self) -> GridFunction:
        return GridFunction(ts=self.ts, values=self.forcing_values)


@dataclass(frozen=True, eq=False)
class SystemProblem:
    """
    m coupled equations φ_p = λ Σ_q ∫ K_pq φ_q + f_p.

    `kernel_tensor` has shape (m, m, N, N); `forcing_matrix` has shape (m, N).
    """

    ts: TimeScale
    lam: float
    kernels: Sequence[Sequence[KernelLike]]
    forcings: Sequence[FunctionLike]
    options: SolverOptions = field(default_factory=SolverOptions)

    kernel_tensor: np.ndarray = field(init=False, repr=False)
    forcing_matrix: np.ndarray = field(init=False, repr=False)

    def __post_init__(self) -> None:
        m = len(self.forcings)
        if m == 0:
            raise InvalidProblem("a system needs at least one equation")
        if len(self.kernels) != m or any(len(row) != m for row in self.kernels):
            raise InvalidProblem(f"kernel matrix must be {m} x {m}")
        n = self.ts.size
        tensor = np.zeros((m, m, n, n))
        for p_idx, row in enumerate(self.kernels):
            for q_idx, k in enumerate(row):
                table = sample_over_ts(self.ts, k, what=f"kernel[{p_idx}][{q_idx}]")
                tensor[p_idx, q_idx] = table.entries
        forcing = np.vstack(
            [sample_over_t(self.ts, f, what=f"forcing[{p_idx}]") for p_idx, f in enumerate(self.forcings)]
        )
        tensor.setflags(write=False)
        forcing.setflags(write=False)
        object.__setattr__(self, "lam", float(self.lam))
        object.__setattr__(self, "kernel_tensor", tensor)
        object.__setattr__(self, "forcing_matrix", forcing)

    @property
    def m(self) -> int:
        return int(self.forcing_matrix.shape[0])


# Sample sizes for the nonlinear spot checks.
SPOT_POINTS = 10
SPOT_VALUES = 10


@dataclass(frozen=True, eq=False)
class NonlinearProblem:
    """
    φ(t) = λ ∫_a^t F(t, η, φ(η)) Δη + f(t)

    lipschitz_L / bound_M are declared by the caller for |x| <= domain_alpha
    and spot-checked on a 10 x 10 x 10 sample at construction.
    """

    ts: TimeScale
    lam: float
    F: Expr
    forcing: FunctionLike
    lipschitz_L: float
    bound_M: float
    domain_alpha: float
    options: SolverOptions = field(default_factory=SolverOptions)
    picard_initial: FunctionLike | None = None

    forcing_values: np.ndarray = field(init=False, repr=False)
    initial_values: np.ndarray = field(init=False, repr=False)
    spot_max_F: float = field(init=False)
    spot_max_slope: float = field(init=False)

    def __post_init__(self) -> None:
        if self.lipschitz_L < 0 or self.bound_M < 0 or self.domain_alpha <= 0:
            raise InvalidProblem("need lipschitz_L >= 0, bound_M >= 0 and domain_alpha > 0")
        object.__setattr__(self, "lam", float(self.lam))
        object.__setattr__(self, "forcing_values", sample_over_t(self.ts, self.forcing))
        if self.picard_initial is None:
            initial = self.forcing_values
        else:
            initial = sample_over_t(self.ts, self.picard_initial, what="picard_initial")
        object.__setattr__(self, "initial_values", initial)
        max_f, max_slope = self._spot_check()
        object.__setattr__(self, "spot_max_F", max_f)
        object.__setattr__(self, "spot_max_slope", max_slope)

    def F_value(self, i: int, j: int, x: float) -> float:
        t, s = float(self.ts.points[i]), float(self.ts.points[j])
        try:
            return evaluate(self.F, EvalEnv(ts=self.ts, t=t, s=s, x=float(x)))
        except TimeScaleError as exc:
            raise EvalError(f"F not evaluable at (t={t!r}, s={s!r}, x={x!r}): {exc}") from exc

    def _spot_check(self) -> tuple[float, float]:
        n = self.ts.size
        idx = np.unique(np.linspace(0, n - 1, min(SPOT_POINTS, n)).round().astype(int))
        xs = np.linspace(-self.domain_alpha, self.domain_alpha, SPOT_VALUES)
        max_f = 0.0
        max_slope = 0.0
        for i in idx:
            for j in idx:
                if j > i:
                    continue
                vals = np.array([self.F_value(int(i), int(j), x) for x in xs])
                max_f = max(max_f, float(np.max(np.abs(vals))))
                dv = np.abs(vals[:, None] - vals[None, :])
                dx = np.abs(xs[:, None] - xs[None, :])
                off = dx > 0
                max_slope = max(max_slope, float(np.max(dv[off] / dx[off])))
        if max_f > self.bound_M * (1.0 + 1e-12) + 1e-12:
            raise InvalidProblem(
                f"declared bound_M={self.bound_M!r} is exceeded on the sample (max |F| = {max_f!r})"
            )
        if max_slope > self.lipschitz_L * (1.0 + 1e-9) + 1e-12:
            raise InvalidProblem(
                f"declared lipschitz_L={self.lipschitz_L!r} is exceeded on the sample (slope {max_slope!r})"
            )
        logger.debug("TSV_NONLINEAR_SPOT_OK max_F=%.3e max_slope=%.3e", max_f, max_slope)
        return max_f, max_slope

    def guaranteed_endpoint(self) -> tuple[float, int]:
        """(δ, index of c) with δ = min(b - a, α/M) and c = max [a, a + δ]_T."""
        span = self.ts.b - self.ts.a
        delta = span if self.bound_M == 0 else min(span, self.domain_alpha / self.bound_M)
        limit = self.ts.a + delta
        slack = 1e-12 * max(1.0, abs(limit))
        ic = int(np.searchsorted(self.ts.points, limit + slack, side="right")) - 1
        return float(delta), max(ic, 0)


@dataclass(frozen=True, eq=False)
class SolveReport:
    """
    Result of one solver run.

    solution:
        GridFunction, or a tuple of them for systems.
    residual:
        max over the grid of |φ - λ∫Kφ - f|, recomputed independently of
        the solver path.
    bound_checks:
        name -> smallest slack of the inequality (>= 0 means it holds).
    metadata:
        method-specific extras (depth, agreement with direct, domain notes).
    """

    solution: GridFunction | tuple[GridFunction, ...]
    method: str
    terms_or_iterations: int
    residual: float
    residuals: np.ndarray
    bound_checks: dict[str, float] = field(default_factory=dict)
    metadata: dict[str, Any] = field(default_factory=dict)
    warnings: tuple[str, ...] = ()

    @property
    def components(self) -> tuple[GridFunction, ...]:
        if isinstance(self.solution, GridFunction):
            return (self.solution,)
        return tuple(self.solution)

    @property
    def max_abs(self) -> float:
        return max(float(np.max(np.abs(c.values))) for c in self.components)

    def residual_ok(self, tol: float) -> bool:
        return self.residual <= tol * (1.0 + self.max_abs)

    def bounds_ok(self) -> bool:
        return all(v >= 0.0 for v in self.bound_checks.values())
