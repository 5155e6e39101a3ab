"""
First-kind equations ∫_a^t K(t,η) φ(η) Δη = f(t).

Δ-differentiating in t turns the equation into a second-kind one on T^κ:

    K(σ(t),t) φ(t) + ∫_a^t K^{Δ1}(t,η) φ(η) Δη = f^Δ(t)

which is solved by forward substitution after dividing by the diagonal.
The value at b is not determined by the transformed equation and is never
reported; the original equation is still checked at every point, b included.
"""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field

import numpy as np

from src.errors import KappaBoundary, NonzeroAtA, TimeScaleError, ZeroDiagonal
from src.exprlang.evaluate import EvalEnv, evaluate
from src.timescale.scale import GridFunction, KernelTable, TimeScale
from src.volterra2.linear import forward_substitution
from src.volterra2.problems import (
    FunctionLike,
    KernelLike,
    ProblemSpec,
    SolveReport,
    sample_over_t,
    sample_over_ts,
)

logger = logging.getLogger(__name__)

# |f(a)| above this is a genuine nonzero start value.
FA_TOL = 1e-12
# |K(σ(t),t)| at or below this counts as a vanishing diagonal.
DIAGONAL_TOL = 1e-14


@dataclass(frozen=True, eq=False)
class FirstKindProblem:
    ts: TimeScale
    kernel: KernelLike
    forcing: FunctionLike

    kernel_table: KernelTable = field(init=False, repr=False)
    forcing_values: np.ndarray = field(init=False, repr=False)

    def __post_init__(self) -> None:
        object.__setattr__(self, "kernel_table", sample_over_ts(self.ts, self.kernel))
        object.__setattr__(self, "forcing_values", sample_over_t(self.ts, self.forcing))

    def diagonal(self) -> np.ndarray:
        """K(σ(t_i), t_i) for every t_i in T^κ."""
        entries = self.kernel_table.entries
        idx = np.arange(self.ts.size - 1)
        return np.asarray(entries[idx + 1, idx])


def kernel_partial_delta1(ts: TimeScale, kernel: KernelLike, t: float, s: float) -> float:
    """
    K^{Δ1}(t,s) = (K(σ(t),s) - K(t,s)) / μ(t).

    Raises:
        KappaBoundary: t = b.
        NotAPoint: t or s off the grid.
    """
    i, j = ts.index_of(t), ts.index_of(s)
    if i == ts.last:
        raise KappaBoundary(f"K^Δ1 undefined at the right endpoint b={ts.b!r}")
    if j > i:
        raise TimeScaleError(f"K^Δ1 needs s <= t, got s={s!r} > t={t!r}")
    if isinstance(kernel, KernelTable):
        entries = kernel.entries
        return float((entries[i + 1, j] - entries[i, j]) / ts.mu[i])
    t_next = float(ts.points[i + 1])
    s_pt = float(ts.points[j])
    upper = evaluate(kernel, EvalEnv(ts=ts, t=t_next, s=s_pt))
    lower = evaluate(kernel, EvalEnv(ts=ts, t=float(ts.points[i]), s=s_pt))
    return float((upper - lower) / ts.mu[i])


def first_to_second(p: FirstKindProblem) -> ProblemSpec:
    """
    Transformed equation on T^κ, table-backed, with the sign folded in:

        φ(t) = ∫_a^t [-K^{Δ1}(t,η) / K(σ(t),t)] φ(η) Δη + f^Δ(t) / K(σ(t),t)

    so the returned problem has λ = +1.

    Raises:
        NonzeroAtA: |f(a)| > 1e-12.
        ZeroDiagonal: K(σ(t),t) vanishes somewhere on T^κ (all such t listed).
    """
    ts = p.ts
    f = p.forcing_values
    if abs(float(f[0])) > FA_TOL:
        raise NonzeroAtA(float(f[0]))
    diag = p.diagonal()
    zero = np.nonzero(np.abs(diag) <= DIAGONAL_TOL)[0]
    if zero.size:
        raise ZeroDiagonal([float(ts.points[i]) for i in zero])

    n = ts.size
    K = p.kernel_table.entries
    mu = ts.mu
    kappa = ts.kappa(1)
    # rows i = 0..n-2 of the first-slot difference quotient, all columns j <= i
    dk = (K[1:, :] - K[:-1, :]) / mu[:-1, None]
    transformed = -np.tril(dk[:, : n - 1]) / diag[:, None]
    forcing = np.diff(f) / mu[:-1] / diag

    return ProblemSpec(
        ts=kappa,
        lam=1.0,
        kernel=KernelTable(ts=kappa, entries=transformed),
        forcing=GridFunction(ts=kappa, values=forcing),
    )


def first_kind_residual_values(p: FirstKindProblem, phi: np.ndarray) -> np.ndarray:
    """
    |∫_a^t K(t,η)φ(η)Δη - f(t)| at every point of the full scale.

    `phi` holds values on T^κ; the integral up to b only needs those.
    """
    phi = np.asarray(phi, dtype=float)
    n = p.ts.size
    if phi.size != n - 1:
        raise ValueError(f"expected {n - 1} values on T^kappa, got {phi.size}")
    padded = np.append(phi, 0.0)
    integral = p.kernel_table.strict @ (p.ts.mu * padded)
    return np.abs(integral - p.forcing_values)


def solve_first_kind(p: FirstKindProblem) -> SolveReport:
    t0 = time.perf_counter()
    second = first_to_second(p)
    phi = forward_substitution(second)
    residuals = first_kind_residual_values(p, phi)
    report = SolveReport(
        solution=GridFunction(ts=second.ts, values=phi),
        method="direct",
        terms_or_iterations=second.ts.size,
        residual=float(np.max(residuals)),
        residuals=residuals,
        metadata={
            "solution_domain": "kappa",
            "omitted_point": p.ts.b,
            "residual_scale": 1.0 + float(np.max(np.abs(p.forcing_values))),
        },
    )
    logger.info(
        "TSV_FIRST_KIND_SOLVE_OK points=%d residual=%.3e solve_ms=%.2f",
        p.ts.size,
        report.residual,
        (time.perf_counter() - t0) * 1000.0,
    )
    return report
