"""
Shifts and convolutions on finite grids.

The shift f̂ of f solves φ^{Δ1}(t,σ(s)) + φ^{Δ2}(t,s) = 0 with boundary row
f̂(t,a) = f(t) and diagonal f̂(s,s) = f(a). On grids this is the recursion

    f̂(σ(t),σ(s)) = f̂(t,σ(s)) - (μ(t)/μ(s)) (f̂(t,σ(s)) - f̂(t,s))

filled column by column. On a uniform unit grid it telescopes to
f̂(t,s) = f(t - s + a).
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from src.config.config import scaled_error
from src.errors import InvalidProblem
from src.timescale.scale import GridFunction, KernelTable, TimeScale
from src.volterra2.problems import FunctionLike, ProblemSpec

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class ShiftTable:
    """values[i, j] = f̂(t_i, t_j) for i >= j; zero above the diagonal."""

    ts: TimeScale
    values: np.ndarray

    def at(self, t: float, s: float) -> float:
        i, j = self.ts.index_of(t), self.ts.index_of(s)
        if j > i:
            raise InvalidProblem(f"shift is stored for t >= s only, got t={t!r} < s={s!r}")
        return float(self.values[i, j])


def _check(ts: TimeScale, f: GridFunction) -> None:
    if not ts.same_points(f.ts):
        raise InvalidProblem("grid function lives on a different time scale")


def shift(ts: TimeScale, f: GridFunction) -> ShiftTable:
    _check(ts, f)
    n = ts.size
    mu = ts.mu
    F = np.zeros((n, n))
    F[:, 0] = f.values
    for j in range(n - 1):
        F[j + 1, j + 1] = f.values[0]
        for i in range(j + 1, n - 1):
            F[i + 1, j + 1] = F[i, j + 1] - (mu[i] / mu[j]) * (F[i, j + 1] - F[i, j])
    F.setflags(write=False)
    return ShiftTable(ts=ts, values=F)


def shift_residual(table: ShiftTable, f: GridFunction) -> float:
    """
    Largest violation of the boundary row, the diagonal seed or the
    recursion stencil.
    """
    F = table.values
    mu = table.ts.mu
    n = table.ts.size
    worst = float(np.max(np.abs(F[:, 0] - f.values)))
    worst = max(worst, float(np.max(np.abs(np.diag(F) - f.values[0]))))
    for j in range(n - 1):
        for i in range(j + 1, n - 1):
            stencil = F[i + 1, j + 1] - F[i, j + 1] + (mu[i] / mu[j]) * (F[i, j + 1] - F[i, j])
            worst = max(worst, abs(float(stencil)))
    return worst


def _shifted_at_sigma(table: ShiftTable) -> np.ndarray:
    # S[i, j] = f̂(t_i, σ(t_j)) for j < i
    n = table.ts.size
    S = np.zeros((n, n))
    S[1:, :-1] = np.tril(table.values[1:, 1:])
    return S


@dataclass(frozen=True, eq=False)
class ConvolutionResult:
    """
    values:
        (f*g)(t) = ∫_a^t f̂(t,σ(η)) g(η) Δη.
    discrepancy:
        max gap to ∫_a^t f(η) ĝ(t,σ(η)) Δη, scaled by 1 + max|values|.
    """

    values: GridFunction
    discrepancy: float


def convolution(ts: TimeScale, f: GridFunction, g: GridFunction) -> ConvolutionResult:
    """Compute both convolution forms; return the first with their gap."""
    _check(ts, f)
    _check(ts, g)
    mu = ts.mu
    first = _shifted_at_sigma(shift(ts, f)) @ (np.asarray(g.values) * mu)
    second = _shifted_at_sigma(shift(ts, g)) @ (np.asarray(f.values) * mu)
    gap = scaled_error(second, first)
    logger.debug("TSV_CONVOLUTION_OK points=%d discrepancy=%.3e", ts.size, gap)
    return ConvolutionResult(values=GridFunction(ts=ts, values=first), discrepancy=gap)


def convolution_problem(
    ts: TimeScale, lam: float, kernel: GridFunction, forcing: FunctionLike
) -> ProblemSpec:
    """
    φ(t) = λ∫_a^t K̂(t,σ(η)) φ(η) Δη + f(t) as a table-backed ProblemSpec.

    Diagonal entries are K(a); forward substitution never reads them.
    """
    _check(ts, kernel)
    entries = _shifted_at_sigma(shift(ts, kernel))
    entries[np.diag_indices(ts.size)] = kernel.values[0]
    return ProblemSpec(ts=ts, lam=lam, kernel=KernelTable(ts=ts, entries=entries), forcing=forcing)
