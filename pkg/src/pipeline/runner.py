"""
Solve / verify orchestration for one loaded problem.

Purpose
- Dispatch each requested method to the solver for the problem's kind.
- Measure per-method agreement (scaled max difference of the solutions).
- Check a candidate solution's residual against the problem.

Hard invariants
- Methods run independently on the same immutable problem object.
- A failing method is logged with its traceback and re-raised; nothing is
  swallowed here.

Non-responsibilities
- File formats (see src.cli.loader / src.cli.reports).
- Exit-code policy (see src.cli.main).
"""

from __future__ import annotations

import itertools
import logging
import time
from dataclasses import dataclass, field

import numpy as np

from src.cli.loader import LoadedProblem
from src.config.config import scaled_error
from src.dynbridge.ivp import ivp_to_volterra, taylor_reconstruct
from src.errors import InvalidProblem
from src.timescale.scale import GridFunction, TimeScale
from src.volterra1.first_kind import first_kind_residual_values, solve_first_kind
from src.volterra2.linear import SOLVERS, residual_values, solve_direct
from src.volterra2.nonlinear import nonlinear_residual_values, solve_nonlinear
from src.volterra2.problems import SolveReport
from src.volterra2.systems import (
    solve_system_direct,
    solve_system_picard,
    system_residual_values,
)

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class RunResult:
    """
    reports:
        method -> SolveReport, in request order.
    agreement:
        "a|b" -> scaled max difference between the two methods' solutions.
    extras:
        additional named grid functions (reconstructed y^{Δ^i} for IVPs).
    """

    kind: str
    reports: dict[str, SolveReport]
    agreement: dict[str, float] = field(default_factory=dict)
    extras: dict[str, GridFunction] = field(default_factory=dict)

    @property
    def primary(self) -> SolveReport:
        return next(iter(self.reports.values()))


def residual_scale(report: SolveReport) -> float:
    """Denominator of the pass criterion: 1 + max|φ| unless the solver says otherwise."""
    return float(report.metadata.get("residual_scale", 1.0 + report.max_abs))


def passes(report: SolveReport, tol: float) -> bool:
    return report.residual <= tol * residual_scale(report)


def _solve_one(loaded: LoadedProblem, method: str) -> SolveReport:
    p = loaded.problem
    kind = loaded.kind
    if kind in ("second", "convolution"):
        return SOLVERS[method](p)
    if kind == "first":
        return solve_first_kind(p)
    if kind == "nonlinear":
        return solve_nonlinear(p, method)
    if kind == "system":
        return solve_system_picard(p) if method == "picard" else solve_system_direct(p)
    if kind == "ivp":
        return solve_direct(ivp_to_volterra(p))
    raise InvalidProblem(f"no solver for kind {kind!r}")


def _agreement(reports: dict[str, SolveReport]) -> dict[str, float]:
    out = {}
    for (a, ra), (b, rb) in itertools.combinations(reports.items(), 2):
        va = np.vstack([c.values for c in ra.components])
        vb = np.vstack([c.values for c in rb.components])
        out[f"{a}|{b}"] = scaled_error(va, vb)
    return out


def run_problem(loaded: LoadedProblem, methods: tuple[str, ...] | None = None) -> RunResult:
    """
    Run every requested method on one problem.

    Args:
        loaded: problem from the loader.
        methods: overrides the file's method list when given.
    """
    methods = tuple(dict.fromkeys(methods or loaded.methods))
    logger.info(
        "TSV_RUN_START source=%s kind=%s methods=%s points=%d",
        loaded.source,
        loaded.kind,
        ",".join(methods),
        loaded.ts.size,
    )
    reports: dict[str, SolveReport] = {}
    for method in methods:
        t0 = time.perf_counter()
        try:
            reports[method] = _solve_one(loaded, method)
        except Exception:
            logger.exception(
                "TSV_RUN_FAILED source=%s kind=%s method=%s", loaded.source, loaded.kind, method
            )
            raise
        logger.info(
            "TSV_RUN_METHOD_OK source=%s method=%s residual=%.3e run_ms=%.2f",
            loaded.source,
            method,
            reports[method].residual,
            (time.perf_counter() - t0) * 1000.0,
        )

    extras: dict[str, GridFunction] = {}
    if loaded.kind == "ivp":
        phi = next(iter(reports.values())).components[0]
        for i, y in enumerate(taylor_reconstruct(loaded.problem, phi)):
            extras[f"y_d{i}"] = y

    return RunResult(kind=loaded.kind, reports=reports, agreement=_agreement(reports), extras=extras)


# ---------------------------------------------------------------------
# Candidate verification
# ---------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class VerifyResult:
    residuals: np.ndarray
    grid: np.ndarray
    max_residual: float
    worst_t: float
    worst_component: int
    scale: float

    def passed(self, tol: float) -> bool:
        return self.max_residual <= tol * self.scale


def candidate_grid(loaded: LoadedProblem) -> TimeScale:
    """The scale a candidate φ must be given on for this problem kind."""
    if loaded.kind == "first":
        return loaded.ts.kappa(1)
    if loaded.kind == "ivp":
        return loaded.problem.volterra_domain
    return loaded.ts


def candidate_components(loaded: LoadedProblem) -> int:
    return loaded.problem.m if loaded.kind == "system" else 1


def verify_candidate(loaded: LoadedProblem, values: np.ndarray) -> VerifyResult:
    """Residual of a candidate φ against the loaded problem."""
    p = loaded.problem
    kind = loaded.kind
    values = np.asarray(values, dtype=float)
    scale = 1.0 + float(np.max(np.abs(values))) if values.size else 1.0
    grid = loaded.ts.points
    if kind in ("second", "convolution"):
        res = residual_values(p, values)
    elif kind == "first":
        res = first_kind_residual_values(p, values)
        scale = 1.0 + float(np.max(np.abs(p.forcing_values)))
    elif kind == "nonlinear":
        res = nonlinear_residual_values(p, values)
    elif kind == "system":
        res = system_residual_values(p, values)
    elif kind == "ivp":
        second = ivp_to_volterra(p)
        res = residual_values(second, values)
        grid = second.ts.points
    else:
        raise InvalidProblem(f"cannot verify kind {kind!r}")

    res2 = np.atleast_2d(res)
    comp, idx = np.unravel_index(int(np.argmax(res2)), res2.shape)
    result = VerifyResult(
        residuals=res,
        grid=np.asarray(grid),
        max_residual=float(res2[comp, idx]),
        worst_t=float(grid[idx]),
        worst_component=int(comp) + 1,
        scale=scale,
    )
    logger.info(
        "TSV_VERIFY_DONE source=%s kind=%s max_residual=%.3e worst_t=%r",
        loaded.source,
        kind,
        result.max_residual,
        result.worst_t,
    )
    return result
