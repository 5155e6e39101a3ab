"""
Systems of second-kind equations.

    φ_p(t) = λ Σ_q ∫_a^t K_pq(t,η) φ_q(η) Δη + f_p(t),   p = 1..m

Both solvers work on the (m, N) array Φ[p, i] = φ_p(t_i).
"""

from __future__ import annotations

import logging
import time

import numpy as np

from src.config.config import scaled_error
from src.errors import MaxIterations
from src.timescale.scale import GridFunction
from src.volterra2.problems import SolveReport, SystemProblem

logger = logging.getLogger(__name__)


def _system_integral(p: SystemProblem, phi: np.ndarray) -> np.ndarray:
    # out[p, i] = Σ_q Σ_{j<i} K_pq[i, j] μ_j Φ[q, j]
    strict = np.tril(p.kernel_tensor, k=-1)
    weighted = phi * p.ts.mu[None, :]
    return np.einsum("pqij,qj->pi", strict, weighted)


def system_residual_values(p: SystemProblem, phi: np.ndarray) -> np.ndarray:
    """Residuals per component, shape (m, N)."""
    phi = np.asarray(phi, dtype=float)
    return np.abs(phi - p.lam * _system_integral(p, phi) - p.forcing_matrix)


def _forward(p: SystemProblem) -> np.ndarray:
    n = p.ts.size
    mu = p.ts.mu
    K = p.kernel_tensor
    phi = np.zeros((p.m, n))
    for i in range(n):
        weighted = phi[:, :i] * mu[None, :i]
        phi[:, i] = p.lam * np.einsum("pqj,qj->p", K[:, :, i, :i], weighted) + p.forcing_matrix[:, i]
    return phi


def _system_report(
    p: SystemProblem, phi: np.ndarray, method: str, count: int, t0: float, metadata: dict
) -> SolveReport:
    residuals = system_residual_values(p, phi)
    report = SolveReport(
        solution=tuple(GridFunction(ts=p.ts, values=row) for row in phi),
        method=method,
        terms_or_iterations=count,
        residual=float(np.max(residuals)),
        residuals=residuals,
        metadata={"components": p.m, **metadata},
    )
    logger.info(
        "TSV_SYSTEM_SOLVE_OK method=%s m=%d points=%d count=%d residual=%.3e solve_ms=%.2f",
        method,
        p.m,
        p.ts.size,
        count,
        report.residual,
        (time.perf_counter() - t0) * 1000.0,
    )
    return report


def solve_system_direct(p: SystemProblem) -> SolveReport:
    """Block forward substitution, one vector φ(t_i) per grid point."""
    t0 = time.perf_counter()
    return _system_report(p, _forward(p), "direct", p.ts.size, t0, {})


def solve_system_picard(p: SystemProblem, max_iter: int | None = None) -> SolveReport:
    """
    Vector Picard iteration from Φ_0 = f.

    Exact after (point count) iterations for the same reason as the scalar case.
    """
    t0 = time.perf_counter()
    max_iter = p.options.max_iter if max_iter is None else max_iter
    n_pts = p.ts.size
    prev = np.array(p.forcing_matrix, dtype=float)
    n = 0
    stop = None
    while n < min(max_iter, n_pts):
        n += 1
        cur = p.lam * _system_integral(p, prev) + p.forcing_matrix
        diff = float(np.max(np.abs(cur - prev)))
        prev = cur
        if diff <= p.options.tol * (1.0 + float(np.max(np.abs(cur)))):
            stop = "difference"
            break
        if n == n_pts:
            stop = "exact"
            break
    if stop is None:
        raise MaxIterations(f"system Picard iteration did not settle within max_iter={max_iter}")

    oracle = _forward(p)
    return _system_report(
        p,
        prev,
        "picard",
        n,
        t0,
        {"iterations": n, "stop": stop, "direct_gap": scaled_error(prev, oracle)},
    )
