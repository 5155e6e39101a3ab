"""
Nonlinear second-kind equations φ(t) = λ∫_a^t F(t,η,φ(η))Δη + f(t).

The existence guarantee only covers [a, c] with c = max [a, a+δ]_T and
δ = min(b - a, α/M). Forward substitution is still well defined past c, so
direct mode keeps going and flags the first point where |φ| > α; Picard mode
raises DomainExit there instead.
"""

from __future__ import annotations

import logging
import time

import numpy as np

from src.config.config import bound_margin, scaled_error
from src.errors import DomainExit, InvalidProblem, MaxIterations
from src.timescale.calculus import monomial_rows
from src.timescale.scale import GridFunction
from src.volterra2.problems import NonlinearProblem, SolveReport

logger = logging.getLogger(__name__)


def _integrals(p: NonlinearProblem, phi: np.ndarray) -> np.ndarray:
    # out[i] = Σ_{j<i} F(t_i, t_j, φ_j) μ_j
    n = p.ts.size
    mu = p.ts.mu
    out = np.zeros(n)
    for i in range(1, n):
        out[i] = sum(p.F_value(i, j, phi[j]) * mu[j] for j in range(i))
    return out


def nonlinear_residual_values(p: NonlinearProblem, phi: np.ndarray) -> np.ndarray:
    phi = np.asarray(phi, dtype=float)
    return np.abs(phi - p.lam * _integrals(p, phi) - p.forcing_values)


def _forward(p: NonlinearProblem) -> tuple[np.ndarray, int | None]:
    n = p.ts.size
    mu = p.ts.mu
    phi = np.zeros(n)
    first_exit = None
    for i in range(n):
        acc = sum(p.F_value(i, j, phi[j]) * mu[j] for j in range(i))
        phi[i] = p.lam * acc + p.forcing_values[i]
        if first_exit is None and abs(phi[i]) > p.domain_alpha:
            first_exit = i
    return phi, first_exit


def _interval_metadata(p: NonlinearProblem) -> dict:
    delta, ic = p.guaranteed_endpoint()
    pts = p.ts.points
    return {
        "delta": delta,
        "c": float(pts[ic]),
        "sigma_c": float(pts[min(ic + 1, p.ts.last)]),
        "spot_max_F": p.spot_max_F,
        "spot_max_slope": p.spot_max_slope,
    }


def _report(
    p: NonlinearProblem,
    phi: np.ndarray,
    method: str,
    count: int,
    t0: float,
    *,
    bound_checks: dict[str, float],
    metadata: dict,
    warnings: tuple[str, ...] = (),
) -> SolveReport:
    residuals = nonlinear_residual_values(p, phi)
    report = SolveReport(
        solution=GridFunction(ts=p.ts, values=phi),
        method=method,
        terms_or_iterations=count,
        residual=float(np.max(residuals)),
        residuals=residuals,
        bound_checks=bound_checks,
        metadata=metadata,
        warnings=warnings,
    )
    logger.info(
        "TSV_NONLINEAR_SOLVE_OK method=%s points=%d count=%d residual=%.3e warnings=%d solve_ms=%.2f",
        method,
        p.ts.size,
        count,
        report.residual,
        len(warnings),
        (time.perf_counter() - t0) * 1000.0,
    )
    return report


def _direct(p: NonlinearProblem, t0: float) -> SolveReport:
    phi, first_exit = _forward(p)
    meta = _interval_metadata(p)
    warnings: tuple[str, ...] = ()
    if first_exit is not None:
        t_exit = float(p.ts.points[first_exit])
        meta["domain_exit_t"] = t_exit
        warnings = (
            f"solution leaves |x| <= {p.domain_alpha!r} at t={t_exit!r}; "
            "values from there on are outside the Lipschitz certificate",
        )
        logger.warning("TSV_NONLINEAR_DOMAIN_EXIT mode=direct t=%r value=%r", t_exit, phi[first_exit])
    return _report(p, phi, "direct", p.ts.size, t0, bound_checks={}, metadata=meta, warnings=warnings)


def _picard(p: NonlinearProblem, t0: float) -> SolveReport:
    n_pts = p.ts.size
    lam_abs = abs(p.lam)
    M, L = p.bound_M, p.lipschitz_L
    _, ic = p.guaranteed_endpoint()
    exact, _ = _forward(p)

    prev = np.array(p.initial_values, dtype=float)
    N = float(np.max(np.abs(p.forcing_values[: ic + 1] - prev[: ic + 1])))
    h = monomial_rows(p.ts, n_pts + 1, 0)[:, : ic + 1]

    margins: list[float] = []
    n = 0
    stop = None
    while n < min(p.options.max_iter, n_pts):
        n += 1
        cur = p.lam * _integrals(p, prev) + p.forcing_values
        outside = np.nonzero(np.abs(cur) > p.domain_alpha)[0]
        if outside.size:
            i = int(outside[0])
            logger.warning("TSV_NONLINEAR_DOMAIN_EXIT mode=picard iteration=%d t=%r", n, float(p.ts.points[i]))
            raise DomainExit(float(p.ts.points[i]), float(cur[i]), p.domain_alpha)

        # |φ - φ_n| <= |λ|^{n+1} M L^n h_{n+1}(t,a) + |λ|^n N L^n h_n(t,a) on [a, c]
        bound = lam_abs ** (n + 1) * M * L**n * h[n + 1] + lam_abs**n * N * L**n * h[n]
        margins.append(bound_margin(bound, exact[: ic + 1] - cur[: ic + 1]))

        diff = float(np.max(np.abs(cur - prev)))
        prev = cur
        if diff <= p.options.tol * (1.0 + float(np.max(np.abs(cur)))):
            stop = "difference"
            break
        if n == n_pts:
            stop = "exact"
            break

    if stop is None:
        raise MaxIterations(f"nonlinear Picard iteration did not settle within max_iter={p.options.max_iter}")

    meta = _interval_metadata(p)
    meta.update(
        {
            "iterations": n,
            "stop": stop,
            "error_bound_margins": margins,
            "direct_gap": scaled_error(prev, exact),
        }
    )
    return _report(
        p,
        prev,
        "picard",
        n,
        t0,
        bound_checks={"error_bound": float(min(margins)) if margins else 0.0},
        metadata=meta,
    )


def solve_nonlinear(p: NonlinearProblem, method: str = "direct") -> SolveReport:
    """
    Solve by forward substitution ("direct") or Picard iteration ("picard").

    Raises:
        DomainExit: picard only; an iterate leaves |x| <= α.
        MaxIterations: picard only.
        InvalidProblem: unknown method.
    """
    t0 = time.perf_counter()
    if method == "direct":
        return _direct(p, t0)
    if method == "picard":
        return _picard(p, t0)
    raise InvalidProblem(f"nonlinear problems support 'direct' and 'picard', got {method!r}")
