"""
Linear second-kind solvers.

What it does
- solve_direct: forward substitution. On an isolated scale the equation is
  lower triangular (the integral up to t_i stops at t_{i-1}), so this is
  exact and serves as the oracle for the other three methods.
- solve_resolvent: φ = λ∫Γ(λ;t,η) f(η)Δη + f.
- neumann_solve: φ = Σ λ^ℓ φ_ℓ with φ_0 = f, φ_ℓ = ∫K φ_{ℓ-1}.
- picard_solve: φ_n = λ∫K φ_{n-1} + f from an arbitrary φ_0.

Hard invariants
- Every report carries a residual recomputed by `residual_values`, never
  the solver's own bookkeeping.
- On an N-point scale the Neumann terms vanish from ℓ = N on and the
  Picard error vanishes after N iterations; both are structural facts and
  are used as the primary stop.

Non-responsibilities
- Expression parsing and kernel sampling (done by ProblemSpec).
"""

from __future__ import annotations

import logging
import time

import numpy as np

from src.config.config import bound_margin, scaled_error
from src.config.settings import get_settings
from src.errors import MaxIterations, Truncated
from src.timescale.calculus import exp_matrix, monomial_tensor
from src.timescale.scale import GridFunction
from src.volterra2.kernels import iterated_kernels, resolvent
from src.volterra2.problems import ProblemSpec, SolveReport

logger = logging.getLogger(__name__)


def integral_term(p: ProblemSpec, phi: np.ndarray) -> np.ndarray:
    """∫_a^{t_i} K(t_i, η) φ(η) Δη for every i."""
    return p.kernel_table.strict @ (p.ts.mu * phi)


def residual_values(p: ProblemSpec, phi: np.ndarray) -> np.ndarray:
    """Pointwise |φ(t) - λ∫_a^t K(t,η)φ(η)Δη - f(t)|."""
    phi = np.asarray(phi, dtype=float)
    return np.abs(phi - p.lam * integral_term(p, phi) - p.forcing_values)


def _a_priori_margin(p: ProblemSpec, phi: np.ndarray, L: float | None = None) -> float:
    # |φ(t)| <= L e_{|λ|M}(t, a)
    M = p.kernel_table.max_abs()
    L = float(np.max(np.abs(p.forcing_values))) if L is None else L
    growth = exp_matrix(p.ts, abs(p.lam) * M)[:, 0]
    return bound_margin(L * growth, phi)


def _report(
    p: ProblemSpec,
    phi: np.ndarray,
    method: str,
    count: int,
    t0: float,
    *,
    bound_checks: dict[str, float] | None = None,
    metadata: dict | None = None,
    warnings: tuple[str, ...] = (),
) -> SolveReport:
    residuals = residual_values(p, phi)
    report = SolveReport(
        solution=GridFunction(ts=p.ts, values=phi),
        method=method,
        terms_or_iterations=count,
        residual=float(np.max(residuals)),
        residuals=residuals,
        bound_checks=dict(bound_checks or {}),
        metadata=dict(metadata or {}),
        warnings=warnings,
    )
    logger.info(
        "TSV_SOLVE_OK method=%s points=%d count=%d residual=%.3e solve_ms=%.2f",
        method,
        p.ts.size,
        count,
        report.residual,
        (time.perf_counter() - t0) * 1000.0,
    )
    return report


def forward_substitution(p: ProblemSpec) -> np.ndarray:
    """φ(t_i) = λ Σ_{j<i} K(t_i,t_j) φ(t_j) μ_j + f(t_i), in increasing i."""
    n = p.ts.size
    K = p.kernel_table.entries
    mu = p.ts.mu
    f = p.forcing_values
    phi = np.zeros(n)
    for i in range(n):
        phi[i] = p.lam * float(np.dot(K[i, :i], mu[:i] * phi[:i])) + f[i]
    return phi


def solve_direct(p: ProblemSpec) -> SolveReport:
    t0 = time.perf_counter()
    phi = forward_substitution(p)
    return _report(
        p,
        phi,
        "direct",
        p.ts.size,
        t0,
        bound_checks={"a_priori": _a_priori_margin(p, phi)},
    )


def solve_resolvent(p: ProblemSpec) -> SolveReport:
    """Solve through the resolvent kernel and compare with forward substitution."""
    t0 = time.perf_counter()
    res = resolvent(p)
    f = p.forcing_values
    phi = p.lam * (res.table.strict @ (p.ts.mu * f)) + f
    oracle = forward_substitution(p)
    return _report(
        p,
        phi,
        "resolvent",
        res.depth,
        t0,
        bound_checks={"a_priori": _a_priori_margin(p, phi), "resolvent": res.bound_margin},
        metadata={"depth": res.depth, "direct_gap": scaled_error(phi, oracle)},
    )


def neumann_solve(p: ProblemSpec, max_terms: int | None = None) -> SolveReport:
    """
    Sum the Neumann series φ = Σ λ^ℓ φ_ℓ.

    Args:
        p: the problem.
        max_terms: terms allowed, φ_0 included (default: p.options.max_terms).

    Raises:
        Truncated: the series needs more than `max_terms` terms. The partial
            report and the tail bound L Σ_{ℓ>n} (|λ|M)^ℓ h_ℓ(b, a) are attached.
    """
    t0 = time.perf_counter()
    max_terms = p.options.max_terms if max_terms is None else max_terms
    if max_terms < 1:
        raise ValueError(f"max_terms must be >= 1, got {max_terms}")

    ts = p.ts
    n_pts = ts.size
    f = p.forcing_values
    L = float(np.max(np.abs(f)))
    M = p.kernel_table.max_abs()
    h_a = monomial_tensor(ts, n_pts - 1)[:, :, 0]
    iterated = iterated_kernels(p, max(min(n_pts - 2, max_terms - 2), 0))

    terms = [np.array(f, dtype=float)]
    phi = terms[0].copy()
    term_margin = np.inf
    identity_gap = 0.0
    depth = 0
    for ell in range(1, n_pts):
        nxt = integral_term(p, terms[-1])
        if not np.any(nxt):
            break
        if ell >= max_terms:
            tail = L * sum((abs(p.lam) * M) ** k * h_a[k, -1] for k in range(ell, n_pts))
            partial = _report(
                p,
                phi,
                "neumann",
                depth,
                t0,
                bound_checks={"term_bound": float(term_margin)},
                metadata={"depth": depth, "truncated": True},
            )
            raise Truncated(
                f"Neumann series needs more than max_terms={max_terms} terms",
                report=partial,
                tail_bound=float(tail),
            )
        terms.append(nxt)
        phi = phi + p.lam**ell * nxt
        depth = ell
        term_margin = min(term_margin, bound_margin(L * M**ell * h_a[ell], nxt))
        via_kernels = iterated.tables[ell - 1].strict @ (ts.mu * f)
        identity_gap = max(identity_gap, scaled_error(nxt, via_kernels))

    oracle = forward_substitution(p)
    checks = {"a_priori": _a_priori_margin(p, phi)}
    if depth:
        checks["term_bound"] = float(term_margin)
    warnings: tuple[str, ...] = ()
    if identity_gap > get_settings().compare_rel:
        logger.warning("TSV_NEUMANN_TERM_IDENTITY_GAP points=%d gap=%.3e", n_pts, identity_gap)
        warnings = (f"Neumann terms disagree with the iterated kernels applied to f (gap {identity_gap:.3e})",)
    return _report(
        p,
        phi,
        "neumann",
        depth,
        t0,
        bound_checks=checks,
        warnings=warnings,
        metadata={
            "depth": depth,
            "term_identity_gap": identity_gap,
            "direct_gap": scaled_error(phi, oracle),
        },
    )


def picard_solve(p: ProblemSpec, max_iter: int | None = None) -> SolveReport:
    """
    Picard iteration from `p.initial_values`.

    Stops at the first n where one of these holds:
    - max|φ_n - φ_{n-1}| <= tol·(1 + max|φ_n|);
    - the remaining difference bounds Σ_{k>n} D_k(t) sum below that threshold;
    - n equals the point count (the iterate is exact there).

    D_n(t) = |λ|^n L M^n h_n(t,a) + |λ|^{n-1} N M^{n-1} h_{n-1}(t,a) with
    L = max|φ_0| and N = max|f - φ_0|; its margin is checked at every step.

    Raises:
        MaxIterations: none of the stops reached within `max_iter`.
    """
    t0 = time.perf_counter()
    max_iter = p.options.max_iter if max_iter is None else max_iter
    tol = p.options.tol
    ts = p.ts
    n_pts = ts.size
    lam_abs = abs(p.lam)
    f = p.forcing_values
    phi0 = np.array(p.initial_values, dtype=float)
    L = float(np.max(np.abs(phi0)))
    N = float(np.max(np.abs(f - phi0)))
    M = p.kernel_table.max_abs()

    h_a = monomial_tensor(ts, n_pts)[:, :, 0]
    diff_bounds = np.zeros((n_pts + 2, n_pts))
    for k in range(1, n_pts + 1):
        diff_bounds[k] = lam_abs**k * L * M**k * h_a[k] + lam_abs ** (k - 1) * N * M ** (k - 1) * h_a[k - 1]
    # tails[n] = max_t Σ_{k>n} D_k(t)
    cumulative = np.cumsum(diff_bounds[::-1], axis=0)[::-1]
    tails = np.array([float(np.max(cumulative[n + 1])) for n in range(n_pts + 1)])

    growth = exp_matrix(ts, lam_abs * M)[:, 0]
    a_priori = (L + N) * growth

    prev = phi0
    diff = np.zeros(n_pts)
    diff_margin = np.inf
    growth_margin = bound_margin(a_priori, prev)
    stop = None
    n = 0
    while n < min(max_iter, n_pts):
        n += 1
        cur = p.lam * integral_term(p, prev) + f
        diff = np.abs(cur - prev)
        diff_margin = min(diff_margin, bound_margin(diff_bounds[n], diff))
        growth_margin = min(growth_margin, bound_margin(a_priori, cur))
        threshold = tol * (1.0 + float(np.max(np.abs(cur))))
        prev = cur
        if float(np.max(diff)) <= threshold:
            stop = "difference"
            break
        if tails[n] <= threshold:
            stop = "tail_bound"
            break
        if n == n_pts:
            stop = "exact"
            break

    if stop is None:
        logger.warning(
            "TSV_PICARD_MAX_ITER points=%d max_iter=%d last_diff=%.3e", n_pts, max_iter, float(np.max(diff))
        )
        raise MaxIterations(f"Picard iteration did not settle within max_iter={max_iter}")

    oracle = forward_substitution(p)
    direct_gap = scaled_error(prev, oracle)
    # a zero remaining tail means φ_n is the exact solution
    claims_exact = bool(stop == "exact" or tails[n] == 0.0)
    warnings: tuple[str, ...] = ()
    if claims_exact and direct_gap > get_settings().compare_rel:
        logger.warning("TSV_PICARD_NOT_EXACT points=%d iterations=%d gap=%.3e", n_pts, n, direct_gap)
        warnings = (f"Picard iterate {n} should be exact but differs from forward substitution by {direct_gap:.3e}",)
    return _report(
        p,
        prev,
        "picard",
        n,
        t0,
        bound_checks={"difference_bound": float(diff_margin), "a_priori": float(growth_margin)},
        warnings=warnings,
        metadata={
            "iterations": n,
            "stop": stop,
            "exact_after": n_pts,
            "claims_exact": claims_exact,
            "direct_gap": direct_gap,
        },
    )


SOLVERS = {
    "direct": solve_direct,
    "resolvent": solve_resolvent,
    "neumann": neumann_solve,
    "picard": picard_solve,
}
