"""
Iterated kernels, the resolvent kernel and the reciprocity identities.

On an n-point scale K_m(t,s) needs a chain s < η_1 < ... < η_m < t, so
K_m vanishes identically for m >= n - 1. The resolvent series
Γ(λ;t,s) = Σ_m λ^m K_m(t,s) is therefore a finite sum with termination depth
n - 2, and everything here is computed exactly by triangular matrix products:

    K_m = strict(K) · diag(μ) · strict(K_{m-1})        (definition)
    K_m = strict(K_{m-1}) · diag(μ) · strict(K)        (alternate recursion)
"""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass

import numpy as np

from src.config.config import bound_margin
from src.timescale.calculus import exp_matrix, monomial_tensor
from src.timescale.scale import KernelTable, TimeScale
from src.volterra2.problems import ProblemSpec

logger = logging.getLogger(__name__)


def termination_depth(ts: TimeScale) -> int:
    """Largest m for which K_m can be nonzero on this scale."""
    return max(ts.size - 2, 0)


def _lower(entries: np.ndarray) -> np.ndarray:
    return np.tril(entries, k=-1)


def _relative_gap(a: np.ndarray, b: np.ndarray) -> float:
    diff = float(np.max(np.abs(a - b))) if a.size else 0.0
    scale = max(float(np.max(np.abs(a))), float(np.max(np.abs(b)))) if a.size else 0.0
    if diff == 0.0:
        return 0.0
    return diff / scale if scale > 0 else diff


@dataclass(frozen=True)
class IteratedKernels:
    """
    tables:
        K_0..K_{n_max} (definition recursion).
    alternate_discrepancy:
        max over m of the relative gap between the two recursions.
    bound_margin:
        smallest slack of |K_m| <= M^{m+1} h_m(t,s) over all tables.
    """

    tables: tuple[KernelTable, ...]
    alternate_discrepancy: float
    bound_margin: float


def iterated_kernels(p: ProblemSpec, n_max: int) -> IteratedKernels:
    """
    Compute K_0..K_{n_max} by both recursions and check the M^{m+1} h_m bound.

    Args:
        p: the problem (only its kernel table is used).
        n_max: highest iterate, >= 0.
    """
    if n_max < 0:
        raise ValueError(f"n_max must be >= 0, got {n_max}")
    ts = p.ts
    mu = ts.mu
    base = np.array(p.kernel_table.entries)
    k_strict = _lower(base)
    M = float(np.max(np.abs(base)))

    tables = [base]
    alt = base
    gap = 0.0
    for _ in range(n_max):
        nxt = k_strict @ (mu[:, None] * _lower(tables[-1]))
        alt = _lower(alt) @ (mu[:, None] * k_strict)
        gap = max(gap, _relative_gap(nxt, alt))
        tables.append(nxt)

    h = monomial_tensor(ts, n_max)
    tri = np.tril(np.ones_like(base, dtype=bool))
    margin = np.inf
    for m, table in enumerate(tables):
        bound = M ** (m + 1) * h[m]
        margin = min(margin, bound_margin(bound[tri], table[tri]))

    logger.debug(
        "TSV_ITERATED_KERNELS_OK n_max=%d points=%d alt_gap=%.3e bound_margin=%.3e",
        n_max,
        ts.size,
        gap,
        margin,
    )
    return IteratedKernels(
        tables=tuple(KernelTable(ts=ts, entries=t) for t in tables),
        alternate_discrepancy=gap,
        bound_margin=float(margin),
    )


@dataclass(frozen=True)
class Resolvent:
    """
    table:
        Γ(λ; t_i, t_j) on the triangle.
    depth:
        termination depth of the series (last iterate included).
    bound_margin:
        smallest slack of |Γ(λ;t,s)| <= M e_{|λ|M}(t,s).
    """

    table: KernelTable
    depth: int
    bound_margin: float


def resolvent(p: ProblemSpec) -> Resolvent:
    """Γ(λ;t,s) = Σ_m K_m(t,s) λ^m, summed exactly up to the termination depth."""
    t0 = time.perf_counter()
    ts = p.ts
    depth = termination_depth(ts)
    iterated = iterated_kernels(p, depth) if p.lam != 0.0 else iterated_kernels(p, 0)

    gamma = np.zeros((ts.size, ts.size))
    for m, table in enumerate(iterated.tables):
        gamma += p.lam**m * table.entries

    M = p.kernel_table.max_abs()
    bound = M * exp_matrix(ts, abs(p.lam) * M)
    tri = np.tril(np.ones_like(gamma, dtype=bool))
    margin = bound_margin(bound[tri], gamma[tri])

    used_depth = depth if p.lam != 0.0 else 0
    logger.info(
        "TSV_RESOLVENT_OK points=%d depth=%d lambda=%r bound_margin=%.3e build_ms=%.2f",
        ts.size,
        used_depth,
        p.lam,
        margin,
        (time.perf_counter() - t0) * 1000.0,
    )
    return Resolvent(table=KernelTable(ts=ts, entries=gamma), depth=used_depth, bound_margin=margin)


@dataclass(frozen=True)
class Reciprocity:
    """
    forward:
        max |Γ - λ∫_{σ(s)}^t K(t,η)Γ(η,s)Δη - K| / (1 + max|Γ|)
    backward:
        max |K + λ∫_{σ(s)}^t Γ(t,η)K(η,s)Δη - Γ| / (1 + max|Γ|)
    reverse:
        scaled gap between K and the resolvent of Γ taken at parameter -λ.
    """

    forward: float
    backward: float
    reverse: float


def reciprocity_check(p: ProblemSpec, gamma: KernelTable) -> Reciprocity:
    """Evaluate both reciprocity identities on every pair (t, s), t >= s."""
    ts = p.ts
    mu = ts.mu
    K = np.array(p.kernel_table.entries)
    G = np.array(gamma.entries)
    tri = np.tril(np.ones_like(K, dtype=bool))
    scale = 1.0 + float(np.max(np.abs(G)))

    forward = G - (p.lam * (_lower(K) @ (mu[:, None] * _lower(G))) + K)
    backward = K - (-p.lam * (_lower(G) @ (mu[:, None] * _lower(K))) + G)

    reverse_problem = ProblemSpec(
        ts=ts, lam=-p.lam, kernel=gamma, forcing=0.0, options=p.options
    )
    back = resolvent(reverse_problem).table.entries

    return Reciprocity(
        forward=float(np.max(np.abs(forward[tri]))) / scale,
        backward=float(np.max(np.abs(backward[tri]))) / scale,
        reverse=float(np.max(np.abs(back[tri] - K[tri]))) / (1.0 + float(np.max(np.abs(K)))),
    )
