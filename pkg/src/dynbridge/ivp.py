"""
Linear dynamic initial value problems and their Volterra form.

    y^{Δ^n}(t) + Σ_{i=0}^{n-1} p_{n-i}(t) y^{Δ^i}(t) = q(t)

What it does
- solve_ivp: steps the companion system Y(σ(t)) = Y(t) + μ(t)(A(t)Y(t) + B(t)).
- ivp_to_volterra: writes φ = y^{Δ^n} as the solution of a second-kind
  equation (λ = -1) on the start point's T^{κ^n}.
- taylor_reconstruct: recovers y^{Δ^i} from φ by Taylor's formula.
- resolvent_via_ivp: the resolvent of a polynomial-type kernel from the
  IVP with Kronecker data at σ(s).

Hard invariants
- Δ^k values are nested forward differences; every level drops one point
  on the right. A GridFunction always carries the scale it lives on.

Non-responsibilities
- Integro-dynamic equations and boundary-value problems.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Literal, Sequence

import numpy as np

from src.errors import InvalidProblem, LambdaZero, NotRegressive, OrderTooHigh
from src.timescale.calculus import delta_derivative_values, exp_general, monomial_tensor
from src.timescale.scale import GridFunction, KernelTable, TimeScale
from src.volterra2.problems import FunctionLike, ProblemSpec, sample_over_t

logger = logging.getLogger(__name__)

Convention = Literal["at_s", "at_sigma_s"]


def _coefficient_rows(ts: TimeScale, p: Sequence[FunctionLike]) -> np.ndarray:
    # rows[k - 1] = p_k on the grid
    return np.vstack([sample_over_t(ts, pk, what=f"p_{k + 1}") for k, pk in enumerate(p)])


@dataclass(frozen=True, eq=False)
class LinearIVP:
    """
    n-th order linear IVP.

    p:
        p_1..p_n (p[0] is p_1).
    y0:
        y^{Δ^i} at the start point, i = 0..n-1.
    convention:
        at_s starts at s; at_sigma_s starts at σ(s).
    """

    ts: TimeScale
    n: int
    p: Sequence[FunctionLike]
    q: FunctionLike
    s: float
    y0: Sequence[float]
    convention: Convention = "at_s"

    start: int = field(init=False)
    p_values: np.ndarray = field(init=False, repr=False)
    q_values: np.ndarray = field(init=False, repr=False)

    def __post_init__(self) -> None:
        if self.n < 1:
            raise InvalidProblem(f"order must be >= 1, got {self.n}")
        if len(self.p) != self.n or len(self.y0) != self.n:
            raise InvalidProblem(f"order {self.n} needs {self.n} coefficients and {self.n} initial values")
        if self.convention not in ("at_s", "at_sigma_s"):
            raise InvalidProblem(f"unknown initial convention {self.convention!r}")
        j = self.ts.index_of(self.s)
        start = j + 1 if self.convention == "at_sigma_s" else j
        # two points must remain for y^{Δ^n} as a grid difference
        if self.ts.size - start < self.n + 2:
            raise OrderTooHigh(
                f"order {self.n} needs {self.n + 2} points from the start point, "
                f"have {self.ts.size - start}"
            )
        object.__setattr__(self, "start", start)
        object.__setattr__(self, "p_values", _coefficient_rows(self.ts, self.p))
        object.__setattr__(self, "q_values", sample_over_t(self.ts, self.q, what="q"))

    @property
    def domain(self) -> TimeScale:
        """Points from the start point to b."""
        return self.ts.restrict(self.start, self.ts.size)

    @property
    def volterra_domain(self) -> TimeScale:
        """T^{κ^n} of `domain`: where φ = y^{Δ^n} is solved for."""
        return self.domain.kappa(self.n)


@dataclass(frozen=True)
class PolyKernel:
    """K(t,s) = Σ_{i=0}^{n-1} p_{n-i}(t) h_{n-i-1}(t, σ(s)); p[0] is p_1."""

    n: int
    p: Sequence[FunctionLike]

    def __post_init__(self) -> None:
        if self.n < 1 or len(self.p) != self.n:
            raise InvalidProblem(f"polynomial kernel of order {self.n} needs {self.n} coefficients")

    def table(self, ts: TimeScale) -> KernelTable:
        return KernelTable(ts=ts, entries=_poly_entries(ts, _coefficient_rows(ts, self.p), self.n))


def _poly_entries(ts: TimeScale, p_rows: np.ndarray, n: int) -> np.ndarray:
    size = ts.size
    h = monomial_tensor(ts, n - 1)
    sig = np.minimum(np.arange(size) + 1, size - 1)
    entries = np.zeros((size, size))
    for i in range(n):
        # p_{n-i}(t) h_{n-i-1}(t, σ(s))
        entries += p_rows[n - i - 1][:, None] * h[n - i - 1][:, sig]
    return np.tril(entries)


# ---------------------------------------------------------------------
# Stepping
# ---------------------------------------------------------------------


def _step_companion(
    mu: np.ndarray, p_rows: np.ndarray, forcing: np.ndarray, initial: np.ndarray, n: int
) -> np.ndarray:
    """
    State[i, k] = y^{Δ^k}(t_i) for k < n on an aligned grid slice.

    y^{Δ^n} = forcing - Σ_{k<n} p_{n-k} y^{Δ^k}.
    """
    size = mu.size
    state = np.zeros((size, n))
    state[0] = initial
    for i in range(size - 1):
        top = forcing[i] - sum(p_rows[n - k - 1][i] * state[i, k] for k in range(n))
        nxt = state[i].copy()
        nxt[: n - 1] += mu[i] * state[i, 1:]
        nxt[n - 1] += mu[i] * top
        state[i + 1] = nxt
    return state


def solve_ivp(ivp: LinearIVP) -> list[GridFunction]:
    """
    Step the companion system from the start point.

    Returns:
        [y, y^Δ, ..., y^{Δ^{n-1}}] on `ivp.domain`, then y^{Δ^n} obtained by
        differencing y^{Δ^{n-1}}, on T^κ of that domain.
    """
    dom = ivp.domain
    st = ivp.start
    state = _step_companion(
        dom.mu,
        ivp.p_values[:, st:],
        ivp.q_values[st:],
        np.asarray(ivp.y0, dtype=float),
        ivp.n,
    )
    out = [GridFunction(ts=dom, values=state[:, k]) for k in range(ivp.n)]
    top = delta_derivative_values(dom, state[:, ivp.n - 1])
    out.append(GridFunction(ts=dom.kappa(1), values=top))
    logger.debug("TSV_IVP_STEPPED order=%d points=%d start=%r", ivp.n, dom.size, dom.a)
    return out


# ---------------------------------------------------------------------
# Volterra form and Taylor reconstruction
# ---------------------------------------------------------------------


def ivp_to_volterra(ivp: LinearIVP) -> ProblemSpec:
    """
    φ(t) = -∫_s^t K(t,η) φ(η) Δη + q(t) - Σ_i Σ_k y_{k+i} p_{n-i}(t) h_k(t,s)

    with K(t,η) = Σ_i p_{n-i}(t) h_{n-i-1}(t,σ(η)), returned as λ = -1 with
    table-backed kernel and forcing on `ivp.volterra_domain`.
    """
    n = ivp.n
    dom = ivp.domain
    st = ivp.start
    p_rows = ivp.p_values[:, st:]
    size = dom.size - n

    kernel = _poly_entries(dom, p_rows, n)[:size, :size]

    h = monomial_tensor(dom, n - 1)[:, :, 0]
    forcing = np.array(ivp.q_values[st:], dtype=float)
    for i in range(n):
        for k in range(n - i):
            forcing -= ivp.y0[k + i] * p_rows[n - i - 1] * h[k]

    vdom = ivp.volterra_domain
    logger.debug("TSV_IVP_TO_VOLTERRA order=%d points=%d", n, size)
    return ProblemSpec(
        ts=vdom,
        lam=-1.0,
        kernel=KernelTable(ts=vdom, entries=kernel),
        forcing=GridFunction(ts=vdom, values=forcing[:size]),
    )


def taylor_reconstruct(ivp: LinearIVP, phi: GridFunction) -> list[GridFunction]:
    """
    y^{Δ^i}(t) = Σ_k y_{k+i} h_k(t,s) + ∫_s^t h_{n-i-1}(t,σ(η)) φ(η) Δη, i = 0..n-1.

    `phi` must live on `ivp.volterra_domain`; the results live there too.
    """
    vdom = ivp.volterra_domain
    if not vdom.same_points(phi.ts):
        raise InvalidProblem("phi must live on the IVP's T^{kappa^n} domain")
    n = ivp.n
    dom = ivp.domain
    size = vdom.size
    h = monomial_tensor(dom, n - 1)
    sig = np.minimum(np.arange(dom.size) + 1, dom.size - 1)
    weighted = np.asarray(phi.values) * dom.mu[:size]

    out = []
    for i in range(n):
        taylor = sum(ivp.y0[k + i] * h[k][:size, 0] for k in range(n - i))
        conv = np.tril(h[n - i - 1][:size][:, sig[:size]], k=-1) @ weighted
        out.append(GridFunction(ts=vdom, values=taylor + conv))
    return out


# ---------------------------------------------------------------------
# Polynomial-kernel resolvent
# ---------------------------------------------------------------------


def resolvent_via_ivp(k: PolyKernel, lam: float, ts: TimeScale) -> KernelTable:
    """
    Γ(λ;t,s) = y^{Δ^n}(λ;t,s) / λ where

        y^{Δ^n} - λ Σ_i p_{n-i}(t) y^{Δ^i} = 0,   y^{Δ^i}(σ(s)) = δ_{i,n-1}.

    Since y^{Δ^n}/λ = Σ_i p_{n-i}(t) y^{Δ^i}(t), every pair t >= σ(s) is
    filled; the diagonal is K(t,t).

    Raises:
        LambdaZero: lam == 0 (use the series resolvent).
        OrderTooHigh: fewer than n + 1 points.
    """
    if lam == 0.0:
        raise LambdaZero("resolvent_via_ivp needs lambda != 0; use the series resolvent")
    n = k.n
    size = ts.size
    if size < n + 1:
        raise OrderTooHigh(f"order {n} needs at least {n + 1} points, have {size}")
    p_rows = _coefficient_rows(ts, k.p)
    entries = np.zeros((size, size))
    base = _poly_entries(ts, p_rows, n)
    entries[np.diag_indices(size)] = np.diag(base)

    initial = np.zeros(n)
    initial[n - 1] = 1.0
    # the homogeneous equation in companion form has coefficients -λ p
    scaled = -lam * p_rows
    zero = np.zeros(size)
    for j in range(size - 1):
        st = j + 1
        state = _step_companion(ts.mu[st:], scaled[:, st:], zero[st:], initial, n)
        for i_rel in range(state.shape[0]):
            i = st + i_rel
            entries[i, j] = sum(p_rows[n - m - 1][i] * state[i_rel, m] for m in range(n))

    logger.debug("TSV_RESOLVENT_VIA_IVP_OK order=%d points=%d lambda=%r", n, size, lam)
    return KernelTable(ts=ts, entries=entries)


def poly_kernel_problem(
    k: PolyKernel, lam: float, ts: TimeScale, forcing: FunctionLike = 0.0
) -> ProblemSpec:
    """Second-kind problem with the polynomial kernel realised as a table."""
    return ProblemSpec(ts=ts, lam=lam, kernel=k.table(ts), forcing=forcing)


def hyperbolic_resolvent_closed_form(ts: TimeScale, t: float, s: float) -> float:
    """
    e_1(t,s) / (2(1+μ(s))) - e_{-1}(t,s) / (2(1-μ(s)))

    Resolvent of K(t,s) = h_1(t,σ(s)) at λ = 1 for t > s.

    Raises:
        NotRegressive: μ(s) = 1 or -1 not regressive on [s, t).
    """
    mu_s = float(ts.mu[ts.index_of(s)])
    if mu_s == 1.0:
        raise NotRegressive("closed form needs 1 - mu(s) != 0")
    return exp_general(ts, 1.0, t, s) / (2.0 * (1.0 + mu_s)) - exp_general(ts, -1.0, t, s) / (
        2.0 * (1.0 - mu_s)
    )
