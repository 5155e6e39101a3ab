"""
Exact calculus on finite isolated time scales.

On an isolated scale every object reduces to a finite computation:
- Δ-derivative   -> forward difference quotient on T^κ
- Δ-integral     -> Riemann sum  Σ_{s <= η < t} f(η) μ(η), sign-reversed for t < s
- monomials h_k  -> iterated cumulative sums
- exponential    -> product of (1 + p μ) factors

Every function here is pure. Point arguments are snapped through
`TimeScale.index_of`.
"""

from __future__ import annotations

import logging
from typing import Callable, Literal, NamedTuple, Union

import numpy as np

from src.config.settings import get_settings
from src.errors import (
    BackwardUnsupported,
    DivisionByZero,
    KappaBoundary,
    NotRegressive,
    TimeScaleError,
)
from src.timescale.scale import GridFunction, TimeScale

logger = logging.getLogger(__name__)

Coefficient = Union[GridFunction, float, int]
Regressivity = Literal["positive", "negative", "mixed"]


class Jump(NamedTuple):
    sigma: float
    rho: float
    mu: float


def _same_scale(ts: TimeScale, f: GridFunction) -> None:
    if not ts.same_points(f.ts):
        raise TimeScaleError("grid function lives on a different time scale")


def _coefficient_values(ts: TimeScale, p: Coefficient) -> np.ndarray:
    if isinstance(p, GridFunction):
        _same_scale(ts, p)
        return np.asarray(p.values)
    return np.full(ts.size, float(p))


# ---------------------------------------------------------------------
# Jumps, derivative, integral
# ---------------------------------------------------------------------


def jump(ts: TimeScale, t: float) -> Jump:
    """Return (σ(t), ρ(t), μ(t)) with σ(b) = b and ρ(a) = a."""
    i = ts.index_of(t)
    pts = ts.points
    sigma = pts[i + 1] if i < ts.last else pts[i]
    rho = pts[i - 1] if i > 0 else pts[i]
    return Jump(sigma=float(sigma), rho=float(rho), mu=float(ts.mu[i]))


def delta_derivative(ts: TimeScale, f: GridFunction, t: float) -> float:
    """
    Forward difference quotient (f(σ(t)) - f(t)) / μ(t).

    Raises:
        KappaBoundary: t = b, where μ(b) = 0.
    """
    _same_scale(ts, f)
    i = ts.index_of(t)
    if i == ts.last:
        raise KappaBoundary(f"Δ-derivative undefined at the right endpoint b={ts.b!r}")
    return float((f.values[i + 1] - f.values[i]) / ts.mu[i])


def delta_derivative_values(ts: TimeScale, values: np.ndarray) -> np.ndarray:
    """Forward differences of an aligned array; the result covers T^κ."""
    values = np.asarray(values, dtype=float)
    return np.diff(values) / ts.mu[: values.size - 1]


def delta_integral(ts: TimeScale, f: GridFunction, s: float, t: float) -> float:
    """Riemann sum of f over [s, t), negated when t < s."""
    _same_scale(ts, f)
    i_s, i_t = ts.index_of(s), ts.index_of(t)
    lo, hi = min(i_s, i_t), max(i_s, i_t)
    total = float(np.dot(f.values[lo:hi], ts.mu[lo:hi]))
    return total if i_t >= i_s else -total


# ---------------------------------------------------------------------
# Generalized monomials
# ---------------------------------------------------------------------


def _monomial_step(h_prev: np.ndarray, mu: np.ndarray, j_s: int) -> np.ndarray:
    # h_k(t_i, s) = C[i] - C[j_s] with C[i] = Σ_{m<i} h_{k-1}(t_m, s) μ_m
    c = np.concatenate(([0.0], np.cumsum(h_prev[:-1] * mu[:-1])))
    return c - c[j_s]


def monomial_rows(ts: TimeScale, k_max: int, j_s: int) -> np.ndarray:
    """
    All monomials h_0..h_{k_max} against a fixed second argument.

    Args:
        ts: the scale.
        k_max: highest order (>= 0).
        j_s: index of s.

    Returns:
        Array of shape (k_max + 1, N); row k holds h_k(t_i, s) for every i,
        on both sides of s.
    """
    if k_max < 0:
        raise TimeScaleError(f"monomial order must be >= 0, got {k_max}")
    rows = np.empty((k_max + 1, ts.size))
    rows[0] = 1.0
    for k in range(1, k_max + 1):
        rows[k] = _monomial_step(rows[k - 1], ts.mu, j_s)
    return rows


def monomial(ts: TimeScale, k: int, t: float, s: float) -> float:
    """h_k(t, s) by the recursion h_k(t,s) = ∫_s^t h_{k-1}(η,s)Δη."""
    if int(k) != k or k < 0:
        raise TimeScaleError(f"monomial order must be a nonnegative integer, got {k!r}")
    i_t, j_s = ts.index_of(t), ts.index_of(s)
    return float(monomial_rows(ts, int(k), j_s)[int(k), i_t])


def monomial_alt(ts: TimeScale, k: int, t: float, s: float) -> float:
    """h_k(t, s) by the alternative recursion h_k(t,s) = ∫_s^t h_{k-1}(t,σ(η))Δη."""
    if int(k) != k or k < 0:
        raise TimeScaleError(f"monomial order must be a nonnegative integer, got {k!r}")
    i_t, j_s = ts.index_of(t), ts.index_of(s)
    mu = ts.mu
    g = np.ones(ts.size)  # g[j] = h_{k-1}(t, t_j)
    for _ in range(int(k)):
        d = np.concatenate(([0.0], np.cumsum(g[1:] * mu[:-1])))
        g = d[i_t] - d
    return float(g[j_s])


def monomial_matrix(ts: TimeScale, k: int) -> np.ndarray:
    """H[i, j] = h_k(t_i, t_j) for every pair of points."""
    return monomial_tensor(ts, k)[k]


def monomial_tensor(ts: TimeScale, k_max: int) -> np.ndarray:
    """H[k, i, j] = h_k(t_i, t_j) for k = 0..k_max and every pair of points."""
    out = np.empty((k_max + 1, ts.size, ts.size))
    for j in range(ts.size):
        out[:, :, j] = monomial_rows(ts, k_max, j)
    return out


# ---------------------------------------------------------------------
# Exponential, circle arithmetic, regressivity
# ---------------------------------------------------------------------


def exp_general(ts: TimeScale, p: Coefficient, t: float, s: float) -> float:
    """
    e_p(t, s) by the product formula.

    For t >= s: Π_{s <= η < t} (1 + p(η)μ(η)); for t < s the reciprocal of
    e_p(s, t).

    Raises:
        NotRegressive: a factor 1 + pμ vanishes on the interval.
    """
    i_t, j_s = ts.index_of(t), ts.index_of(s)
    lo, hi = min(i_t, j_s), max(i_t, j_s)
    factors = 1.0 + _coefficient_values(ts, p)[lo:hi] * ts.mu[lo:hi]
    eps = get_settings().regressive_eps
    zero = np.nonzero(np.abs(factors) <= eps)[0]
    if zero.size:
        at = float(ts.points[lo + int(zero[0])])
        raise NotRegressive(f"1 + p*mu vanishes at t={at!r}")
    prod = float(np.prod(factors))
    return prod if i_t >= j_s else 1.0 / prod


def exp_matrix(ts: TimeScale, c: float) -> np.ndarray:
    """E[i, j] = e_c(t_i, t_j) for i >= j (constant c); zero above the diagonal."""
    n = ts.size
    factors = 1.0 + float(c) * ts.mu
    out = np.zeros((n, n))
    for j in range(n):
        out[j, j] = 1.0
        if j < n - 1:
            out[j + 1 :, j] = np.cumprod(factors[j : n - 1])
    return out


def circle(op: Literal["plus", "minus"], z: float, w: float, h: float) -> float:
    """
    Circle plus z + w + z*w*h, or circle minus (z - w) / (1 + w*h).

    The unary ⊖w is circle("minus", 0, w, h).
    """
    if op == "plus":
        return z + w + z * w * h
    if op == "minus":
        denom = 1.0 + w * h
        if denom == 0.0:
            raise DivisionByZero(f"1 + w*h = 0 for w={w!r}, h={h!r}")
        return (z - w) / denom
    raise ValueError(f"unknown circle operation {op!r}")


def circle_grid(op: Literal["plus", "minus"], p: GridFunction, q: GridFunction) -> GridFunction:
    """Pointwise circle arithmetic using μ at each point."""
    _same_scale(p.ts, q)
    vals = [
        circle(op, float(z), float(w), float(h))
        for z, w, h in zip(p.values, q.values, p.ts.mu)
    ]
    return GridFunction(ts=p.ts, values=np.asarray(vals))


def regressivity(ts: TimeScale, p: Coefficient, s: float, t: float) -> Regressivity:
    """
    Classify p on [s, t).

    positive: 1 + pμ > 0 everywhere (e_p stays positive);
    negative: 1 + pμ < 0 everywhere (e_p alternates with each step);
    mixed: anything else.
    """
    j_s, i_t = ts.index_of(s), ts.index_of(t)
    lo, hi = min(j_s, i_t), max(j_s, i_t)
    factors = 1.0 + _coefficient_values(ts, p)[lo:hi] * ts.mu[lo:hi]
    if np.all(factors > 0):
        return "positive"
    if np.all(factors < 0):
        return "negative"
    return "mixed"


# ---------------------------------------------------------------------
# Trig pair and m_λ
# ---------------------------------------------------------------------


def trig(
    ts: TimeScale,
    lam: float,
    t: float,
    s: float,
    *,
    backward: bool = False,
) -> tuple[float, float]:
    """
    (cos_λ(t,s), sin_λ(t,s)) from the coupled system
    cos^Δ = -λ sin, sin^Δ = λ cos, (cos, sin)(s) = (1, 0).

    Forward step:  c' = c - λμ·sn,  sn' = sn + λμ·c.
    With backward=True, t < s is reached by inverting that step (its
    determinant 1 + λ²μ² is positive).

    Raises:
        BackwardUnsupported: t < s and backward is False.
    """
    i_t, j_s = ts.index_of(t), ts.index_of(s)
    c, sn = 1.0, 0.0
    mu = ts.mu
    if i_t >= j_s:
        for m in range(j_s, i_t):
            lm = lam * mu[m]
            c, sn = c - lm * sn, sn + lm * c
        return float(c), float(sn)

    if not backward:
        raise BackwardUnsupported(f"trig requires t >= s, got t={t!r} < s={s!r}")
    for m in range(j_s - 1, i_t - 1, -1):
        lm = lam * mu[m]
        det = 1.0 + lm * lm
        c, sn = (c + lm * sn) / det, (sn - lm * c) / det
    return float(c), float(sn)


def mfunc(ts: TimeScale, lam: float, t: float, s: float) -> float:
    """m_λ(t,s) = ∫_s^t 1/(1 + λμ(η)) Δη as an exact Riemann sum."""
    i_t, j_s = ts.index_of(t), ts.index_of(s)
    lo, hi = min(i_t, j_s), max(i_t, j_s)
    mu = ts.mu[lo:hi]
    denom = 1.0 + lam * mu
    eps = get_settings().regressive_eps
    zero = np.nonzero(np.abs(denom) <= eps)[0]
    if zero.size:
        at = float(ts.points[lo + int(zero[0])])
        raise NotRegressive(f"1 + lambda*mu vanishes at t={at!r}")
    total = float(np.sum(mu / denom))
    return total if i_t >= j_s else -total


# ---------------------------------------------------------------------
# Change of integration order
# ---------------------------------------------------------------------


def change_of_order_check(
    ts: TimeScale,
    f2: Callable[[float, float], float] | np.ndarray,
    a: float,
    b: float,
) -> tuple[float, float]:
    """
    Evaluate both sides of the change-of-order identity.

    lhs = ∫_a^b ∫_a^η f(η,ξ) Δξ Δη
    rhs = ∫_a^b ∫_{σ(ξ)}^b f(η,ξ) Δη Δξ

    Args:
        ts: the scale.
        f2: callable f(η, ξ) on points, or an N x N array indexed [η, ξ].
        a: lower end (member point).
        b: upper end (member point), a < b.

    Returns:
        (lhs, rhs)
    """
    ia, ib = ts.index_of(a), ts.index_of(b)
    if ia >= ib:
        raise TimeScaleError(f"change-of-order check needs a < b, got a={a!r}, b={b!r}")
    pts, mu = ts.points, ts.mu

    if callable(f2):
        def value(i: int, j: int) -> float:
            return float(f2(float(pts[i]), float(pts[j])))
    else:
        table = np.asarray(f2, dtype=float)

        def value(i: int, j: int) -> float:
            return float(table[i, j])

    lhs = 0.0
    for i in range(ia, ib):
        inner = 0.0
        for j in range(ia, i):
            inner += value(i, j) * mu[j]
        lhs += inner * mu[i]

    rhs = 0.0
    for j in range(ia, ib):
        inner = 0.0
        for i in range(j + 1, ib):
            inner += value(i, j) * mu[i]
        rhs += inner * mu[j]

    return float(lhs), float(rhs)
