"""
Seeded random instances for the acceptance checks.

Every generator takes a numpy Generator, so a fixed seed reproduces the whole
corpus. Ranges are chosen so every instance stays well conditioned on grids
of at most a dozen points.
"""

from __future__ import annotations

import numpy as np

from src.dynbridge.ivp import LinearIVP
from src.exprlang.parser import parse
from src.timescale.scale import GridFunction, KernelTable, TimeScale
from src.volterra2.problems import NonlinearProblem, ProblemSpec

LAMBDAS = (1.0, -1.0, 0.5, -0.5)


def random_grid(
    rng: np.random.Generator,
    *,
    min_points: int = 2,
    max_points: int = 12,
    gap: tuple[float, float] = (0.05, 0.18),
    start: tuple[float, float] = (0.0, 0.5),
) -> TimeScale:
    size = int(rng.integers(min_points, max_points + 1))
    first = rng.uniform(*start)
    gaps = rng.uniform(*gap, size=size - 1)
    points = np.concatenate(([first], first + np.cumsum(gaps)))
    return TimeScale(points=points, generator={"type": "random"})


def random_kernel(rng: np.random.Generator, ts: TimeScale) -> KernelTable:
    """c0 + c1 t + c2 s + c3 t s with a positive constant term."""
    c0 = rng.uniform(0.1, 1.0)
    c1, c2 = rng.uniform(0.0, 0.2, size=2)
    c3 = rng.uniform(0.0, 0.1)
    return KernelTable.from_callable(ts, lambda t, s: c0 + c1 * t + c2 * s + c3 * t * s)


def random_forcing(rng: np.random.Generator, ts: TimeScale) -> GridFunction:
    d0, d1, d2 = rng.uniform(-1.0, 1.0, size=3)
    return GridFunction.from_callable(ts, lambda t: d0 + d1 * t + d2 * t * t)


def random_linear_problem(
    rng: np.random.Generator, *, lam: float | None = None, ts: TimeScale | None = None
) -> ProblemSpec:
    ts = ts if ts is not None else random_grid(rng)
    lam = float(rng.uniform(-2.0, 2.0)) if lam is None else lam
    return ProblemSpec(ts=ts, lam=lam, kernel=random_kernel(rng, ts), forcing=random_forcing(rng, ts))


def random_values(rng: np.random.Generator, ts: TimeScale, lo: float = -1.0, hi: float = 1.0) -> GridFunction:
    return GridFunction(ts=ts, values=rng.uniform(lo, hi, size=ts.size))


def random_ivp(rng: np.random.Generator) -> LinearIVP:
    n = int(rng.integers(1, 4))
    ts = random_grid(rng, min_points=n + 3, max_points=10, gap=(0.1, 0.3))
    return LinearIVP(
        ts=ts,
        n=n,
        p=[random_values(rng, ts) for _ in range(n)],
        q=random_values(rng, ts),
        s=ts.a,
        y0=list(rng.uniform(-1.0, 1.0, size=n)),
        convention="at_s" if rng.random() < 0.5 else "at_sigma_s",
    )


def random_nonlinear(rng: np.random.Generator, alpha: float = 100.0) -> NonlinearProblem:
    """F = c1 x/(1+x^2) + c2 s t + c4 x with certified Lipschitz constant and bound."""
    ts = random_grid(rng, max_points=10)
    c1 = rng.uniform(-1.0, 1.0)
    c2 = rng.uniform(-0.5, 0.5)
    c4 = rng.uniform(-0.2, 0.2)
    d0, d1 = rng.uniform(-1.0, 1.0, size=2)
    tmax = float(np.max(np.abs(ts.points)))
    F = parse(f"({c1!r})*x/(1+x^2) + ({c2!r})*s*t + ({c4!r})*x")
    return NonlinearProblem(
        ts=ts,
        lam=float(rng.uniform(-1.0, 1.0)),
        F=F,
        forcing=GridFunction.from_callable(ts, lambda t: d0 + d1 * t),
        lipschitz_L=abs(c1) + abs(c4),
        bound_M=abs(c1) / 2.0 + abs(c2) * tmax * tmax + abs(c4) * alpha,
        domain_alpha=alpha,
    )
