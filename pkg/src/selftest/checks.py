"""
Built-in acceptance checks.

Each check is a plain function `(rng) -> CheckResult` and is independent of
the others; `run_all` seeds one Generator per check so reordering or
skipping a check never changes another's instances.

What it does
- Exact examples with hand-verified values (geometric, first kind,
  convolution, nonlinear, hyperbolic resolvent).
- Cross-method identities over seeded random instances.

Non-responsibilities
- Exit codes and printing beyond `format_table` (see src.cli.main).
"""

from __future__ import annotations

import contextlib
import json
import logging
import time
from dataclasses import dataclass
from math import factorial
from typing import Callable, Iterator, Optional
from unittest import mock

import numpy as np

from src.cli.loader import build_problem, parse_problem_text
from src.config.config import all_rel_close, bound_margin, rel_close, scaled_error
from src.convolve.shift import convolution, convolution_problem
from src.dynbridge.ivp import (
    PolyKernel,
    hyperbolic_resolvent_closed_form,
    ivp_to_volterra,
    poly_kernel_problem,
    resolvent_via_ivp,
    solve_ivp,
    taylor_reconstruct,
)
from src.exprlang.parser import parse
from src.pipeline.runner import verify_candidate
from src.selftest import instances
from src.timescale import calculus
from src.timescale.scale import GridFunction, TimeScale
from src.volterra1.first_kind import FirstKindProblem, solve_first_kind
from src.volterra2.kernels import iterated_kernels, reciprocity_check, resolvent, termination_depth
from src.volterra2.linear import SOLVERS, picard_solve, solve_direct, solve_resolvent
from src.volterra2.nonlinear import solve_nonlinear
from src.volterra2.problems import NonlinearProblem, ProblemSpec

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class CheckResult:
    number: int
    name: str
    passed: bool
    detail: str
    elapsed_ms: float = 0.0


def _integers(start: float, stop: float) -> TimeScale:
    return TimeScale(points=np.arange(start, stop + 1.0, 1.0))


def _result(number: int, name: str, failures: list[str], ok_detail: str) -> CheckResult:
    if failures:
        return CheckResult(number, name, False, failures[0] + (f" (+{len(failures) - 1} more)" if len(failures) > 1 else ""))
    return CheckResult(number, name, True, ok_detail)


# ---------------------------------------------------------------------
# 1-2: worked examples through every method / through verify
# ---------------------------------------------------------------------


def check_geometric(rng: np.random.Generator) -> CheckResult:
    ts = _integers(0, 10)
    p = ProblemSpec(ts=ts, lam=1.0, kernel=parse("1"), forcing=parse("1"))
    expected = 2.0 ** ts.points
    failures = []
    for name, solver in SOLVERS.items():
        report = solver(p)
        if not all_rel_close(report.solution.values, expected, rel=1e-12):
            failures.append(f"{name}: solution differs from 2^t")
    picard = picard_solve(p)
    if picard.terms_or_iterations > 11:
        failures.append(f"picard used {picard.terms_or_iterations} iterations")
    neumann = SOLVERS["neumann"](p)
    if neumann.metadata["depth"] > 11:
        failures.append(f"neumann depth {neumann.metadata['depth']}")
    return _result(1, "geometric solution 2^t", failures, f"picard={picard.terms_or_iterations} neumann={neumann.metadata['depth']}")


RATIONAL_GRIDS = (
    {"type": "uniform", "start": 0, "stop": 5, "step": 1},
    {"type": "explicit", "points": [0, 0.5, 1.25, 3]},
)


def rational_problem_text(n: int, timescale: dict) -> str:
    """Second-kind file whose solution is 1/(t+1): sum-of-reciprocals kernel, λ = -1."""
    terms = " + ".join(f"1/((sigma(s)+1)^{k}*(s+1)^{n - k})" for k in range(1, n + 1))
    kernel = f"(t+1)^{n - 1}*({terms})"
    forcing = f"(t+1)^{n - 1}/(a+1)^{n}"
    return json.dumps(
        {
            "schema_version": 1,
            "timescale": timescale,
            "equation": {"kind": "second", "lambda": -1, "kernel": kernel, "forcing": forcing},
        }
    )


def check_rational(rng: np.random.Generator) -> CheckResult:
    failures = []
    worst = 0.0
    for grid in RATIONAL_GRIDS:
        for n in (1, 2, 3):
            loaded = build_problem(parse_problem_text(rational_problem_text(n, grid)), source=f"rational-n{n}")
            candidate = 1.0 / (loaded.ts.points + 1.0)
            result = verify_candidate(loaded, candidate)
            worst = max(worst, result.max_residual)
            if result.max_residual > 1e-12:
                failures.append(f"n={n} grid={grid['type']}: residual {result.max_residual:.3e}")
    return _result(2, "rational kernel 1/(t+1)", failures, f"max residual {worst:.1e}")


# ---------------------------------------------------------------------
# 3-7: calculus and kernel identities on random instances
# ---------------------------------------------------------------------


def check_exponential_series(rng: np.random.Generator) -> CheckResult:
    failures = []
    for k in range(100):
        ts = instances.random_grid(rng, gap=(0.05, 0.25))
        h = calculus.monomial_tensor(ts, ts.size - 1)
        tri = np.tril(np.ones((ts.size, ts.size), dtype=bool))
        for lam in instances.LAMBDAS:
            series = sum(lam**m * h[m] for m in range(ts.size))
            product = calculus.exp_matrix(ts, lam)
            if not all_rel_close(series[tri], product[tri], rel=1e-12):
                failures.append(f"instance {k} lambda={lam}: series != product")
    return _result(3, "exponential = monomial series", failures, "100 grids x 4 lambdas")


def check_iterated_kernels(rng: np.random.Generator) -> CheckResult:
    failures = []
    for k in range(100):
        p = instances.random_linear_problem(rng)
        it = iterated_kernels(p, termination_depth(p.ts))
        if it.alternate_discrepancy > 1e-12:
            failures.append(f"instance {k}: recursions differ by {it.alternate_discrepancy:.3e}")
        if it.bound_margin < 0:
            failures.append(f"instance {k}: iterated-kernel bound margin {it.bound_margin:.3e}")
    return _result(4, "iterated kernels: recursions and bound", failures, "100 instances")


def _resolvent_instances(rng: np.random.Generator) -> list[ProblemSpec]:
    return [instances.random_linear_problem(rng, lam=instances.LAMBDAS[k % 4]) for k in range(50)]


def check_reciprocity(rng: np.random.Generator) -> CheckResult:
    failures = []
    for k, p in enumerate(_resolvent_instances(rng)):
        rec = reciprocity_check(p, resolvent(p).table)
        if max(rec.forward, rec.backward) > 1e-10:
            failures.append(f"instance {k}: forward={rec.forward:.3e} backward={rec.backward:.3e}")
    return _result(5, "resolvent reciprocity", failures, "50 instances")


def check_resolvent_formula(rng: np.random.Generator) -> CheckResult:
    failures = []
    for k, p in enumerate(_resolvent_instances(rng)):
        gap = scaled_error(solve_resolvent(p).solution.values, solve_direct(p).solution.values)
        if gap > 1e-10:
            failures.append(f"instance {k}: resolvent vs direct {gap:.3e}")
    return _result(6, "resolvent solution formula", failures, "50 instances")


def check_picard_bound(rng: np.random.Generator) -> CheckResult:
    failures = []
    for k in range(50):
        p = instances.random_linear_problem(rng)
        report = picard_solve(p)
        if report.bound_checks["difference_bound"] < 0:
            failures.append(f"instance {k}: difference bound margin {report.bound_checks['difference_bound']:.3e}")
        gap = scaled_error(report.solution.values, solve_direct(p).solution.values)
        if gap > 1e-9:
            failures.append(f"instance {k}: picard vs direct {gap:.3e}")
    return _result(7, "picard difference bound", failures, "50 instances")


# ---------------------------------------------------------------------
# 8-9: IVP bridge and polynomial-kernel resolvent
# ---------------------------------------------------------------------


def check_ivp_bridge(rng: np.random.Generator) -> CheckResult:
    failures = []
    for k in range(50):
        ivp = instances.random_ivp(rng)
        stepped = solve_ivp(ivp)
        phi = solve_direct(ivp_to_volterra(ivp)).solution
        size = phi.ts.size
        gap = scaled_error(phi.values, stepped[ivp.n].values[:size])
        if gap > 1e-9:
            failures.append(f"instance {k} (n={ivp.n}): y^(n) gap {gap:.3e}")
        for i, y in enumerate(taylor_reconstruct(ivp, phi)):
            gap = scaled_error(y.values, stepped[i].values[:size])
            if gap > 1e-9:
                failures.append(f"instance {k} (n={ivp.n}): y^({i}) reconstruction gap {gap:.3e}")
    return _result(8, "IVP <-> Volterra bridge", failures, "50 instances")


def check_poly_resolvent(rng: np.random.Generator) -> CheckResult:
    ts = TimeScale(points=np.arange(0.0, 4.0 + 0.25, 0.5))
    k = PolyKernel(n=2, p=[0.0, 1.0])
    via_ivp = resolvent_via_ivp(k, 1.0, ts)
    series = resolvent(poly_kernel_problem(k, 1.0, ts)).table
    failures = []
    if not rel_close(via_ivp.at(1.0, 0.0), 0.5, rel=1e-9):
        failures.append(f"Gamma(1;1,0) = {via_ivp.at(1.0, 0.0)!r}, expected 0.5")
    gap = scaled_error(via_ivp.entries, series.entries)
    if gap > 1e-9:
        failures.append(f"IVP table vs series resolvent {gap:.3e}")
    pts = ts.points
    closed = np.array(
        [
            [hyperbolic_resolvent_closed_form(ts, pts[i], pts[j]) if i > j else 0.0 for j in range(ts.size)]
            for i in range(ts.size)
        ]
    )
    strict = np.tril(np.ones_like(closed, dtype=bool), k=-1)
    gap = scaled_error(via_ivp.entries[strict], closed[strict])
    if gap > 1e-9:
        failures.append(f"closed form vs IVP table {gap:.3e}")
    return _result(9, "polynomial-kernel resolvent", failures, "hZ h=0.5, n=2")


# ---------------------------------------------------------------------
# 10-13: first kind, convolution, nonlinear, change of order
# ---------------------------------------------------------------------


def check_first_kind(rng: np.random.Generator) -> CheckResult:
    failures = []
    p = FirstKindProblem(ts=_integers(0, 6), kernel=parse("cos1(t,sigma(s))"), forcing=parse("hk(1,t,a)"))
    report = solve_first_kind(p)
    if not all_rel_close(report.solution.values, np.array([1.0, 1.0, 2.0, 4.0, 7.0, 11.0]), rel=1e-12):
        failures.append(f"cos1/h1 example gave {list(report.solution.values)}")
    if report.residual > 1e-10 * report.metadata["residual_scale"]:
        failures.append(f"first-kind residual {report.residual:.3e}")
    for k in range(100):
        ts = instances.random_grid(rng, min_points=3)
        kernel = instances.random_kernel(rng, ts)
        target = rng.uniform(-1.0, 1.0, size=ts.size)
        forcing = GridFunction(ts=ts, values=kernel.strict @ (ts.mu * target))
        got = solve_first_kind(FirstKindProblem(ts=ts, kernel=kernel, forcing=forcing)).solution.values
        gap = scaled_error(got, target[:-1])
        if gap > 1e-9:
            failures.append(f"round trip {k}: gap {gap:.3e}")
    return _result(10, "first kind", failures, "example + 100 round trips")


def check_convolution(rng: np.random.Generator) -> CheckResult:
    failures = []
    ts = _integers(0, 8)
    kernel = GridFunction.from_callable(ts, lambda t: calculus.trig(ts, 1.0, t, ts.a)[0])
    forcing = GridFunction.from_callable(ts, lambda t: calculus.trig(ts, 1.0, t, ts.a)[1])
    phi = solve_direct(convolution_problem(ts, 2.0, kernel, forcing)).solution.values
    expected = ts.points * 2.0 ** (ts.points - 1.0)
    if not all_rel_close(phi, expected, rel=1e-10):
        failures.append(f"cos1/sin1 example gave {list(phi[:4])}...")
    for k in range(100):
        grid = instances.random_grid(rng, max_points=10, gap=(0.5, 1.0))
        result = convolution(grid, instances.random_values(rng, grid), instances.random_values(rng, grid))
        if result.discrepancy > 1e-10:
            failures.append(f"triple {k}: forms differ by {result.discrepancy:.3e}")
    return _result(11, "convolution kernel", failures, "example + 100 triples")


def check_nonlinear(rng: np.random.Generator) -> CheckResult:
    failures = []
    p = NonlinearProblem(
        ts=_integers(0, 3),
        lam=1.0,
        F=parse("x^2"),
        forcing=1.0,
        lipschitz_L=4.0,
        bound_M=4.0,
        domain_alpha=2.0,
    )
    got = solve_nonlinear(p, "direct").solution.values
    if not np.array_equal(got, np.array([1.0, 2.0, 6.0, 42.0])):
        failures.append(f"x^2 example gave {list(got)}")
    for k in range(20):
        report = solve_nonlinear(instances.random_nonlinear(rng), "picard")
        if report.bound_checks["error_bound"] < 0:
            failures.append(f"instance {k}: error bound margin {report.bound_checks['error_bound']:.3e}")
    for k in range(100):
        ts = instances.random_grid(rng)
        h = calculus.monomial_tensor(ts, 8)
        diff = ts.points[:, None] - ts.points[None, :]
        tri = np.tril(np.ones_like(diff, dtype=bool))
        for order in range(9):
            margin = bound_margin((diff**order / factorial(order))[tri], h[order][tri])
            if margin < 0:
                failures.append(f"grid {k}: h_{order} exceeds (t-s)^k/k! by {-margin:.3e}")
    return _result(12, "nonlinear successive approximation", failures, "example + 20 instances + monomial bound")


def check_change_of_order(rng: np.random.Generator) -> CheckResult:
    failures = []
    for k in range(100):
        ts = instances.random_grid(rng, min_points=3)
        table = rng.uniform(0.5, 1.5, size=(ts.size, ts.size))
        i0 = int(rng.integers(0, ts.size - 1))
        i1 = int(rng.integers(i0 + 1, ts.size))
        lhs, rhs = calculus.change_of_order_check(ts, table, float(ts.points[i0]), float(ts.points[i1]))
        if not rel_close(lhs, rhs, rel=1e-12):
            failures.append(f"pair {k}: lhs={lhs!r} rhs={rhs!r}")
    return _result(13, "change of integration order", failures, "100 pairs")


CHECKS: tuple[Callable[[np.random.Generator], CheckResult], ...] = (
    check_geometric,
    check_rational,
    check_exponential_series,
    check_iterated_kernels,
    check_reciprocity,
    check_resolvent_formula,
    check_picard_bound,
    check_ivp_bridge,
    check_poly_resolvent,
    check_first_kind,
    check_convolution,
    check_nonlinear,
    check_change_of_order,
)


def _run_one(check: Callable[[np.random.Generator], CheckResult], rng: np.random.Generator, number: int) -> CheckResult:
    t0 = time.perf_counter()
    try:
        result = check(rng)
    except Exception as exc:  # crash counts as a failure
        logger.exception("TSV_SELFTEST_CHECK_CRASHED check=%s", check.__name__)
        result = CheckResult(number, check.__name__.removeprefix("check_"), False, f"{type(exc).__name__}: {exc}")
    elapsed = (time.perf_counter() - t0) * 1000.0
    return CheckResult(result.number, result.name, result.passed, result.detail, elapsed)


def run_all(seed: int) -> list[CheckResult]:
    seeds = np.random.SeedSequence(seed).spawn(len(CHECKS))
    results = [
        _run_one(check, np.random.default_rng(s), number)
        for number, (check, s) in enumerate(zip(CHECKS, seeds), start=1)
    ]
    logger.info(
        "TSV_SELFTEST_DONE seed=%d passed=%d failed=%d",
        seed,
        sum(r.passed for r in results),
        sum(not r.passed for r in results),
    )
    return results


def format_table(results: list[CheckResult]) -> str:
    width = max(len(r.name) for r in results)
    lines = [f"{'#':>2}  {'check':<{width}}  result  {'ms':>8}  detail"]
    for r in results:
        status = "PASS" if r.passed else "FAIL"
        lines.append(f"{r.number:>2}  {r.name:<{width}}  {status:<6}  {r.elapsed_ms:8.1f}  {r.detail}")
    return "\n".join(lines)


def _corrupted_monomial_step(h_prev: np.ndarray, mu: np.ndarray, j_s: int) -> np.ndarray:
    c = np.concatenate(([0.0], np.cumsum(h_prev[:-1] * mu[:-1] * (1.0 + 1e-6))))
    return c - c[j_s]


@contextlib.contextmanager
def injected_fault(name: Optional[str]) -> Iterator[None]:
    """Temporarily corrupt one recursion so the suite can be shown to fail."""
    if name is None:
        yield
        return
    if name != "monomial":
        raise ValueError(f"unknown fault {name!r}")
    with mock.patch.object(calculus, "_monomial_step", _corrupted_monomial_step):
        logger.warning("TSV_SELFTEST_FAULT_INJECTED fault=%s", name)
        yield
