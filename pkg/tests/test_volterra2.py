from types import SimpleNamespace

import numpy as np
import pytest

from src.config.config import scaled_error
from src.errors import DomainExit, InvalidProblem, MaxIterations, Truncated
from src.exprlang.parser import parse
from src.selftest import instances
from src.timescale.scale import GridFunction, build_time_scale
from src.volterra2 import linear
from src.volterra2.kernels import iterated_kernels, reciprocity_check, resolvent, termination_depth
from src.volterra2.linear import (
    SOLVERS,
    neumann_solve,
    picard_solve,
    residual_values,
    solve_direct,
    solve_resolvent,
)
from src.volterra2.nonlinear import solve_nonlinear
from src.volterra2.problems import NonlinearProblem, ProblemSpec, SolverOptions, SystemProblem
from src.volterra2.systems import solve_system_direct, solve_system_picard

# --- FIXTURES ---
# Logic: One small scale per family of hand-checked values.
def integers(stop):
    return build_time_scale({"type": "uniform", "start": 0, "stop": stop, "step": 1})


@pytest.fixture
def geometric():
    return ProblemSpec(ts=integers(3), lam=1.0, kernel=parse("1"), forcing=parse("1"))


@pytest.fixture
def squares():
    return NonlinearProblem(
        ts=integers(3),
        lam=1.0,
        F=parse("x^2"),
        forcing=1.0,
        lipschitz_L=4.0,
        bound_M=4.0,
        domain_alpha=2.0,
    )


def rational(n, ts):
    terms = " + ".join(f"1/((sigma(s)+1)^{k}*(s+1)^{n - k})" for k in range(1, n + 1))
    return ProblemSpec(
        ts=ts,
        lam=-1.0,
        kernel=parse(f"(t+1)^{n - 1}*({terms})"),
        forcing=parse(f"(t+1)^{n - 1}/(a+1)^{n}"),
    )


# --- 1. POSITIVE TESTING (The Contract) ---
@pytest.mark.parametrize("method", sorted(SOLVERS))
def test_every_method_solves_geometric(geometric, method):
    # Logic: Prove φ = ∫φ + 1 on Z gives 2^t whichever method is used.
    report = SOLVERS[method](geometric)
    assert list(report.solution.values) == pytest.approx([1.0, 2.0, 4.0, 8.0], rel=1e-12)
    assert report.residual_ok(1e-12)
    assert report.bounds_ok()


def test_geometric_on_ten_steps_terminates_early():
    # Logic: Prove the iteration counts stay within the point count on Z∩[0,10].
    p = ProblemSpec(ts=integers(10), lam=1.0, kernel=parse("1"), forcing=parse("1"))
    assert picard_solve(p).terms_or_iterations <= 11
    assert neumann_solve(p).metadata["depth"] <= 11
    assert list(solve_direct(p).solution.values) == [2.0**k for k in range(11)]


@pytest.mark.parametrize("n", [1, 2, 3])
@pytest.mark.parametrize(
    "points", [[0, 1, 2, 3, 4, 5], [0, 0.5, 1.25, 3]], ids=["integers", "irregular"]
)
def test_rational_kernel_solution(n, points):
    # Logic: Prove 1/(t+1) satisfies the sum-of-reciprocals family exactly, on any grid.
    ts = build_time_scale({"type": "explicit", "points": points})
    p = rational(n, ts)
    candidate = 1.0 / (ts.points + 1.0)
    assert float(np.max(residual_values(p, candidate))) <= 1e-12
    assert solve_direct(p).solution.values == pytest.approx(candidate, rel=1e-12)


@pytest.mark.parametrize("seed", range(5))
def test_methods_agree_on_random_instances(seed):
    # Logic: Prove the four solvers and both kernel recursions agree on seeded instances.
    rng = np.random.default_rng(seed)
    p = instances.random_linear_problem(rng)
    direct = solve_direct(p).solution.values
    for method in ("resolvent", "neumann", "picard"):
        assert scaled_error(SOLVERS[method](p).solution.values, direct) <= 1e-9
    it = iterated_kernels(p, termination_depth(p.ts))
    assert it.alternate_discrepancy <= 1e-12
    assert it.bound_margin >= 0.0


@pytest.mark.parametrize("lam", [1.0, -1.0, 0.5, -0.5])
def test_reciprocity(lam):
    # Logic: Prove both reciprocity identities and the -λ inversion for the computed resolvent.
    p = instances.random_linear_problem(np.random.default_rng(7), lam=lam)
    res = resolvent(p)
    rec = reciprocity_check(p, res.table)
    assert rec.forward <= 1e-10
    assert rec.backward <= 1e-10
    assert rec.reverse <= 1e-10
    assert res.bound_margin >= 0.0


def test_system_direct_and_picard():
    # Logic: Prove the block solver on a coupled 2x2 example and the vector Picard agreement.
    p = SystemProblem(
        ts=integers(2),
        lam=1.0,
        kernels=[[parse("1"), parse("-2")], [parse("0"), parse("1")]],
        forcings=[parse("1"), parse("1")],
    )
    direct = solve_system_direct(p)
    phi1, phi2 = direct.components
    assert list(phi1.values) == [1.0, 0.0, -4.0]
    assert list(phi2.values) == [1.0, 2.0, 4.0]
    picard = solve_system_picard(p)
    assert picard.metadata["direct_gap"] <= 1e-12
    assert direct.residual == 0.0


def test_coupled_exponential_monomial_system():
    # Logic: Prove the e_2 / h_1 coupled system on Z∩[0,2] gives φ_1 = 1, -1, 0 and φ_2 = 0, 3, 8 by both solvers.
    p = SystemProblem(
        ts=integers(2),
        lam=1.0,
        kernels=[
            [parse("-2*e(2,t,sigma(s))"), parse("1")],
            [parse("-1"), parse("4*hk(1,t,sigma(s))")],
        ],
        forcings=[parse("1"), parse("4*hk(1,t,a)")],
    )
    direct = solve_system_direct(p)
    phi1, phi2 = direct.components
    assert list(phi1.values) == pytest.approx([1.0, -1.0, 0.0], abs=1e-12)
    assert list(phi2.values) == pytest.approx([0.0, 3.0, 8.0], abs=1e-12)
    assert direct.residual <= 1e-12
    picard = solve_system_picard(p)
    assert picard.metadata["direct_gap"] <= 1e-12


def test_nonlinear_squares_direct(squares):
    # Logic: Prove forward substitution with F = x^2 gives 1, 2, 6, 42 and flags the domain exit.
    report = solve_nonlinear(squares, "direct")
    assert list(report.solution.values) == [1.0, 2.0, 6.0, 42.0]
    assert report.metadata["domain_exit_t"] == 2.0
    assert report.warnings


@pytest.mark.parametrize("seed", range(3))
def test_nonlinear_picard_error_bound(seed):
    # Logic: Prove every Picard iterate sits inside the error bound on certified instances.
    p = instances.random_nonlinear(np.random.default_rng(seed))
    report = solve_nonlinear(p, "picard")
    assert report.bound_checks["error_bound"] >= 0.0
    assert report.metadata["direct_gap"] <= 1e-9


# --- 2. NEGATIVE TESTING (The Fragility) ---
def test_neumann_truncation_reports_tail(geometric):
    # Logic: Prove a too-small term budget raises with the partial sum and L Σ (|λ|M)^k h_k(b,a).
    with pytest.raises(Truncated) as err:
        neumann_solve(geometric, max_terms=2)
    assert err.value.tail_bound == 4.0
    assert list(err.value.report.solution.values) == [1.0, 2.0, 3.0, 4.0]


def test_picard_max_iterations(geometric):
    # Logic: Prove Picard refuses to return an unsettled iterate.
    with pytest.raises(MaxIterations):
        picard_solve(geometric, max_iter=1)


def test_nonlinear_picard_domain_exit(squares):
    # Logic: Prove Picard stops at the first point where an iterate leaves |x| <= α.
    with pytest.raises(DomainExit) as err:
        solve_nonlinear(squares, "picard")
    assert err.value.t == 2.0


def test_nonlinear_declared_constants_are_spot_checked():
    # Logic: Prove an understated bound M is caught at construction.
    with pytest.raises(InvalidProblem):
        NonlinearProblem(
            ts=integers(3), lam=1.0, F=parse("x^2"), forcing=1.0, lipschitz_L=4.0, bound_M=1.0, domain_alpha=2.0
        )


def test_nonlinear_unknown_method(squares):
    # Logic: Prove only direct and picard are accepted.
    with pytest.raises(InvalidProblem):
        solve_nonlinear(squares, "neumann")


# --- 3. CONSTRAINTS (The Limits) ---
def test_zero_lambda_returns_forcing():
    # Logic: Prove λ = 0 short-circuits every method to φ = f.
    ts = integers(4)
    p = ProblemSpec(ts=ts, lam=0.0, kernel=parse("t+s"), forcing=parse("t^2"))
    assert resolvent(p).depth == 0
    for method in SOLVERS:
        assert list(SOLVERS[method](p).solution.values) == [0.0, 1.0, 4.0, 9.0, 16.0]
    assert picard_solve(p).terms_or_iterations == 1


def test_two_point_scale():
    # Logic: Prove the smallest scale has φ = f and termination depth 0.
    ts = build_time_scale({"type": "explicit", "points": [0, 1]})
    p = ProblemSpec(ts=ts, lam=3.0, kernel=parse("1"), forcing=parse("1"))
    assert termination_depth(ts) == 0
    assert list(solve_resolvent(p).solution.values) == [1.0, 4.0]


# --- 4. THE BRANCHES (Picard start and stop rules) ---
def test_picard_from_custom_initial_guess(geometric):
    # Logic: Prove a non-default φ_0 still converges to the direct solution.
    p = ProblemSpec(
        ts=geometric.ts,
        lam=1.0,
        kernel=parse("1"),
        forcing=parse("1"),
        picard_initial=GridFunction.constant(geometric.ts, 0.0),
    )
    report = picard_solve(p)
    assert report.metadata["direct_gap"] <= 1e-12
    assert report.bound_checks["difference_bound"] >= 0.0


def test_picard_stop_reasons():
    # Logic: Walk the tolerance stop and the exact-after-N stop.
    loose = ProblemSpec(
        ts=integers(3), lam=1.0, kernel=parse("1"), forcing=parse("1"), options=SolverOptions(tol=10.0)
    )
    assert picard_solve(loose).metadata["stop"] == "difference"
    tight = ProblemSpec(
        ts=integers(3), lam=1.0, kernel=parse("1"), forcing=parse("1"), options=SolverOptions(tol=1e-300)
    )
    report = picard_solve(tight)
    assert report.metadata["stop"] in ("exact", "tail_bound")
    assert report.metadata["direct_gap"] == 0.0


def test_exact_claims_are_checked(monkeypatch):
    # Logic: Prove Neumann and Picard warn when their exactness facts fail, and stay quiet when they hold.
    p = ProblemSpec(
        ts=integers(3), lam=1.0, kernel=parse("1"), forcing=parse("1"), options=SolverOptions(tol=1e-300)
    )
    assert not neumann_solve(p).warnings
    clean = picard_solve(p)
    assert clean.metadata["claims_exact"]
    assert not clean.warnings

    real = linear.iterated_kernels

    def doubled(problem, n_max):
        tables = real(problem, n_max).tables
        return SimpleNamespace(tables=[SimpleNamespace(strict=2.0 * t.strict) for t in tables])

    monkeypatch.setattr(linear, "iterated_kernels", doubled)
    skewed = neumann_solve(p)
    assert skewed.metadata["term_identity_gap"] > 1e-12
    assert skewed.warnings

    monkeypatch.setattr(linear, "forward_substitution", lambda problem: np.zeros(problem.ts.size))
    off = picard_solve(p)
    assert off.metadata["direct_gap"] > 1e-12
    assert off.warnings
