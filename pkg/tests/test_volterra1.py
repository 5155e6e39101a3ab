import numpy as np
import pytest

from src.config.config import scaled_error
from src.errors import KappaBoundary, NonzeroAtA, ZeroDiagonal
from src.exprlang.parser import parse
from src.selftest import instances
from src.timescale import calculus
from src.timescale.scale import GridFunction, build_time_scale
from src.volterra1.first_kind import (
    FirstKindProblem,
    first_kind_residual_values,
    first_to_second,
    kernel_partial_delta1,
    solve_first_kind,
)

# --- FIXTURES ---
def integers(stop):
    return build_time_scale({"type": "uniform", "start": 0, "stop": stop, "step": 1})


@pytest.fixture
def trig_example():
    # ∫ cos_1(t,σ(η)) φ(η) Δη = h_1(t,a)
    return FirstKindProblem(ts=integers(6), kernel=parse("cos1(t,sigma(s))"), forcing=parse("hk(1,t,a)"))


# --- 1. POSITIVE TESTING (The Contract) ---
def test_trig_example_solution(trig_example):
    # Logic: Prove the solution is h_2(t,0) + 1 on T^κ and the original equation holds at every point.
    report = solve_first_kind(trig_example)
    assert list(report.solution.values) == pytest.approx([1.0, 1.0, 2.0, 4.0, 7.0, 11.0], rel=1e-12)
    assert report.solution.ts.size == 6
    assert report.metadata["omitted_point"] == 6.0
    assert report.residual <= 1e-10 * report.metadata["residual_scale"]
    assert report.residuals.size == 7


def test_transformed_problem_for_trig_example(trig_example):
    # Logic: Prove the transformed kernel is sin_1(t,σ(η)) and the forcing is 1, with λ = +1.
    second = first_to_second(trig_example)
    ts = trig_example.ts
    assert second.lam == 1.0
    assert list(second.forcing_values) == [1.0] * 6
    for i in range(6):
        for j in range(i):
            expected = calculus.trig(ts, 1.0, ts.points[i], ts.points[j + 1], backward=True)[1]
            assert second.kernel_table.entries[i, j] == pytest.approx(expected, abs=1e-12)


def test_partial_derivative_in_first_slot():
    # Logic: Prove K^{Δ1} of h_1(t,σ(s)) is h_0 = 1 and of a constant is 0, from expressions and tables.
    ts = integers(4)
    assert kernel_partial_delta1(ts, parse("hk(1,t,sigma(s))"), 2, 0) == 1.0
    assert kernel_partial_delta1(ts, parse("5"), 3, 1) == 0.0
    table = FirstKindProblem(ts=ts, kernel=parse("cos1(t,sigma(s))"), forcing=0.0).kernel_table
    via_table = kernel_partial_delta1(ts, table, 2, 0)
    assert via_table == pytest.approx(-calculus.trig(ts, 1.0, 2, 1)[1])


def test_constant_kernel_reduction():
    # Logic: Prove K ≡ 1, f = h_1(t,a) gives φ ≡ 1 on T^κ.
    p = FirstKindProblem(ts=integers(4), kernel=parse("1"), forcing=parse("hk(1,t,a)"))
    assert list(solve_first_kind(p).solution.values) == [1.0, 1.0, 1.0, 1.0]


@pytest.mark.parametrize("seed", range(10))
def test_round_trip_recovers_solution(seed):
    # Logic: Prove f := ∫Kφ* leads back to φ* on T^κ.
    rng = np.random.default_rng(seed)
    ts = instances.random_grid(rng, min_points=3)
    kernel = instances.random_kernel(rng, ts)
    target = rng.uniform(-1.0, 1.0, size=ts.size)
    forcing = GridFunction(ts=ts, values=kernel.strict @ (ts.mu * target))
    got = solve_first_kind(FirstKindProblem(ts=ts, kernel=kernel, forcing=forcing)).solution.values
    assert scaled_error(got, target[:-1]) <= 1e-9


# --- 2. NEGATIVE TESTING (The Fragility) ---
def test_nonzero_forcing_at_a():
    # Logic: Prove f(a) != 0 has no solution and is rejected.
    p = FirstKindProblem(ts=integers(3), kernel=parse("1"), forcing=parse("t+1"))
    with pytest.raises(NonzeroAtA):
        first_to_second(p)


def test_vanishing_diagonal_names_points():
    # Logic: Prove every t with K(σ(t),t) = 0 is listed.
    p = FirstKindProblem(ts=integers(4), kernel=parse("s-1"), forcing=parse("hk(1,t,a)"))
    with pytest.raises(ZeroDiagonal) as err:
        first_to_second(p)
    assert err.value.points == [1.0]


def test_partial_derivative_at_b():
    # Logic: Prove K^{Δ1} refuses t = b.
    with pytest.raises(KappaBoundary):
        kernel_partial_delta1(integers(3), parse("t*s"), 3, 0)


# --- 3. CONSTRAINTS (The Limits) ---
def test_zero_forcing_gives_zero():
    # Logic: Prove uniqueness leaves only the zero solution for f ≡ 0.
    p = FirstKindProblem(ts=integers(4), kernel=parse("2+t"), forcing=0.0)
    assert list(solve_first_kind(p).solution.values) == [0.0] * 4


def test_residual_needs_values_on_kappa(trig_example):
    # Logic: Prove the residual refuses a candidate that includes the undetermined value at b.
    with pytest.raises(ValueError):
        first_kind_residual_values(trig_example, np.ones(7))
