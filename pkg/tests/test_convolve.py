import numpy as np
import pytest

from src.config.config import all_rel_close
from src.convolve.shift import convolution, convolution_problem, shift, shift_residual
from src.errors import InvalidProblem
from src.selftest import instances
from src.timescale import calculus
from src.timescale.scale import GridFunction, build_time_scale
from src.volterra2.linear import picard_solve, solve_direct

# --- FIXTURES ---
def integers(stop):
    return build_time_scale({"type": "uniform", "start": 0, "stop": stop, "step": 1})


@pytest.fixture
def z9():
    return integers(8)


# --- 1. POSITIVE TESTING (The Contract) ---
def test_shift_on_unit_grid_is_translation():
    # Logic: Prove f̂(t,s) = f(t - s) on Z for f = t^2.
    ts = integers(6)
    table = shift(ts, GridFunction.from_callable(ts, lambda t: t * t))
    assert table.at(5, 2) == 9.0
    assert table.at(4, 4) == 0.0
    assert table.at(6, 0) == 36.0


def test_convolutions_by_hand():
    # Logic: Prove (1*1)(3) = 3 and (t*1)(3) = 3 on Z.
    ts = integers(3)
    one = GridFunction.constant(ts, 1.0)
    ident = GridFunction.from_callable(ts, lambda t: t)
    assert convolution(ts, one, one).values.at(3) == 3.0
    assert convolution(ts, ident, one).values.at(3) == 3.0


def test_trig_kernel_equation(z9):
    # Logic: Prove φ = 2∫cos_1(t,σ(η))φΔη + sin_1(t,0) gives t·2^{t-1}.
    kernel = GridFunction.from_callable(z9, lambda t: calculus.trig(z9, 1.0, t, 0.0)[0])
    forcing = GridFunction.from_callable(z9, lambda t: calculus.trig(z9, 1.0, t, 0.0)[1])
    p = convolution_problem(z9, 2.0, kernel, forcing)
    phi = solve_direct(p).solution.values
    assert list(phi[1:4]) == [1.0, 4.0, 12.0]
    assert phi == pytest.approx(z9.points * 2.0 ** (z9.points - 1.0), rel=1e-10)
    assert picard_solve(p).metadata["direct_gap"] <= 1e-10


@pytest.mark.parametrize("seed", range(10))
def test_both_convolution_forms_agree(seed):
    # Logic: Prove ∫f̂(t,σ(η))g(η)Δη equals ∫f(η)ĝ(t,σ(η))Δη on irregular grids.
    rng = np.random.default_rng(seed)
    ts = instances.random_grid(rng, max_points=10, gap=(0.5, 1.0))
    result = convolution(ts, instances.random_values(rng, ts), instances.random_values(rng, ts))
    assert result.discrepancy <= 1e-10


@pytest.mark.parametrize("seed", range(5))
def test_shift_satisfies_its_recursion(seed):
    # Logic: Prove the table meets the boundary row, the diagonal seed and every stencil.
    rng = np.random.default_rng(seed)
    ts = instances.random_grid(rng, max_points=10, gap=(0.5, 1.0))
    f = instances.random_values(rng, ts)
    assert shift_residual(shift(ts, f), f) <= 1e-12


@pytest.mark.parametrize("lam", [0.5, 1.0])
@pytest.mark.parametrize("seed", range(10))
def test_shift_of_exponential_is_exponential(lam, seed):
    # Logic: Prove the shift of e_λ(·,a) is e_λ(t,s) on the whole lower triangle of an irregular grid.
    rng = np.random.default_rng(seed)
    ts = instances.random_grid(rng, max_points=10, gap=(0.1, 1.0))
    expected = calculus.exp_matrix(ts, lam)
    table = shift(ts, GridFunction(ts=ts, values=expected[:, 0]))
    tri = np.tril(np.ones((ts.size, ts.size), dtype=bool))
    assert all_rel_close(table.values[tri], expected[tri], rel=1e-10)


# --- 2. NEGATIVE TESTING (The Fragility) ---
def test_grid_mismatch(z9):
    # Logic: Prove functions from another scale are refused.
    other = integers(4)
    with pytest.raises(InvalidProblem):
        shift(z9, GridFunction.constant(other, 1.0))


def test_shift_lookup_above_diagonal(z9):
    # Logic: Prove the table is only read for t >= s.
    with pytest.raises(InvalidProblem):
        shift(z9, GridFunction.constant(z9, 1.0)).at(1, 2)


# --- 3. CONSTRAINTS (The Limits) ---
def test_convolution_problem_diagonal_is_kernel_at_a(z9):
    # Logic: Prove the never-integrated diagonal carries K(a).
    kernel = GridFunction.from_callable(z9, lambda t: t + 3.0)
    p = convolution_problem(z9, 1.0, kernel, 0.0)
    assert np.all(np.diag(p.kernel_table.entries) == 3.0)
