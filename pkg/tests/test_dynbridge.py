import numpy as np
import pytest

from src.config.config import scaled_error
from src.errors import InvalidProblem, LambdaZero, NotRegressive, OrderTooHigh
from src.selftest import instances
from src.timescale.scale import GridFunction, build_time_scale
from src.volterra2.kernels import resolvent
from src.volterra2.linear import solve_direct
from src.dynbridge.ivp import (
    LinearIVP,
    PolyKernel,
    hyperbolic_resolvent_closed_form,
    ivp_to_volterra,
    poly_kernel_problem,
    resolvent_via_ivp,
    solve_ivp,
    taylor_reconstruct,
)

# --- FIXTURES ---
def integers(stop):
    return build_time_scale({"type": "uniform", "start": 0, "stop": stop, "step": 1})


@pytest.fixture
def half_steps():
    return build_time_scale({"type": "uniform", "start": 0, "stop": 4, "step": 0.5})


@pytest.fixture
def hyperbolic():
    # n = 2, p_1 ≡ 0, p_2 ≡ 1
    return PolyKernel(n=2, p=[0.0, 1.0])


# --- 1. POSITIVE TESTING (The Contract) ---
def test_first_order_growth():
    # Logic: Prove y^Δ = y, y(0) = 1 on Z becomes φ = -∫(-1)φ + 1 with φ = 2^t.
    ivp = LinearIVP(ts=integers(4), n=1, p=[-1.0], q=0.0, s=0.0, y0=[1.0])
    second = ivp_to_volterra(ivp)
    assert second.lam == -1.0
    assert second.kernel_table.at(1, 0) == -1.0
    assert list(second.forcing_values) == [1.0, 1.0, 1.0, 1.0]
    assert list(solve_direct(second).solution.values) == [1.0, 2.0, 4.0, 8.0]


def test_second_order_bridge_and_reconstruction():
    # Logic: Prove y^ΔΔ = y, (y, y^Δ)(0) = (1, 0) yields φ = 1, 1, 2, 4 and Taylor recovers y and y^Δ.
    ivp = LinearIVP(ts=integers(5), n=2, p=[0.0, -1.0], q=0.0, s=0.0, y0=[1.0, 0.0])
    phi = solve_direct(ivp_to_volterra(ivp)).solution
    assert list(phi.values) == [1.0, 1.0, 2.0, 4.0]
    stepped = solve_ivp(ivp)
    assert list(stepped[2].values[:4]) == [1.0, 1.0, 2.0, 4.0]
    y, dy = taylor_reconstruct(ivp, phi)
    assert y.values == pytest.approx(stepped[0].values[:4])
    assert dy.values == pytest.approx(stepped[1].values[:4])


def test_initial_data_at_sigma_s(half_steps):
    # Logic: Prove the at_sigma_s convention starts the stepping one point later.
    ivp = LinearIVP(ts=half_steps, n=2, p=[0.0, -1.0], q=0.0, s=0.0, y0=[0.0, 1.0], convention="at_sigma_s")
    assert ivp.domain.a == 0.5
    y = solve_ivp(ivp)[0]
    assert y.at(1.0) == pytest.approx(0.5)


@pytest.mark.parametrize("seed", range(8))
def test_bridge_on_random_ivps(seed):
    # Logic: Prove the Volterra route and direct stepping agree on every derivative level.
    ivp = instances.random_ivp(np.random.default_rng(seed))
    stepped = solve_ivp(ivp)
    phi = solve_direct(ivp_to_volterra(ivp)).solution
    size = phi.ts.size
    assert scaled_error(phi.values, stepped[ivp.n].values[:size]) <= 1e-9
    for i, y in enumerate(taylor_reconstruct(ivp, phi)):
        assert scaled_error(y.values, stepped[i].values[:size]) <= 1e-9


def test_polynomial_kernel_resolvent(half_steps, hyperbolic):
    # Logic: Prove the IVP resolvent matches the hand value, the series resolvent and the closed form.
    via_ivp = resolvent_via_ivp(hyperbolic, 1.0, half_steps)
    assert via_ivp.at(1.0, 0.0) == pytest.approx(0.5, rel=1e-9)
    assert via_ivp.at(0.5, 0.0) == pytest.approx(0.0, abs=1e-12)
    series = resolvent(poly_kernel_problem(hyperbolic, 1.0, half_steps)).table
    assert scaled_error(via_ivp.entries, series.entries) <= 1e-9
    pts = half_steps.points
    for i in range(half_steps.size):
        for j in range(i):
            assert hyperbolic_resolvent_closed_form(half_steps, pts[i], pts[j]) == pytest.approx(
                via_ivp.entries[i, j], rel=1e-9, abs=1e-9
            )


def test_polynomial_kernel_diagonal(half_steps, hyperbolic):
    # Logic: Prove K(t,t) = h_1(t,σ(t)) = -μ(t) on the diagonal of the table.
    table = hyperbolic.table(half_steps)
    assert table.at(1.0, 1.0) == pytest.approx(-0.5)
    assert table.at(2.0, 1.0) == pytest.approx(0.5)


# --- 2. NEGATIVE TESTING (The Fragility) ---
def test_resolvent_via_ivp_needs_nonzero_lambda(half_steps, hyperbolic):
    # Logic: Prove λ = 0 is redirected to the series resolvent.
    with pytest.raises(LambdaZero):
        resolvent_via_ivp(hyperbolic, 0.0, half_steps)


def test_order_too_high_for_grid():
    # Logic: Prove an order the grid cannot resolve is refused up front.
    with pytest.raises(OrderTooHigh):
        LinearIVP(ts=integers(3), n=3, p=[0.0, 0.0, 0.0], q=0.0, s=0.0, y0=[1.0, 0.0, 0.0])
    with pytest.raises(OrderTooHigh):
        resolvent_via_ivp(PolyKernel(n=3, p=[0.0, 0.0, 1.0]), 1.0, integers(2))


def test_inconsistent_ivp_data():
    # Logic: Prove coefficient and initial-value counts must match the order.
    with pytest.raises(InvalidProblem):
        LinearIVP(ts=integers(5), n=2, p=[0.0], q=0.0, s=0.0, y0=[1.0, 0.0])


def test_reconstruction_needs_matching_domain():
    # Logic: Prove φ must live on T^{κ^n} of the IVP domain.
    ivp = LinearIVP(ts=integers(5), n=2, p=[0.0, -1.0], q=0.0, s=0.0, y0=[1.0, 0.0])
    with pytest.raises(InvalidProblem):
        taylor_reconstruct(ivp, GridFunction.constant(integers(5), 1.0))


# --- 3. CONSTRAINTS (The Limits) ---
def test_closed_form_needs_mu_not_one():
    # Logic: Prove the closed form refuses μ(s) = 1 where 1 - μ(s) vanishes.
    with pytest.raises(NotRegressive):
        hyperbolic_resolvent_closed_form(integers(4), 3, 0)
