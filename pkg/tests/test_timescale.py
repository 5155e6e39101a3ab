import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from pydantic import ValidationError

from src.config.config import bound_margin
from src.errors import (
    BackwardUnsupported,
    EmptyScale,
    KappaBoundary,
    NonMonotone,
    NotAPoint,
    NotRegressive,
)
from src.timescale import calculus
from src.timescale.scale import GridFunction, KernelTable, TimeScale, build_time_scale

# --- FIXTURES ---
# Logic: Z∩[0,4] and hZ∩[0,2] carry every hand-computed value below.
@pytest.fixture
def z5():
    return build_time_scale({"type": "uniform", "start": 0, "stop": 4, "step": 1})


@pytest.fixture
def half():
    return build_time_scale({"type": "uniform", "start": 0, "stop": 2, "step": 0.5})


grids = st.lists(
    st.floats(min_value=0.05, max_value=0.5, allow_nan=False), min_size=1, max_size=10
).map(lambda gaps: TimeScale(points=np.concatenate(([0.0], np.cumsum(gaps)))))


# --- 1. POSITIVE TESTING (The Contract) ---
def test_generators_build_expected_points():
    # Logic: Prove each generator type yields its documented point set.
    assert list(build_time_scale({"type": "qscale", "q": 2, "start": 1, "count": 4}).points) == [1, 2, 4, 8]
    union = build_time_scale(
        {
            "type": "union",
            "parts": [
                {"type": "uniform", "start": 0, "stop": 2, "step": 1},
                {"type": "explicit", "points": [2, 2.5]},
            ],
        }
    )
    assert list(union.points) == [0.0, 1.0, 2.0, 2.5]


def test_jump_and_graininess(z5):
    # Logic: Prove σ/ρ/μ on interior points and the endpoint conventions σ(b)=b, μ(b)=0.
    assert calculus.jump(z5, 2) == (3.0, 1.0, 1.0)
    assert calculus.jump(z5, 4) == (4.0, 3.0, 0.0)
    assert calculus.jump(z5, 0).rho == 0.0
    assert z5.mu[-1] == 0.0


def test_delta_derivative_and_integral(z5):
    # Logic: Prove the forward quotient and the Riemann sum, including the reversed interval.
    f = GridFunction.from_callable(z5, lambda t: t * t)
    assert calculus.delta_derivative(z5, f, 2) == 5.0
    ident = GridFunction.from_callable(z5, lambda t: t)
    assert calculus.delta_integral(z5, ident, 0, 4) == 6.0
    assert calculus.delta_integral(z5, ident, 4, 0) == -6.0


def test_monomials_match_hand_values(z5, half):
    # Logic: Prove h_k on Z is a binomial coefficient and the hZ value h_2(1,0) = 0.25.
    assert calculus.monomial(z5, 2, 3, 0) == 3.0
    assert calculus.monomial(z5, 3, 4, 0) == 4.0
    assert calculus.monomial(half, 2, 1, 0) == pytest.approx(0.25, rel=1e-12)
    assert calculus.monomial(z5, 1, 0, 2) == -2.0
    assert calculus.monomial(z5, 2, 0, 2) == 3.0


def test_monomial_recursions_agree(half):
    # Logic: Prove both recursions give the same h_k at every pair, on both sides of s.
    pts = half.points
    for k in range(4):
        for t in pts:
            for s in pts:
                assert calculus.monomial_alt(half, k, t, s) == pytest.approx(
                    calculus.monomial(half, k, t, s), rel=1e-12, abs=1e-12
                )


def test_exponential_and_trig(z5):
    # Logic: Prove e_1 doubles per step on Z and the trig pair follows the coupled system.
    assert calculus.exp_general(z5, 1.0, 3, 0) == 8.0
    assert calculus.exp_general(z5, 1.0, 0, 3) == 0.125
    assert calculus.trig(z5, 1.0, 2, 0) == (0.0, 2.0)
    assert calculus.trig(z5, 1.0, 4, 0) == (-4.0, 0.0)
    assert calculus.mfunc(z5, 1.0, 4, 0) == 2.0


def test_backward_trig_inverts_the_step(z5):
    # Logic: Prove backward stepping lands on the state that forward stepping maps back to (1, 0).
    c, s = calculus.trig(z5, 1.0, 0, 2, backward=True)
    assert (c, s) == pytest.approx((0.0, -0.5))


def test_circle_arithmetic_group_law(half):
    # Logic: Prove e_{p⊕q} = e_p e_q and e_{⊖p} = 1/e_p on a grid.
    p = GridFunction.from_callable(half, lambda t: 1.0 + t)
    q = GridFunction.constant(half, 0.3)
    plus = calculus.circle_grid("plus", p, q)
    assert calculus.exp_general(half, plus, 2, 0) == pytest.approx(
        calculus.exp_general(half, p, 2, 0) * calculus.exp_general(half, q, 2, 0), rel=1e-12
    )
    minus = calculus.circle_grid("minus", GridFunction.constant(half, 0.0), p)
    assert calculus.exp_general(half, minus, 2, 0) == pytest.approx(
        1.0 / calculus.exp_general(half, p, 2, 0), rel=1e-12
    )
    assert calculus.circle("minus", calculus.circle("plus", 1.0, 2.0, 0.5), 2.0, 0.5) == 1.0


@settings(max_examples=30, deadline=None)
@given(grids, st.data())
def test_exponential_semigroup(ts, data):
    # Logic: Prove e_p(t,s)·e_p(s,r) = e_p(t,r) for any order of the three points.
    index = st.integers(min_value=0, max_value=ts.size - 1)
    t, s, r = (float(ts.points[data.draw(index)]) for _ in range(3))
    p = GridFunction.from_callable(ts, lambda u: 0.5 + u)
    chained = calculus.exp_general(ts, p, t, s) * calculus.exp_general(ts, p, s, r)
    assert chained == pytest.approx(calculus.exp_general(ts, p, t, r), rel=1e-12)


@settings(max_examples=40, deadline=None)
@given(grids)
def test_monomial_derivative_in_second_slot(ts):
    # Logic: Prove (h_k(t,σ(s)) - h_k(t,s))/μ(s) = -h_{k-1}(t,σ(s)) for every t and every s < b.
    h = calculus.monomial_tensor(ts, 6)
    mu = ts.mu[:-1]
    for k in range(1, 7):
        delta_s = (h[k][:, 1:] - h[k][:, :-1]) / mu
        assert np.allclose(delta_s, -h[k - 1][:, 1:], rtol=1e-9, atol=1e-9)


# --- 2. NEGATIVE TESTING (The Fragility) ---
def test_off_grid_point_is_rejected(z5):
    # Logic: Prove lookups never interpolate.
    with pytest.raises(NotAPoint):
        z5.index_of(1.5)


def test_bad_generators():
    # Logic: Prove degenerate and malformed descriptions fail with their own errors.
    with pytest.raises(EmptyScale):
        build_time_scale({"type": "qscale", "q": 2, "start": 1, "count": 1})
    with pytest.raises(NonMonotone):
        build_time_scale({"type": "explicit", "points": [0, 1, 1]})
    with pytest.raises(ValidationError):
        build_time_scale({"type": "uniform", "start": 0, "stop": 1, "step": 0})


def test_derivative_at_right_endpoint(z5):
    # Logic: Prove the Δ-derivative refuses t = b.
    with pytest.raises(KappaBoundary):
        calculus.delta_derivative(z5, GridFunction.constant(z5, 1.0), 4)


def test_non_regressive_exponential(z5):
    # Logic: Prove a vanishing factor 1 + pμ is reported instead of producing 0.
    with pytest.raises(NotRegressive):
        calculus.exp_general(z5, -1.0, 3, 0)


def test_backward_trig_needs_opt_in(z5):
    # Logic: Prove the public default refuses t < s.
    with pytest.raises(BackwardUnsupported):
        calculus.trig(z5, 1.0, 0, 2)


# --- 3. CONSTRAINTS (The Limits) ---
def test_snapping_within_tolerance(z5):
    # Logic: Prove a point a rounding error away from a member resolves to it.
    assert z5.index_of(1.0 + 1e-12) == 1


def test_snap_scales_with_point_magnitude():
    # Logic: Prove the snap window is snap_rel * max(1, |p|): wider at 1024, fixed at 1e-9 near 0.
    q = build_time_scale({"type": "qscale", "q": 2, "start": 1, "count": 11})
    assert q.index_of(1024.0 + 5e-7) == 10
    with pytest.raises(NotAPoint):
        q.index_of(1024.0 + 5e-6)
    z = build_time_scale({"type": "explicit", "points": [0, 1]})
    assert z.index_of(5e-10) == 0
    with pytest.raises(NotAPoint):
        z.index_of(5e-9)


def test_arrays_are_read_only(z5):
    # Logic: Prove scale and table arrays cannot be mutated in place.
    with pytest.raises(ValueError):
        z5.points[0] = 5.0
    table = KernelTable.from_callable(z5, lambda t, s: t + s)
    with pytest.raises(ValueError):
        table.entries[0, 0] = 1.0
    assert table.entries[0, 3] == 0.0


def test_restrict_and_kappa(z5):
    # Logic: Prove T^{κ^n} drops exactly the last n points and re-derives μ.
    k2 = z5.kappa(2)
    assert list(k2.points) == [0.0, 1.0, 2.0]
    assert k2.mu[-1] == 0.0
    with pytest.raises(EmptyScale):
        z5.kappa(4)


@settings(max_examples=40, deadline=None)
@given(grids)
def test_monomial_growth_bound(ts):
    # Logic: Prove 0 <= h_k(t,s) <= (t-s)^k/k! for t >= s, k <= 8.
    h = calculus.monomial_tensor(ts, 8)
    diff = ts.points[:, None] - ts.points[None, :]
    tri = np.tril(np.ones_like(diff, dtype=bool))
    for k in range(9):
        assert np.all(h[k][tri] >= 0.0)
        assert bound_margin((diff**k / math.factorial(k))[tri], h[k][tri]) >= 0.0


# --- 4. THE BRANCHES (Sign and Regressivity) ---
def test_monomial_sign_left_of_s(z5):
    # Logic: Prove (-1)^k h_k(t,s) >= 0 for t <= s.
    for k in range(5):
        for t in range(5):
            assert (-1) ** k * calculus.monomial(z5, k, t, 4) >= 0.0


def test_regressivity_classes(z5):
    # Logic: Walk all three classes and the alternating sign of a negatively regressive exponential.
    assert calculus.regressivity(z5, 1.0, 0, 4) == "positive"
    assert calculus.regressivity(z5, -3.0, 0, 4) == "negative"
    mixed = GridFunction(ts=z5, values=np.array([1.0, -3.0, 1.0, 1.0, 1.0]))
    assert calculus.regressivity(z5, mixed, 0, 4) == "mixed"
    signs = [np.sign(calculus.exp_general(z5, -3.0, t, 0)) for t in range(5)]
    assert signs == [1.0, -1.0, 1.0, -1.0, 1.0]


def test_change_of_order_on_sub_interval(half):
    # Logic: Prove both iterated sums agree for a callable integrand on an interior interval.
    lhs, rhs = calculus.change_of_order_check(half, lambda eta, xi: eta * eta + xi, 0.5, 2.0)
    assert lhs == pytest.approx(rhs, rel=1e-12)
