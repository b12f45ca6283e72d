import math

import numpy as np
import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st
from scipy import integrate as spi

from aerialmarket.dynamics import (CSV_COLUMNS, BehaviorFactors, InvariantViolation, MarketModel, MarketState,
                                   Trajectory, group_average, integrate, integrate_states, lsp_flow,
                                   logistic_mean_integral, market_derivative, profits, rk4_step, settling_time,
                                   switch_probability, transition_coefficients)
from aerialmarket.quality import quality


def test_switch_probability_values():
    assert switch_probability(0.0, 0.1) == 0.0
    assert switch_probability(-5.0, 0.1) == 0.0
    assert switch_probability(10.0, 0.1) == pytest.approx(2 / (1 + math.exp(-1)) - 1)
    assert switch_probability(1e6, 0.1) == 1.0
    out = switch_probability(np.array([-1.0, 0.0, 2.0]), 1.0)
    assert out.shape == (3,) and out[0] == out[1] == 0 and 0 < out[2] < 1


@given(d=st.floats(-100, 100), c=st.floats(0, 10))
def test_switch_probability_range(d, c):
    p = switch_probability(d, c)
    assert 0 <= p <= 1
    assert p == 0 or d > 0


@given(lo=st.floats(-50, 50), width=st.floats(1e-3, 300), k=st.floats(-5, 5), off=st.floats(-50, 50))
@settings(max_examples=300)
def test_logistic_integral_matches_quadrature(lo, width, k, off):
    hi = lo + width
    f = lambda t: math.tanh(0.5 * (k * t - off)) if k * t - off > 0 else 0.0
    pts = [off / k] if k != 0 and lo < off / k < hi else None
    ref, _ = spi.quad(f, lo, hi, points=pts, limit=200, epsabs=1e-12, epsrel=1e-10)
    got = logistic_mean_integral(lo, hi, k, off, width)
    assert got == pytest.approx(ref / width, rel=1e-7, abs=1e-10)


def test_logistic_integral_edge_cases():
    assert logistic_mean_integral(1.0, 1.0, 1.0, 0.0, 1.0) == 0.0
    assert logistic_mean_integral(0.0, 1.0, 1.0, 5.0, 1.0) == 0.0  # gain never positive
    assert logistic_mean_integral(0.0, 1.0, 0.0, -2.0, 1.0) == pytest.approx(math.tanh(1.0))
    assert logistic_mean_integral(0.0, 1.0, 1e-15, -2.0, 1.0) == pytest.approx(math.tanh(1.0))
    # very steep: integrand is a step at the threshold
    assert logistic_mean_integral(0.0, 10.0, 1e6, 5e6, 10.0) == pytest.approx(0.5, rel=1e-5)
    with pytest.raises(ValueError):
        logistic_mean_integral(0.0, 1.0, 1.0, 0.0, 0.0)


def test_coefficients_match_monte_carlo(bertrand):
    rng = np.random.default_rng(7)
    eq, b, qp = bertrand.eq, bertrand.behavior, bertrand.qp
    state = MarketState(0.01, 0.05, 0.03, eq.p2 / 2)
    T = bertrand.model.throughputs(state)
    q = transition_coefficients(state, eq, T, b, qp)
    S0, S1, S2 = (float(quality(x, qp)) for x in T)
    groups = eq.taste_intervals()
    cases = {
        "q_g_1to0": ("lsp1", S0 - S1, state.p0 - eq.p1),
        "q_g_0to2": ("lsp2", S2 - S0, eq.p2 - state.p0),
        "q_d_2to0": ("lsp2", eq.s2 - S2, 0.0),
        "q_d_0to1": ("lsp1", eq.s1 - S0, eq.p1 - state.p0),
        "q_none_to0": ("none", S0, state.p0),
    }
    n = 400_000
    for name, (grp, ds, dp) in cases.items():
        theta = rng.uniform(*groups[grp], n)
        mc = switch_probability(theta * ds - dp, b.c_u)
        se = mc.std() / math.sqrt(n)
        assert abs(getattr(q, name) - mc.mean()) <= 4 * se + 1e-12, name


@given(lo=st.floats(0, 100), width=st.floats(0.0, 100), ds=st.floats(-5, 5), dp=st.floats(-50, 50),
       c=st.floats(0, 2))
def test_group_average_is_probability(lo, width, ds, dp, c):
    assert 0 <= group_average((lo, lo + width), ds, dp, c) <= 1


def test_zero_behaviour_freezes_market(bertrand):
    model = MarketModel(bertrand.eq, bertrand.qp, bertrand.capacity,
                        BehaviorFactors(0, 0, 0, 0, 0, 0), bertrand.econ.nu)
    s = MarketState(0.01, 0.1, 0.05, 3.0)
    assert np.all(market_derivative(s, model) == 0)


def test_channels_closed_keep_zero_state(bertrand):
    b = BehaviorFactors(xi=1.0, gamma=0.5, alpha_c=0.0, delta=0.0)
    model = MarketModel(bertrand.eq, bertrand.qp, bertrand.capacity, b, bertrand.econ.nu)
    d = market_derivative(model.initial_state(), model)
    assert np.all(d == 0)  # gossip needs an existing USP base


def test_boundary_rates_point_inwards(bertrand):
    eq, model = bertrand.eq, bertrand.model
    d = market_derivative(MarketState(0.0, 0.0, 0.0, 2.0), model)
    assert np.all(d[:3] >= 0)
    full = MarketState(eq.D0, eq.D1, eq.D2, 2.0)
    d = market_derivative(full, model)
    assert d[1] <= 0 and d[2] <= 0


def test_lsp_flow_components():
    b = BehaviorFactors(xi=2.0, gamma=0.5, alpha_c=0.2, delta=0.4)
    f = lsp_flow(0.3, 0.1, 0.2, 0.6, 0.5, 0.7, 0.1, b)
    inflow = 0.3 * 2 * (0.5 * 0.2 * 0.6 + 0.2 * 0.5 + 0.4 * 0.5 * 0.7)
    outflow = 0.1 * 2 * (0.5 * 0.3 * 0.5 + 0.2 * 0.5 + 0.4 * 0.5 * 0.1)
    assert f == pytest.approx(inflow - outflow)
    assert lsp_flow(0.0, 0.0, 0.2, 1, 1, 1, 1, b) == 0


@given(y=st.tuples(st.floats(0, 1), st.floats(0, 1), st.floats(0, 1)), p0=st.floats(0.01, 50))
@settings(max_examples=60, deadline=None)
def test_price_moves_with_customer_base(bertrand, y, p0):
    eq = bertrand.eq
    s = MarketState(y[0] * eq.D0, y[1] * eq.D1, y[2] * eq.D2, p0)
    d = market_derivative(s, bertrand.model)
    dY = d[:3].sum()
    assert d[3] == pytest.approx(bertrand.behavior.c_price * p0 * dY, rel=1e-12, abs=1e-300)
    assert np.sign(d[3]) == np.sign(dY) or d[3] == 0


@pytest.mark.parametrize("game", ["bertrand", "cournot"])
def test_rk4_order_on_market(request, game):
    # start past the early kinks (throughput floor, gates opening) where the field is smooth
    sc = request.getfixturevalue(game)
    model = sc.model
    _, warm = integrate_states(sc.initial_state().as_array(), 6.0, 0.01, model)
    v0 = warm[-1]
    _, ref = integrate_states(v0, 4.0, 1 / 256, model)
    errs = []
    for dt in (0.5, 0.25, 0.125):
        _, V = integrate_states(v0, 4.0, dt, model)
        errs.append(np.max(np.abs(V[-1] - ref[-1])))
    orders = np.log2(np.array(errs[:-1]) / np.array(errs[1:]))
    assert np.all(orders >= 3.5), orders


def test_rk4_step_exact_on_cubic():
    f = lambda v: np.array([3 * v[1] ** 2, 1.0])
    v = rk4_step(f, np.array([0.0, 0.0]), 0.7)
    assert v[0] == pytest.approx(0.7 ** 3, rel=1e-12)


@pytest.mark.parametrize("game", ["bertrand", "cournot"])
def test_trajectory_stays_in_box(request, game):
    sc = request.getfixturevalue(game)
    traj = integrate(sc.initial_state(), 120.0, 0.05, sc.model)
    eq = sc.eq
    assert np.all(traj["y1"] >= 0) and np.all(traj["y1"] <= eq.D1)
    assert np.all(traj["y2"] >= 0) and np.all(traj["y2"] <= eq.D2)
    assert np.all(traj["y0"] >= 0) and np.all(traj["y0"] <= eq.D0)
    assert np.all(traj["p0"] > 0)
    assert np.allclose(traj["x1"] + traj["y1"], eq.D1)


def test_integration_is_deterministic(bertrand):
    a = integrate(bertrand.initial_state(), 10.0, 0.05, bertrand.model)
    b = integrate(bertrand.initial_state(), 10.0, 0.05, bertrand.model)
    for c in CSV_COLUMNS:
        assert np.array_equal(a[c], b[c])


def test_integrate_rejects_bad_input(bertrand):
    with pytest.raises(ValueError):
        integrate(bertrand.initial_state(), 1.0, 0.3, bertrand.model)
    with pytest.raises(ValueError):
        integrate(bertrand.initial_state(), 1.0, 0.0, bertrand.model)
    with pytest.raises(InvariantViolation):
        integrate(MarketState(0.0, bertrand.eq.D1 + 0.1, 0.0, 1.0), 1.0, 0.1, bertrand.model)
    with pytest.raises(InvariantViolation):
        MarketState(0.0, 0.0, 0.0, 0.0).check(bertrand.eq)


def test_csv_round_trip(tmp_path, bertrand):
    traj = integrate(bertrand.initial_state(), 2.0, 0.05, bertrand.model)
    path = tmp_path / "t.csv"
    traj.to_csv(path, CSV_COLUMNS)
    back = Trajectory.from_csv(path)
    assert tuple(back.columns) == CSV_COLUMNS
    for c in CSV_COLUMNS:
        assert np.array_equal(back[c], traj[c])
    assert path.read_text().splitlines()[0] == ",".join(CSV_COLUMNS)


def test_profits_at_start(bertrand):
    eq, nu = bertrand.eq, bertrand.econ.nu
    pi0, pi1, pi2 = profits(3.0, 0.0, eq.D1, eq.D2, eq, nu)
    assert pi0 == 0
    assert pi1 == pytest.approx(eq.profit1) and pi2 == pytest.approx(eq.profit2)
    assert profits(3.0, 0.0, 0.0, eq.D2, eq, nu)[1] == pytest.approx(-nu * eq.s1 * eq.D1)


def test_settling_time(bertrand):
    model = bertrand.model
    t, V = integrate_states(bertrand.initial_state().as_array(), 120.0, 0.05, model)
    ts = settling_time(t, V, model, (0, 1, 2))
    assert 0 < ts < 120
    assert settling_time(t[:10], V[:10], model, (0, 1, 2)) == math.inf


def test_usp_gains_customers_and_lsps_lose(bertrand, cournot):
    for sc in (bertrand, cournot):
        traj = integrate(sc.initial_state(), 120.0, 0.05, sc.model)
        assert traj["y1"][-1] > 0 and traj["y2"][-1] > 0
        assert traj["profit1"][-1] < sc.eq.profit1
