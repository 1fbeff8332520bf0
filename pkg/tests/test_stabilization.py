import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from asgsflow.stabilization import (DYNAMIC, IMPLICIT, QUASI_STATIC, StabConfig, compute_tau, dynamic_tau,
                                    history_ratios, make_stab_params, series_factors, subscale_history)

positive = st.floats(1e-4, 1e2, allow_nan=False, allow_infinity=False)


def test_tau_zero_velocity_unit_constants():
    tau1, tau2, _ = compute_tau(1.0, 1.0, 0.0, 1.0, 0.0, 1.0, c1=1.0, c2=1.0)
    assert tau1 == pytest.approx(1.0) and tau2 == pytest.approx(1.0)


def test_tau3_diffusion_only():
    _, _, tau3 = compute_tau(1.0, 1.0, 0.0, 1.0, 0.0, 1.0, c3=1.0)
    assert tau3 == pytest.approx(4 / 9)


def test_tau_direct_evaluation():
    tau1, tau2, tau3 = compute_tau(0.1, 0.02, 0.01, 2.0, 0.01, 1.0)
    # 4*0.02/0.01 + 2*0.01/0.1 = 8.2
    assert tau1 == pytest.approx(1 / 8.2)
    assert tau2 == pytest.approx(0.01 * 8.2 / 4)
    # 9*2/(4*0.01) + 1.5*0.01/0.1 + 0.01 = 450.16
    assert tau3 == pytest.approx(1 / 450.16)


def test_tau_degenerate_inputs():
    with pytest.raises(ValueError):
        compute_tau(0.1, 0.02, 0.0, 0.0, 0.0, 1.0)
    with pytest.raises(ValueError):
        compute_tau(0.0, 0.02, 0.0, 1.0, 0.0, 1.0)
    with pytest.raises(ValueError):
        compute_tau(0.1, 0.0, 0.0, 1.0, 0.0, 1.0)


def test_dynamic_tau_examples():
    t1p, t2p, t3p = dynamic_tau((1.0, 0.5, 1.0), 1.0, 0.1)
    assert t1p == pytest.approx(1 / 11) and t3p == pytest.approx(1 / 11)
    assert t2p == 0.5
    assert dynamic_tau((1.0, 0.5, 2.0), 1.0, 0.1, QUASI_STATIC) == (1.0, 0.5, 2.0)


def test_dynamic_tau_large_dt_limit():
    t1p, _, t3p = dynamic_tau((0.3, 0.1, 0.7), 1.0, 1e12)
    assert t1p == pytest.approx(0.3, rel=1e-10) and t3p == pytest.approx(0.7, rel=1e-10)


def test_series_closed_form_oracle():
    s1, _ = series_factors(1 / 11, 1 / 11, 1.0, 0.1)
    assert float(s1) == pytest.approx(10.0)
    d = subscale_history(np.array([1.0, 0.0]), 0.0, 1 / 11, 1 / 11, 1.0, 0.1)
    np.testing.assert_allclose(d.d1, [10.0, 0.0])


def test_series_limit_equals_long_truncation():
    x_tau = np.array([0.01, 0.05, 0.08])
    lim = series_factors(x_tau, x_tau, 1.0, 0.1)[0]
    trunc = series_factors(x_tau, x_tau, 1.0, 0.1, terms=2000)[0]
    np.testing.assert_allclose(trunc, lim, rtol=1e-10)
    one = series_factors(x_tau, x_tau, 1.0, 0.1, terms=1)[0]
    np.testing.assert_allclose(one, x_tau / 0.1)


def test_tracked_recursion_sums_the_series():
    # d^{n+1} = x (r + d^n) with a constant residual is the partial sum of x^i r
    x1, _ = history_ratios(0.08, 0.08, 1.0, 0.1)
    d = 0.0
    for _ in range(30):
        d = x1 * (1.0 + d)
    assert d == pytest.approx(float(series_factors(0.08, 0.08, 1.0, 0.1, terms=30)[0]), rel=1e-13)


def test_subscale_history_quasistatic_and_zero():
    r = np.array([[0.3, -1.0]])
    d = subscale_history(r, np.array([2.0]), 0.05, 0.05, 1.0, 0.1, mode=QUASI_STATIC)
    assert np.all(d.d1 == 0) and np.all(d.d3 == 0) and np.all(d.d2 == 0)
    d = subscale_history(np.zeros((1, 2)), np.zeros(1), 0.05, 0.05, 1.0, 0.1)
    assert np.all(d.d1 == 0) and np.all(d.d3 == 0)


def test_series_diverges():
    with pytest.raises(ValueError):
        series_factors(0.2, 0.01, 1.0, 0.1)


def test_make_stab_params_modes():
    tau = (np.array([1.0, 2.0]), np.array([0.1, 0.2]), np.array([0.5, 0.5]))
    dyn = make_stab_params(tau, 1.0, 0.1, StabConfig())
    np.testing.assert_allclose(dyn.tau1p, [1 / 11, 2 / 21])
    np.testing.assert_allclose(dyn.kappa1 + dyn.ratio1, 1.0)
    qs = make_stab_params(tau, 1.0, 0.1, StabConfig(subscale_mode=QUASI_STATIC))
    np.testing.assert_array_equal(qs.tau1p, qs.tau1)
    np.testing.assert_array_equal(qs.kappa1, 0.0)
    np.testing.assert_array_equal(qs.kappa3, 0.0)
    off = make_stab_params(tau, 1.0, 0.1, StabConfig(tau_scale=0.0))
    assert np.all(off.tau1p == 0) and np.all(off.ratio1 == 1.0)


def test_config_validation():
    with pytest.raises(ValueError):
        StabConfig(subscale_mode="frozen")
    with pytest.raises(ValueError):
        StabConfig(c1=0.0)
    with pytest.raises(ValueError):
        StabConfig(subscale_terms=0)
    with pytest.raises(ValueError):
        StabConfig(subscale_history="both")
    assert StabConfig(subscale_history=IMPLICIT).subscale_mode == DYNAMIC


@settings(max_examples=200, deadline=None)
@given(h=positive, mu=positive, u=st.floats(0, 1e2), D=positive, alpha=st.floats(0, 10), rho=positive,
       dt=positive)
def test_tau_positive_and_dynamic_smaller(h, mu, u, D, alpha, rho, dt):
    tau = compute_tau(h, mu, u, D, alpha, rho)
    assert all(t > 0 and np.isfinite(t) for t in tau)
    t1p, t2p, t3p = dynamic_tau(tau, rho, dt)
    assert t1p <= tau[0] and t3p <= tau[2] and t2p == tau[1]
    # strict once the time term is visible in double precision
    if rho * tau[0] / dt > 1e-12:
        assert t1p < tau[0]
    if tau[2] / dt > 1e-12:
        assert t3p < tau[2]
    x1, x3 = rho * t1p / dt, t3p / dt
    assert x1 < 1 and x3 < 1


@settings(max_examples=100, deadline=None)
@given(r=st.lists(st.floats(-1e3, 1e3), min_size=3, max_size=3), tau=positive, dt=positive)
def test_d2_always_zero_and_linear(r, tau, dt):
    t1p, _, t3p = dynamic_tau((tau, 1.0, tau), 1.0, dt)
    d = subscale_history(np.array(r[:2]), np.array(r[2]), t1p, t3p, 1.0, dt)
    assert np.all(d.d2 == 0)
    d2x = subscale_history(2 * np.array(r[:2]), 2 * np.array(r[2]), t1p, t3p, 1.0, dt)
    np.testing.assert_allclose(d2x.d1, 2 * d.d1, rtol=1e-12, atol=1e-300)
