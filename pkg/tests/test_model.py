import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mmvgame import model as M
from mmvgame.errors import NonPositiveVolatility


def test_market_price_of_risk_constant():
    m = M.constant_coefficients(0.08, 0.2, r=0.02)
    assert M.market_price_of_risk(m, 1.7) == pytest.approx(0.3, abs=1e-15)


def test_market_price_of_risk_zero_when_mu_equals_r():
    m = M.constant_coefficients(0.02, 0.2, r=0.02)
    assert np.all(M.market_price_of_risk(m, np.linspace(-3, 3, 7)) == 0.0)


def test_ou_tanh_lambda_at_origin():
    assert M.market_price_of_risk(M.ou_tanh(lam0=0.3, lam1=0.1), 0.0) == pytest.approx(0.3, abs=1e-15)


def test_nonpositive_volatility_raises():
    with pytest.warns(UserWarning, match="user-defined"):
        m = M.FactorMarketModel(mu=lambda z: 0.1 + 0 * z, sigma=lambda z: np.asarray(z, float),
                                a=lambda z: 0 * z, b=lambda z: 0.3 + 0 * z, r=0.02, rho=0.0,
                                horizon_T=1.0)
    with pytest.raises(NonPositiveVolatility):
        m.lam(np.array([-1.0, 1.0]))


def test_rho_bar_and_validation():
    m = M.ou_tanh(rho=0.6)
    assert m.rho ** 2 + m.rho_bar ** 2 == pytest.approx(1.0, abs=1e-15)
    with pytest.raises(ValueError):
        M.ou_tanh(rho=1.5)
    with pytest.raises(ValueError):
        M.ou_tanh(horizon_T=0.0)
    with pytest.raises(ValueError):
        M.constant_coefficients(0.1, -0.2)
    with pytest.raises(ValueError):
        M.ModelFamily("heston", {})
    with pytest.raises(ValueError):
        M.ModelFamily("ou_tanh", {"kappa": 1.0})


def test_with_rho_keeps_coefficients():
    m = M.ou_tanh(rho=0.0)
    m2 = M.with_rho(m, 0.5)
    assert m2.rho == 0.5 and m2.mu is m.mu and m2.family is m.family


def test_audit_constant_coefficients():
    m = M.black_scholes(0.4, 0.2, b=0.3)
    rep = M.audit_assumptions(m, -3, 3, 61)
    assert rep.passed
    assert rep.sigma_min == pytest.approx(0.2)
    assert rep.b2_min == pytest.approx(0.09)
    assert rep.lam_max_abs == pytest.approx(0.4)
    assert all(v == 0.0 for v in rep.lipschitz.values())


def test_audit_ou_tanh_bounded_lambda():
    rep = M.audit_assumptions(M.ou_tanh(lam0=0.3, lam1=0.1, beta=0.5), -5, 5, 1001)
    assert rep.passed
    assert rep.lam_max_abs <= 0.4


def test_audit_flags_sign_change_in_sigma():
    with pytest.warns(UserWarning, match="user-defined"):
        m = M.FactorMarketModel(mu=lambda z: 0.1 + 0 * z, sigma=lambda z: np.asarray(z, float),
                                a=lambda z: 0 * z, b=lambda z: 0.3 + 0 * z, r=0.02, rho=0.0,
                                horizon_T=1.0)
    rep = M.audit_assumptions(m, -1, 1, 21)
    assert not rep.passed
    assert rep.nonpositive_sigma_region is not None
    assert any("NonPositiveVolatility" in v for v in rep.violations)


def test_audit_rejects_bad_domain():
    with pytest.raises(ValueError):
        M.audit_assumptions(M.ou_tanh(), 1.0, 1.0, 10)
    with pytest.raises(ValueError):
        M.audit_assumptions(M.ou_tanh(), 0.0, 1.0, 1)


@settings(max_examples=40, deadline=None)
@given(
    kappa=st.floats(0.1, 3.0), m=st.floats(-1, 1), beta=st.floats(0.05, 1.0),
    sigma0=st.floats(0.05, 0.5), lam0=st.floats(-0.5, 0.5), lam1=st.floats(-0.5, 0.5),
    lo=st.floats(-10, 0), width=st.floats(0.1, 20),
)
def test_family_instances_pass_their_own_audit(kappa, m, beta, sigma0, lam0, lam1, lo, width):
    mdl = M.ou_tanh(kappa, m, beta, sigma0, lam0, lam1)
    rep = M.audit_assumptions(mdl, lo, lo + width, 101)
    assert rep.passed, rep.violations
    lam_max = abs(lam0) + abs(lam1)
    assert rep.lam_max_abs <= lam_max * (1 + 1e-12) + 1e-12


@settings(max_examples=40, deadline=None)
@given(mu=st.floats(-0.5, 0.5), sigma=st.floats(0.01, 1.0), z=st.floats(-50, 50))
def test_lambda_formula(mu, sigma, z):
    m = M.constant_coefficients(mu, sigma, r=0.01)
    assert m.lam(z) == pytest.approx((mu - 0.01) / sigma, rel=1e-14, abs=1e-15)
    assert math.isfinite(m.lam(z))
