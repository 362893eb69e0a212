import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hawkes_limits import ldp
from hawkes_limits.core import DomainError, Exponential, ExponentialKernel, Gamma, Point

EXP4 = Exponential(4.0)


def test_gamma_zero():
    assert ldp.gamma_marked(1.0, EXP4, 0.0) == 0.0


def test_gamma_exp_example():
    expected = 0.5 * (5 - math.sqrt(25 - 16 * math.exp(0.1))) - 1
    assert ldp.gamma_marked(1.0, EXP4, 0.1) == pytest.approx(expected, abs=1e-12)


@pytest.mark.parametrize("lam", [1.5, 4.0, 10.0])
def test_critical_point_exp(lam):
    c = ldp.critical_point(Exponential(lam))
    assert c.theta_c == pytest.approx(math.log((lam + 1) ** 2 / (4 * lam)), abs=1e-10)
    # beyond theta_c the value is flagged infinite
    assert ldp.gamma_marked(1.0, Exponential(lam), c.theta_c + 1e-3) == math.inf


def test_critical_point_deterministic():
    for h0 in (0.2, 0.5, 0.9):
        c = ldp.critical_point(Point(h0))
        assert c.theta_c == pytest.approx(h0 - 1 - math.log(h0), abs=1e-10)
        assert c.x_c == pytest.approx(1 / h0, rel=1e-10)


def test_critical_point_needs_subcritical():
    with pytest.raises(DomainError):
        ldp.critical_point(Point(1.0))


def test_gamma_closed_form_grid():
    lam = 4.0
    tc = math.log((lam + 1) ** 2 / (4 * lam))
    for th in np.linspace(-1, tc - 1e-3, 60):
        got = ldp.gamma_marked(1.3, Exponential(lam), th)
        assert got == pytest.approx(ldp.gamma_exp_closed(1.3, lam, th), abs=1e-8)


def test_minimal_root_monotone_trace():
    law = Gamma(2.0, 0.2)
    crit = ldp.critical_point(law)
    tr = []
    x = ldp.minimal_root(law, math.exp(0.9 * crit.theta_c), crit, trace=tr)
    assert np.all(np.diff(tr) >= -1e-15)
    assert 1.0 <= x <= crit.x_c


@settings(max_examples=25, deadline=None)
@given(st.floats(0.05, 0.9), st.floats(-2.0, 0.4))
def test_gamma_convex(h0, th0):
    law = Exponential(1.0 / h0)
    crit = ldp.critical_point(law)
    hi = min(th0 + 0.3, crit.theta_c)
    grid = np.linspace(th0, hi, 9) if hi > th0 else np.array([th0])
    g = ldp.gamma_curve(1.0, law, grid).gamma_values
    if g.size >= 3:
        assert np.all(np.diff(g, 2) >= -1e-10)
        assert np.all(np.diff(g) >= -1e-12)


def test_gamma_curve_flags_infinity():
    c = ldp.gamma_curve(1.0, EXP4, [0.0, 0.2, 0.5])
    assert c.gamma_values[0] == 0.0
    assert c.gamma_values[-1] == math.inf


def test_deterministic_marks_match_renewal_mgf():
    k = ExponentialKernel(0.5, 1.0)
    th = 0.05
    slope = ldp.mgf_renewal(1.0, k, th, 500.0) / 500.0
    assert ldp.gamma_marked(1.0, Point(0.5), th) == pytest.approx(slope, rel=0.01)


def test_mgf_trivial_cases():
    k = ExponentialKernel(1, 2)
    assert ldp.mgf_renewal(1.0, k, 0.0, 50.0) == 0.0
    assert ldp.mgf_renewal(1.0, k, 0.1, 0.0) == 0.0
    with pytest.raises(DomainError):
        ldp.mgf_renewal(1.0, k, 0.5 - 1 - math.log(0.5) + 0.01, 10.0)


def test_rate_linear_examples():
    assert ldp.rate_linear(1.0, 0.5, 2.0) == 0.0
    assert ldp.rate_linear(1.0, 0.5, 0.0) == 1.0
    assert ldp.rate_linear(1.0, 0.5, -1.0) == math.inf


def test_rate_moderate_examples():
    assert ldp.rate_moderate(1.0, 0.5, 0.0) == 0.0
    assert ldp.rate_moderate(1.0, 0.5, 1.0) == 0.0625
    assert ldp.rate_moderate(1.0, 0.5, -0.7) == ldp.rate_moderate(1.0, 0.5, 0.7)


def test_rate_marked_zero_at_mean():
    for law in (EXP4, Point(0.5), Gamma(3.0, 0.1)):
        x = 1.2 / (1 - law.mean)
        assert abs(ldp.rate_marked(1.2, law, x).value) <= 1e-10


def test_rate_marked_matches_closed_form_and_legendre():
    nu, lam = 1.0, 4.0
    crit = ldp.critical_point(Exponential(lam))
    for x in np.linspace(0.05, 4.0, 50):
        rp = ldp.rate_marked(nu, Exponential(lam), x, crit)
        assert rp.value == pytest.approx(ldp.rate_exp_closed(nu, lam, x), abs=1e-6)
        val, th = ldp.legendre_marked(nu, Exponential(lam), x, crit)
        assert abs(rp.value - val) <= 1e-6
        assert th == pytest.approx(rp.theta_star, abs=1e-3)


def test_rate_marked_boundaries():
    assert ldp.rate_marked(1.0, EXP4, -0.1).value == math.inf
    assert ldp.rate_marked(1.0, EXP4, 0.0).value == 1.0


def test_deterministic_marks_reduce_to_linear_rate():
    for x in np.linspace(0.1, 5.0, 25):
        got = ldp.rate_marked(1.0, Point(0.5), x).value
        assert got == pytest.approx(ldp.rate_linear(1.0, 0.5, x), abs=1e-8)


def _ex1(rho=1.375):
    return ldp.RiskSpec(rho, 1.0, Exponential(4.0), Exponential(2.0))


def test_ruin_exponent_closed_form():
    rs = _ex1()
    lo, hi = ldp.sandwich_bounds(rs)
    assert lo < rs.rho < hi
    small, large = ldp.ruin_exponent_exp_closed(1.0, 4.0, 2.0, rs.rho)
    th_c, _ = ldp._claim_critical(rs)
    assert 0 < small < th_c < large
    assert abs(ldp.ruin_exponent(rs) - small) <= 1e-10


def test_net_profit_enforced():
    with pytest.raises(DomainError):
        ldp.RiskSpec(0.5, 1.0, EXP4, Exponential(2.0))
    with pytest.raises(DomainError):
        ldp.ruin_exponent(ldp.RiskSpec(3.0, 1.0, EXP4, Exponential(2.0)))


def test_ruin_exponent_tangency_at_net_profit_boundary():
    rs0 = ldp.RiskSpec(1.0, 1.0, EXP4, Exponential(2.0), require_net_profit=False)
    b = rs0.net_profit_bound
    assert ldp.gamma_claims_derivative(rs0, 0.0) == pytest.approx(b, rel=1e-10)
    th = [ldp.ruin_exponent(_ex1(b * (1 + e))) for e in (1e-1, 1e-2, 1e-3)]
    assert th[0] > th[1] > th[2] > 0
    assert th[2] < 1e-2


def test_finite_horizon():
    rs = _ex1()
    td = ldp.ruin_exponent(rs)
    z0 = ldp.finite_horizon_breakpoint(rs, td)
    assert z0 > 0
    assert ldp.ruin_finite_horizon(rs, 1e6) == td
    below = z0 * ldp.legendre_claims(rs, 1 / z0 + rs.rho)[0]
    assert abs(below - td) <= 1e-6
    for z in (0.05 * z0, 0.3 * z0, 0.9 * z0):
        assert ldp.ruin_finite_horizon(rs, z) >= td - 1e-12


def test_heavy_tail_constants():
    rs = ldp.RiskSpec(1.0, 1.0, Exponential(4.0), ldp.RegularlyVarying(3.0, 1.5))
    out = ldp.ruin_heavy_tail(rs)
    assert out["infinite_constant"] == pytest.approx(2.0)
    assert out["bracket"] == 1.0
    fin = ldp.ruin_heavy_tail(rs, u=3.0, T=1e12)
    assert fin["finite_constant"] == pytest.approx(2.0, rel=1e-6)
    g = ldp.Gumbel(0.5, 0.25)
    gout = ldp.ruin_heavy_tail(rs, T=1e9, tail=g)
    assert gout["finite_constant"] == pytest.approx(gout["infinite_constant"])


def test_regularly_varying_bracket_tends_to_gumbel():
    rs = ldp.RiskSpec(1.0, 1.0, Exponential(4.0), ldp.RegularlyVarying(3.0, 1.5))
    gum = ldp.ruin_heavy_tail(rs, T=2.0, tail=ldp.Gumbel(0.5, 0.25))["bracket"]
    prev = None
    for alpha in (10.0, 1e3, 1e6):
        law = ldp.RegularlyVarying(alpha, 0.5 * alpha)
        b = ldp.ruin_heavy_tail(rs, T=2.0, tail=law)["bracket"]
        if prev is not None:
            assert abs(b - gum) < abs(prev - gum)
        prev = b
    assert prev == pytest.approx(gum, rel=1e-5)


def test_heavy_tail_rejects_light_claims():
    with pytest.raises(DomainError):
        ldp.ruin_heavy_tail(_ex1())


def test_heavy_laws_integrated_tail():
    rv = ldp.RegularlyVarying(2.0, 1.0)
    assert rv.integrated_tail(0.0) == 1.0
    assert rv.integrated_tail(3.0) == pytest.approx(4.0 ** -2)
    w = ldp.Gumbel(0.5, 1.0)
    assert w.integrated_tail(0.0) == pytest.approx(1.0)
    assert 0 < w.integrated_tail(5.0) < 1


def test_explosion_small_time():
    st2 = ldp.explosion_small_time(1.0, 2.0, 1.0, 1.0)
    assert st2.c_k == pytest.approx(-math.pi, rel=1e-8)
    assert st2.exponent == 1.0
    assert ldp.explosion_small_time(1.0, 3.0, 1.0, 1.0).exponent == 0.5
    with pytest.raises(DomainError):
        ldp.explosion_small_time(1.0, 1.0, 1.0, 1.0)
