import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate, optimize

from hawkes_limits import analysis
from hawkes_limits.core import (
    ExponentialKernel,
    Linear,
    LogRate,
    Power,
    PowerLaw,
    RegimeError,
    ScaledLinear,
    ShiftedPower,
    SubPower,
    SumExp,
    Tabulated,
)


def test_l1_examples():
    assert analysis.l1_norm(ExponentialKernel(1, 2)) == 0.5
    assert analysis.l1_norm(PowerLaw(2, 3)) == 1.0
    assert analysis.l1_norm(PowerLaw(1, 1)) == math.inf


def test_tail_examples():
    k = ExponentialKernel(1, 2)
    assert analysis.tail_integral(k, 0) == 0.5
    assert analysis.tail_integral(k, 1) == pytest.approx(0.5 * math.exp(-2), rel=1e-15)
    assert analysis.tail_integral(PowerLaw(2, 3), 1) == pytest.approx(0.25)


def test_tail_power_law_value():
    # integral of 2 (1+t)^-3 over [1, inf) is (1+1)^-2
    val = integrate.quad(lambda t: 2 * (1 + t) ** -3, 1, np.inf)[0]
    assert analysis.tail_integral(PowerLaw(2, 3), 1.0) == pytest.approx(val, rel=1e-10)


def test_first_moment_examples():
    assert analysis.first_moment(ExponentialKernel(1, 1)) == 1.0
    assert analysis.first_moment(ExponentialKernel(2, 2)) == 0.5
    assert analysis.first_moment(PowerLaw(1, 2)) == math.inf


@settings(max_examples=25, deadline=None)
@given(st.floats(0, 50), st.floats(0, 50))
def test_tail_nonincreasing(t1, t2):
    for k in (ExponentialKernel(1, 2), PowerLaw(2, 3), Tabulated([0, 1, 3], [2, 1, 0.5], 1.5)):
        lo, hi = min(t1, t2), max(t1, t2)
        assert analysis.tail_integral(k, hi) <= analysis.tail_integral(k, lo) + 1e-15
    assert analysis.tail_integral(PowerLaw(2, 3), 0.0) == PowerLaw(2, 3).l1_norm


def test_malthusian_examples():
    assert analysis.malthusian(ExponentialKernel(3, 1)) == 2.0
    th = analysis.malthusian(SumExp.from_terms([(2, 1), (2, 2)]))
    oracle = optimize.brentq(lambda x: 2 / (1 + x) + 2 / (2 + x) - 1, 1e-9, 100, xtol=1e-15)
    assert th == pytest.approx(oracle, abs=1e-12)
    with pytest.raises(RegimeError):
        analysis.malthusian(ExponentialKernel(1, 2))


@pytest.mark.parametrize("k", [SumExp.from_terms([(2, 1), (2, 2)]), PowerLaw(3, 2.5),
                               Tabulated([0, 1, 2, 4], [3, 2, 1, 0.5], 2.0)])
def test_malthusian_quadrature_check(k):
    th = analysis.malthusian(k)
    hat = integrate.quad(lambda t: math.exp(-th * t) * float(analysis._eval(k, t)), 0, np.inf, limit=400,
                         epsabs=1e-13)[0]
    assert hat == pytest.approx(1.0, abs=1e-8)


def test_bartlett_examples():
    k = ExponentialKernel(1, 2)
    assert analysis.bartlett_density(k, 1.0, 0.0) == pytest.approx(1 / (2 * math.pi * 0.5 * 0.25))
    assert analysis.bartlett_density(k, 1.0, 1e6) == pytest.approx(1 / (2 * math.pi * 0.5), rel=1e-6)
    with pytest.raises(RegimeError):
        analysis.bartlett_density(ExponentialKernel(2, 2), 1.0, 0.3)


def test_fourier_quadrature_matches_closed_form():
    # a tabulated exponential with its power tail cut is close to the closed form
    t = np.linspace(0, 40, 4001)
    tab = Tabulated(t, 0.5 * np.exp(-t))
    exp = ExponentialKernel(0.5, 1.0)
    for w in (0.0, 0.7, 3.0):
        assert abs(analysis.fourier(tab, w) - exp.fourier(w)) < 1e-5


def test_fourier_power_law():
    k = PowerLaw(1, 3)
    w = 1.3
    re = integrate.quad(lambda t: k(t) * math.cos(w * t), 0, 200, limit=2000)[0]
    im = integrate.quad(lambda t: k(t) * math.sin(w * t), 0, 200, limit=2000)[0]
    got = analysis.fourier(k, w)
    assert got.real == pytest.approx(re, abs=1e-6)
    assert got.imag == pytest.approx(im, abs=1e-6)


def test_covariance_examples():
    assert analysis.exp_covariance_density(1, 2, 1, 0) == pytest.approx(3.0)
    assert analysis.exp_covariance_density(1, 2, 1, 100) < 1e-40
    with pytest.raises(RegimeError):
        analysis.exp_covariance_density(2, 1, 1, 0)


def test_classify_examples():
    assert analysis.classify(Power(1, 1.5, 1), ExponentialKernel(1, 2)).regime == "Explosive"
    assert analysis.classify(Linear(1), ExponentialKernel(1, 2)).regime == "SubCritical"
    assert analysis.classify(Linear(1), ExponentialKernel(2, 2)).regime == "Critical"
    assert analysis.classify(Linear(1), ExponentialKernel(3, 1)).regime == "SuperCritical"
    assert analysis.classify(SubPower(1, 0.5, 1), ExponentialKernel(3, 1)).regime == "Sublinear"
    assert analysis.classify(LogRate(2), ExponentialKernel(3, 1)).regime == "Sublinear"
    rep = analysis.classify(ScaledLinear(0.5, 1), ExponentialKernel(2, 2))
    assert rep.regime == "SubCritical"
    assert rep.stability_margin == pytest.approx(0.5)


@settings(max_examples=30)
@given(st.floats(0.01, 100))
def test_explosion_verdict_scale_invariant(c):
    for k in (0.5, 1.0, 1.5, 2.0):
        r = Power(1.0, k, 1.0)
        scaled = Power(c, k, c)
        assert r.explosive == scaled.explosive


def test_fit_exact_exponential():
    fit = analysis.fit_sum_exp(ExponentialKernel(1, 2), 1, 10.0)
    assert fit.terms == [(1.0, 2.0)]
    assert fit.linf_error < 1e-14


def test_fit_power_law_targets():
    k = PowerLaw(2, 3)
    f8 = analysis.fit_sum_exp(k, 8, 20.0)
    f1 = analysis.fit_sum_exp(k, 1, 20.0)
    assert f8.linf_error < 5e-3
    assert f1.linf_error > f8.linf_error


def test_fit_monotone_on_nested_grids():
    k = PowerLaw(2, 3)
    errs = [analysis.fit_sum_exp(k, n, 20.0).linf_error for n in (2, 3, 5, 9, 17)]
    assert all(b <= a + 1e-12 for a, b in zip(errs, errs[1:]))


def test_fit_invariants():
    k = PowerLaw(1, 2.5)
    fit = analysis.fit_sum_exp(k, 6, 15.0)
    t = np.linspace(0, 15.0, 20001)
    assert np.all(fit.kernel(t) >= 0)
    linf, l1 = analysis.fit_errors(fit.terms, k, 15.0)
    assert abs(linf - fit.linf_error) <= 1e-12
    assert abs(l1 - fit.l1_error) <= 1e-12


def test_fit_rejects_bad_input():
    with pytest.raises(Exception):
        analysis.fit_sum_exp(PowerLaw(2, 3), 0, 20.0)


def test_shifted_power_classification():
    assert analysis.classify(ShiftedPower(1, 1, 2), ExponentialKernel(1, 2)).explosive_sum_converges
