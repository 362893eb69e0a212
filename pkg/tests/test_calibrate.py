import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hawkes_limits.calibrate import fit_exp, loglik_exp, loglik_exp_grad
from hawkes_limits.core import DomainError, EventStream, ExponentialKernel, Linear, SumExp
from hawkes_limits.simulate import SimConfig, simulate_markov


def _stream(T=500.0, seed=0, nu=1.0, a=1.0, b=2.0, replica=0):
    return simulate_markov(SimConfig(Linear(nu), ExponentialKernel(a, b), horizon=T, seed=seed), replica)


def _naive_loglik(times, T, nu, a, b):
    ll = 0.0
    for i, t in enumerate(times):
        ll += math.log(nu + a * sum(math.exp(-b * (t - s)) for s in times[:i]))
    comp = nu * T + a / b * sum(1 - math.exp(-b * (T - s)) for s in times)
    return ll - comp


def test_empty_stream():
    assert loglik_exp(EventStream([], 10.0), 1.5, 1.0, 2.0) == pytest.approx(-15.0)


def test_poisson_boundary():
    s = _stream(50.0)
    assert loglik_exp(s, 2.0, 0.0, 1.0) == pytest.approx(s.n_events * math.log(2.0) - 100.0)
    with pytest.raises(DomainError):
        loglik_exp(s, 1.0, -0.5, 1.0)
    with pytest.raises(DomainError):
        loglik_exp(s, 0.0, 1.0, 1.0)


def test_matches_quadratic_formula():
    s = _stream(40.0, seed=3)
    got = loglik_exp(s, 0.8, 1.3, 2.5)
    assert got == pytest.approx(_naive_loglik(list(s.times), 40.0, 0.8, 1.3, 2.5), rel=1e-12)


@settings(max_examples=20, deadline=None)
@given(st.floats(0.0, 1e3))
def test_translation_invariance(c):
    s = _stream(60.0, seed=4)
    base = loglik_exp(s, 1.0, 1.0, 2.0)
    shifted = EventStream(s.times + c, s.horizon + c)
    assert loglik_exp(shifted, 1.0, 1.0, 2.0, start=c) == pytest.approx(base, rel=1e-12)


def _fd5(f, x, h):
    return (-f(x + 2 * h) + 8 * f(x + h) - 8 * f(x - h) + f(x - 2 * h)) / (12 * h)


def test_gradient_matches_finite_differences():
    rng = np.random.default_rng(11)
    s = _stream(300.0, seed=5)
    for _ in range(20):
        p = rng.uniform([0.3, 0.2, 0.8], [2.0, 2.0, 5.0])
        g = loglik_exp_grad(s, *p)
        for i in range(3):
            def f(v, i=i):
                q = p.copy()
                q[i] = v
                return loglik_exp(s, *q)
            fd = _fd5(f, p[i], 1e-3 * p[i])
            assert abs(fd - g[i]) <= 1e-6 * max(1.0, abs(g[i]))


def test_truth_beats_perturbations():
    rng = np.random.default_rng(2)
    wins = 0
    n = 200
    for r in range(n):
        s = _stream(2000.0, seed=6, replica=r)
        truth = loglik_exp(s, 1.0, 1.0, 2.0)
        f = rng.choice([0.5, 1.5], size=3)
        wins += truth >= loglik_exp(s, 1.0 * f[0], 1.0 * f[1], 2.0 * f[2])
    assert wins >= 0.95 * n


def test_fit_recovers_parameters():
    fit = fit_exp(_stream(5000.0, seed=7))
    assert fit.converged
    assert fit.nu == pytest.approx(1.0, rel=0.15)
    assert fit.a == pytest.approx(1.0, rel=0.15)
    assert fit.b == pytest.approx(2.0, rel=0.15)
    assert fit.loglik >= fit.init_loglik


def test_fit_on_poisson_data_shows_no_excitation():
    # a and b are not separately identified when a = 0: the maximiser drifts
    # along spike (b large) or slow (b small) ridges, so a itself is not small
    # in general; the likelihood gain over the a = 0 boundary and the mean
    # rate are what the data pin down
    for seed in range(5):
        s = simulate_markov(SimConfig(Linear(2.0), SumExp.from_terms([]), horizon=5000.0, seed=seed))
        fit = fit_exp(s)
        n = s.n_events
        poisson = n * math.log(n / 5000.0) - n
        # chi-square, 2 dof, 1%
        assert 0 <= 2 * (fit.loglik - poisson) < 9.21
        assert fit.nu / (1 - fit.a / fit.b) == pytest.approx(2.0, rel=0.05)


def test_fit_needs_events():
    with pytest.raises(DomainError):
        fit_exp(EventStream([0.1, 0.5, 1.0, 2.0, 3.0], 10.0))


def test_fit_custom_init_and_serialisation():
    s = _stream(1000.0, seed=9)
    fit = fit_exp(s, init=(1.0, 1.0, 2.0))
    d = fit.as_dict()
    assert set(d["params"]) == {"nu", "a", "b"}
    assert d["loglik"] >= d["init_loglik"]
