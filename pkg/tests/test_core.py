import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hawkes_limits.core import (
    DomainError,
    Empirical,
    EventStream,
    Exponential,
    ExponentialKernel,
    Gamma,
    Linear,
    LogRate,
    MarkModel,
    MarkovState,
    MonteCarloSummary,
    OutOfSupportError,
    Point,
    Power,
    PowerLaw,
    ScaledLinear,
    SubPower,
    SumExp,
    Tabulated,
    replica_rng,
)
from hawkes_limits import analysis


def test_kernel_examples():
    assert ExponentialKernel(1, 2)(0.0) == 1.0
    assert PowerLaw(2, 3)(1.0) == pytest.approx(0.25, abs=1e-15)
    for k in (ExponentialKernel(1, 2), PowerLaw(2, 3), Tabulated([0, 1, 2], [1, 0.5, 0.2])):
        assert k(-1.0) == 0.0


def test_tabulated_interpolation_and_tail():
    k = Tabulated([0, 1, 2], [1.0, 0.5, 0.25], tail_exponent=2.0)
    assert k(0.5) == pytest.approx(0.75)
    assert k(4.0) == pytest.approx(0.25 * (4.0 / 2.0) ** -2)
    trunc = Tabulated([0, 1, 2], [1.0, 0.5, 0.25])
    assert trunc.truncated
    with pytest.raises(OutOfSupportError):
        trunc(3.0)


def test_tabulated_validation():
    with pytest.raises(DomainError):
        Tabulated([0, 2, 1], [1, 1, 1])
    with pytest.raises(DomainError):
        Tabulated([0, 1], [1, -1])


def test_rate_examples():
    assert Linear(1)(0.5) == 1.5
    assert Power(1, 2, 1)(3.0) == 10.0
    assert SubPower(1, 0.5, 1)(0.0) == 1.0
    assert ScaledLinear(2.0, 1.0)(1.0) == 3.0
    with pytest.raises(DomainError):
        Linear(1)(-0.1)


@given(st.floats(0, 1e3), st.floats(0, 1e3))
def test_rates_nondecreasing(z1, z2):
    lo, hi = min(z1, z2), max(z1, z2)
    for r in (Linear(1), ScaledLinear(0.5, 1), Power(1, 1.5, 1), SubPower(2, 0.5, 1), LogRate(2.0)):
        assert r(lo) <= r(hi)
        assert r(lo) > 0


@pytest.mark.parametrize("k", [
    ExponentialKernel(1, 2),
    SumExp.from_terms([(0.3, 0.5), (1.0, 4.0)]),
    PowerLaw(2, 3),
    PowerLaw(0.5, 1.5),
    PowerLaw(1, 2.5),
])
def test_l1_closed_form_matches_quadrature(k):
    assert analysis.quad_l1(k) == pytest.approx(k.l1_norm, rel=1e-8)


def test_sumexp_decreasing_flag():
    assert SumExp.from_terms([(1, 1), (2, 3)]).is_decreasing


@settings(max_examples=50)
@given(st.lists(st.floats(0, 100, allow_nan=False), min_size=2, max_size=30))
def test_event_stream_rejects_non_increasing(ts):
    arr = np.array(ts)
    ok = np.all(np.diff(arr) > 0)
    if ok:
        EventStream(arr, float(arr.max()) + 1)
    else:
        with pytest.raises(DomainError):
            EventStream(arr, float(arr.max()) + 1)


@settings(max_examples=30)
@given(st.permutations(list(range(1, 8))))
def test_event_stream_permutations(perm):
    arr = np.array(perm, float)
    if list(perm) == sorted(perm):
        EventStream(arr, 10.0)
    else:
        with pytest.raises(DomainError):
            EventStream(arr, 10.0)


def test_event_stream_csv_roundtrip():
    s = EventStream([0.1, 1 / 3, 2.0], 5.0, marks=[1.0, 2.5, math.pi])
    text = s.to_csv()
    assert text.splitlines()[0] == "time,mark"
    back = EventStream.from_csv(text, 5.0)
    assert np.array_equal(back.times, s.times)
    assert np.array_equal(back.marks, s.marks)
    plain = EventStream([0.5], 1.0)
    assert plain.to_csv().splitlines()[0] == "time"


def test_event_stream_bounds_and_marks():
    with pytest.raises(DomainError):
        EventStream([0.5, 1.5], 1.0)
    with pytest.raises(DomainError):
        EventStream([0.5], 1.0, marks=[1.0, 2.0])


def test_markov_state_decay_exact():
    s = MarkovState([1.0, 2.0], [0.5, 3.0])
    s.jump()
    z0 = s.z.copy()
    for _ in range(1000):
        s.decay(0.01)
    expected = z0 * np.exp(-np.array([0.5, 3.0]) * 10.0)
    np.testing.assert_allclose(s.z, expected, rtol=1e-12 * 1000)
    assert s.t == pytest.approx(10.0)


def test_markov_state_sign_invariant():
    with pytest.raises(DomainError):
        MarkovState([1.0], [1.0], z=[-0.5])


def test_mark_model_h_law():
    m = MarkModel.exponential_h(4.0, ExponentialKernel(1, 2))
    assert m.mean_h == pytest.approx(0.25)
    assert m.var_h == pytest.approx(1 / 16)
    d = MarkModel.deterministic(1.0, ExponentialKernel(1, 2))
    assert d.mean_h == pytest.approx(0.5)
    assert d.var_h == 0.0
    sb = MarkModel.scaled_base(ExponentialKernel(1, 1), Gamma(2, 0.1))
    assert sb.mean_h == pytest.approx(0.2)
    # H(a) equals the integral of a * g exactly
    a = np.array([0.3, 1.7])
    assert np.allclose(sb.H(a), a * sb.base.l1_norm)


@pytest.mark.parametrize("law", [Point(0.7), Exponential(3.0), Gamma(2.0, 0.5), Empirical([0.1, 0.4, 2.0])])
def test_law_moments_match_samples(law):
    x = law.sample(np.random.default_rng(1), 200_000)
    assert np.mean(x) == pytest.approx(law.mean, rel=0.02, abs=1e-12)
    s = 0.3
    assert np.mean(np.exp(s * x)) == pytest.approx(law.mgf(s), rel=0.02)


def test_monte_carlo_summary():
    s = MonteCarloSummary.from_values([1.0, 2.0, 3.0, 4.0], seed=3)
    assert s.ci_half_width == pytest.approx(1.96 * s.std_error)
    assert s.n_replicas == 4
    assert s.estimate == 2.5


def test_replica_streams_are_reproducible_and_distinct():
    a = replica_rng(5, 0).random(4)
    b = replica_rng(5, 0).random(4)
    c = replica_rng(5, 1).random(4)
    assert np.array_equal(a, b)
    assert not np.array_equal(a, c)
