"""Deterministic functionals of kernels and rates.

Norms, tails, moments, transforms, the Malthusian parameter, the Bartlett
spectrum, the exponential covariance density, regime classification and
sum-of-exponentials approximation.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy import integrate, optimize

from .core import (
    DomainError,
    Kernel,
    NumericalError,
    PowerLaw,
    RateFn,
    RegimeError,
    SumExp,
    Tabulated,
)

QUAD_EPSABS = 1e-10


def _eval(k: Kernel, t):
    if isinstance(k, Tabulated):
        return k._eval_trunc(t)
    return k(t)


def _support_end(k: Kernel) -> float:
    """Where the (decreasing) kernel falls below 1e-14 of its peak, or inf."""
    if isinstance(k, Tabulated) and k.truncated:
        return float(k.grid[-1])
    peak = max(float(_eval(k, 0.0)), 1e-300)
    t = 1.0
    while float(_eval(k, t)) > 1e-14 * peak:
        t *= 2.0
        if t > 1e12:
            return math.inf
    return t


def _breaks(end: float):
    pts = [0.0]
    x = 1.0
    while x < min(end, 1e12):
        pts.append(x)
        x *= 10.0
    return pts


def quad(f, end: float, open_tail: bool = True) -> float:
    """Adaptive Gauss-Kronrod integral of ``f`` over [0, inf), split on decades.

    ``end`` is where the integrand becomes negligible; the remainder beyond it
    is added with an infinite-range rule unless ``open_tail`` is False.
    """
    total = 0.0
    pts = _breaks(end)
    for lo, hi in zip(pts, pts[1:] + [end]):
        val, _ = integrate.quad(f, lo, hi, epsabs=QUAD_EPSABS, epsrel=1e-12, limit=400)
        total += val
    if open_tail:
        # negligible for light tails, essential for power-law ones
        # logarithmic substitution t = e0 e^u keeps slowly decaying tails resolvable
        e0 = end if np.isfinite(end) else pts[-1]
        total += integrate.quad(lambda u: f(e0 * math.exp(u)) * e0 * math.exp(u), 0.0, 600.0,
                                epsabs=QUAD_EPSABS, epsrel=1e-12, limit=400)[0]
    return total


def quad_l1(k: Kernel) -> float:
    """Quadrature value of the L1 norm (independent of the closed forms)."""
    return quad(lambda t: float(_eval(k, t)), _support_end(k), not _finite_support(k))


def _finite_support(k):
    return isinstance(k, Tabulated) and k.truncated


def l1_norm(k: Kernel) -> float:
    """Integral of h over [0, inf); closed form for every family."""
    return k.l1_norm


def tail_integral(k: Kernel, t: float) -> float:
    """H(t), the integral of h over [t, inf)."""
    if t < 0:
        raise DomainError("tail integral needs t >= 0")
    return k.tail(float(t))


def first_moment(k: Kernel) -> float:
    """m, the integral of t h(t); +inf for heavy tails."""
    return k.first_moment()


def laplace(k: Kernel, theta: float) -> float:
    """Laplace transform of h at ``theta`` (closed form or quadrature)."""
    val = k.laplace(theta)
    if val is not None:
        return val
    if theta < 0:
        return math.inf
    return quad(lambda t: math.exp(-theta * t) * float(_eval(k, t)), _support_end(k), not _finite_support(k))


def _laplace_moment(k: Kernel, theta: float) -> float:
    if isinstance(k, SumExp):
        return k.laplace_moment(theta)
    return quad(lambda t: t * math.exp(-theta * t) * float(_eval(k, t)), _support_end(k), not _finite_support(k))


def fourier(k: Kernel, omega: float) -> complex:
    """Integral of e^{i omega t} h(t) over [0, inf)."""
    val = k.fourier(omega)
    if val is not None:
        return val
    if omega == 0:
        return complex(k.l1_norm)
    scale = k.l1_norm / max(k.h0, 1e-300)
    if abs(omega) * scale > 1e4:
        # far beyond the kernel's time scale the transform is negligible
        return 0j

    def f(t):
        return float(_eval(k, t))

    with warnings.catch_warnings():
        warnings.simplefilter("ignore", integrate.IntegrationWarning)
        if _finite_support(k):
            end = float(k.grid[-1])
            re = integrate.quad(f, 0.0, end, weight="cos", wvar=omega, epsabs=QUAD_EPSABS, limit=400)[0]
            im = integrate.quad(f, 0.0, end, weight="sin", wvar=omega, epsabs=QUAD_EPSABS, limit=400)[0]
        else:
            w = abs(omega)
            re = integrate.quad(f, 0.0, np.inf, weight="cos", wvar=w, epsabs=QUAD_EPSABS, limlst=200)[0]
            im = integrate.quad(f, 0.0, np.inf, weight="sin", wvar=w, epsabs=QUAD_EPSABS, limlst=200)[0]
            im = math.copysign(im, omega)
    return complex(re, im)


def malthusian(k: Kernel) -> float:
    """Growth exponent theta > 0 solving laplace(k, theta) = 1.

    Raises RegimeError unless the kernel is super-critical.
    """
    l1 = k.l1_norm
    if not l1 > 1:
        raise RegimeError(f"malthusian parameter needs ||h||_1 > 1, got {l1:.6g}")
    if isinstance(k, SumExp) and k.a.size == 1:
        return float(k.a[0] - k.b[0])

    def g(th):
        return laplace(k, th) - 1.0

    hi = 1.0
    while g(hi) > 0:
        hi *= 2.0
        if hi > 1e12:
            raise NumericalError("no Malthusian root below 1e12")
    lo = 0.0
    while hi - lo > 1e-12 * max(1.0, hi):
        mid = 0.5 * (lo + hi)
        if g(mid) > 0:
            lo = mid
        else:
            hi = mid
    th = 0.5 * (lo + hi)
    for _ in range(2):
        d = _laplace_moment(k, th)
        if d > 0:
            step = g(th) / d
            if lo <= th + step <= hi + 1e-9:
                th += step
    if abs(g(th)) > 1e-12:
        raise NumericalError(f"Malthusian residual {g(th):.3g} above 1e-12")
    return th


def bartlett_density(k: Kernel, nu: float, omega: float) -> float:
    """Spectral density nu / (2 pi (1 - ||h||) |1 - h^(omega)|^2) of a stationary linear process."""
    l1 = k.l1_norm
    if not l1 < 1:
        raise RegimeError("Bartlett spectrum needs ||h||_1 < 1")
    hw = fourier(k, omega)
    return nu / (2.0 * math.pi * (1.0 - l1) * abs(1.0 - hw) ** 2)


def exp_covariance_density(a: float, b: float, nu: float, tau: float) -> float:
    """Covariance density of the stationary process with h(t) = a e^{-bt}.

    mu(tau) = nu a b (2b - a) / (2 (b - a)^2) e^{-(b - a)|tau|}, tau != 0.
    """
    if not b > a:
        raise RegimeError("stationarity needs b > a")
    return nu * a * b * (2 * b - a) / (2 * (b - a) ** 2) * math.exp(-(b - a) * abs(tau))


# ---------------------------------------------------------------------------
# regimes


REGIMES = ("Sublinear", "SubCritical", "Critical", "SuperCritical", "Explosive")


@dataclass(frozen=True)
class RegimeReport:
    regime: str
    slope: float
    l1: float
    explosive_sum_converges: bool
    stability_margin: Optional[float]

    def as_dict(self):
        return {
            "regime": self.regime,
            "slope": self.slope,
            "l1": self.l1,
            "explosive_sum_converges": self.explosive_sum_converges,
            "stability_margin": self.stability_margin,
        }


def classify(r: RateFn, k: Kernel) -> RegimeReport:
    """Regime of the pair (rate, kernel).

    Explosion is decided symbolically per rate family; then a zero asymptotic
    slope means sublinear, and otherwise slope * ||h||_1 is compared with 1.
    """
    l1 = k.l1_norm
    slope = float(r.asymptotic_slope)
    lip = r.lipschitz_constant
    margin = lip * l1 if lip is not None else None
    if r.explosive:
        regime = "Explosive"
    elif slope == 0:
        regime = "Sublinear"
    else:
        prod = slope * l1
        if math.isclose(prod, 1.0, rel_tol=1e-12, abs_tol=0.0):
            regime = "Critical"
        elif prod < 1:
            regime = "SubCritical"
        else:
            regime = "SuperCritical"
    return RegimeReport(regime, slope, l1, bool(r.explosive), margin)


# ---------------------------------------------------------------------------
# sum-of-exponentials approximation


@dataclass(frozen=True)
class ExpSumFit:
    terms: list
    linf_error: float
    l1_error: float
    fit_horizon: float
    warning: bool = False

    @property
    def kernel(self) -> SumExp:
        return SumExp.from_terms(self.terms)


def fit_errors(terms, k: Kernel, horizon: float, n_check: int = 20001):
    """(L-inf, L1) distance on a uniform check grid over [0, horizon]."""
    t = np.linspace(0.0, horizon, n_check)
    approx = SumExp.from_terms(terms)(t) if terms else np.zeros_like(t)
    diff = np.abs(np.asarray(_eval(k, t)) - approx)
    return float(diff.max()), float(integrate.trapezoid(diff, t))


def decay_grid(n_terms: int, horizon: float, b_max: float) -> np.ndarray:
    """Geometric decay rates on [1/horizon, b_max]; nested when n - 1 doubles."""
    if n_terms == 1:
        return np.array([math.sqrt(b_max / horizon)])
    return np.geomspace(1.0 / horizon, b_max, n_terms)


def fit_sum_exp(k: Kernel, n_terms: int, horizon: float, b_max: float | None = None) -> ExpSumFit:
    """Nonnegative least-squares sum-of-exponentials fit of a decreasing kernel.

    Decay rates sit on a fixed geometric grid; coefficients solve an NNLS
    problem on a log-spaced time grid over [0, horizon].
    """
    if n_terms < 1:
        raise DomainError("n_terms must be at least 1")
    if not (horizon > 0 and np.isfinite(horizon)):
        raise DomainError("horizon must be positive and finite")
    if not getattr(k, "is_decreasing", False):
        raise DomainError("fit_sum_exp needs a decreasing kernel")
    if not np.isfinite(k.l1_norm):
        raise DomainError("fit_sum_exp needs an integrable kernel")
    if isinstance(k, SumExp) and k.a.size <= n_terms:
        terms = k.terms
        linf, l1 = fit_errors(terms, k, horizon)
        return ExpSumFit(terms, linf, l1, float(horizon))
    if b_max is None:
        mass = k.l1_norm - k.tail(horizon)
        b_max = 20.0 * k.h0 / max(mass, 1e-300)
        b_max = max(b_max, 10.0 / horizon)
    b = decay_grid(n_terms, horizon, b_max)
    t = np.concatenate(([0.0], horizon * np.geomspace(1e-4, 1.0, 400)))
    A = np.exp(-np.outer(t, b))
    y = np.asarray(_eval(k, t), float)
    coef, _ = optimize.nnls(A, y, maxiter=50 * n_terms + 500)
    terms = [(float(c), float(bb)) for c, bb in zip(coef, b) if c > 0]
    linf, l1 = fit_errors(terms, k, horizon)
    return ExpSumFit(terms, linf, l1, float(horizon), warning=not terms)
