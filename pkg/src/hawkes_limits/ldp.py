"""Moment generating functions, rate functions and ruin exponents.

Linear Hawkes with branching law H (the L1 mass carried by one event) has
limiting log-MGF

    Gamma(theta) = nu (f(theta) - 1),   f = minimal root of x = E[exp(theta + H (x - 1))],

finite up to a critical exponent theta_c.  Rate functions are its Legendre
transforms.  With claims C attached to events the same fixed point with
exp(theta C) in place of exp(theta) governs the aggregate claims, whose
root against rho theta is the ruin exponent.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy import integrate, special

from . import _engine
from .core import (
    CriticalityError,
    Distribution,
    DomainError,
    Exponential,
    Kernel,
    NumericalError,
    Point,
    Tabulated,
)

ROOT_TOL = 1e-12


# ---------------------------------------------------------------------------
# scalar root helpers


def _bisect(f, lo, hi, tol=ROOT_TOL, max_iter=400):
    """Bisection for an increasing sign change f(lo) < 0 < f(hi)."""
    flo = f(lo)
    if flo > 0:
        raise NumericalError("bisection bracket does not straddle a root")
    for _ in range(max_iter):
        mid = 0.5 * (lo + hi)
        if hi - lo <= tol * max(1.0, abs(mid)):
            break
        if f(mid) > 0:
            hi = mid
        else:
            lo = mid
    return lo, hi


def golden_max(f, lo, hi, tol=1e-12, max_iter=500):
    """Golden-section search for the maximum of a unimodal ``f`` on [lo, hi]."""
    invphi = (math.sqrt(5.0) - 1.0) / 2.0
    a, b = lo, hi
    c = b - invphi * (b - a)
    d = a + invphi * (b - a)
    fc, fd = f(c), f(d)
    for _ in range(max_iter):
        if abs(b - a) <= tol * max(1.0, abs(a) + abs(b)):
            break
        if fc > fd:
            b, d, fd = d, c, fc
            c = b - invphi * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + invphi * (b - a)
            fd = f(d)
    x = 0.5 * (a + b)
    best = max((f(lo), lo), (f(x), x), (f(hi), hi))
    return best[1], best[0]


# ---------------------------------------------------------------------------
# renewal MGF


def mgf_renewal(nu: float, k: Kernel, theta: float, t: float, grid_step: float = 0.01,
                richardson: bool = True) -> float:
    """log E[exp(theta N_t)] for the linear process started empty.

    Solves F(s) = exp(theta + int_0^s h(u)(F(s-u) - 1) du) forward in s on a
    uniform grid (trapezoidal convolution) and returns nu * int_0^t (F - 1).
    With ``richardson`` the computation is repeated at half the step and a
    RuntimeWarning is issued when the two differ by more than 0.5%.
    """
    l1 = k.l1_norm
    if not l1 < 1:
        raise DomainError("mgf_renewal needs ||h||_1 < 1")
    if l1 > 0:
        limit = l1 - 1.0 - math.log(l1)
        if theta > limit:
            raise DomainError(f"theta={theta} beyond the admissible range {limit:.6g}")
    if t < 0:
        raise DomainError("t must be nonnegative")
    if t == 0 or theta == 0:
        return 0.0
    val = _mgf_grid(nu, k, theta, t, grid_step)
    if richardson:
        fine = _mgf_grid(nu, k, theta, t, grid_step / 2.0)
        if abs(fine - val) > 5e-3 * max(abs(fine), 1e-300):
            warnings.warn(f"mgf_renewal: halving the step moved the answer by "
                          f"{abs(fine - val) / abs(fine):.3%}", RuntimeWarning, stacklevel=2)
    return val


def _mgf_grid(nu, k, theta, t, step):
    n = max(1, int(round(t / step)))
    dt = t / n
    grid = dt * np.arange(n + 1)
    hg = np.asarray(k._eval_trunc(grid) if isinstance(k, Tabulated) else k(grid), float)
    peak = hg.max() if hg.size else 0.0
    nz = np.flatnonzero(hg > 1e-17 * peak) if peak > 0 else np.array([0])
    jmax = int(nz[-1]) if nz.size else 0
    l1 = k.l1_norm
    bracket = 1.0 / l1 if l1 > 0 else np.inf
    F, ok = _engine.renewal_solve(np.ascontiguousarray(hg), float(theta), dt, n, jmax, bracket)
    if not ok:
        raise CriticalityError("renewal iteration left the minimal-solution bracket")
    return float(nu * integrate.trapezoid(F - 1.0, dx=dt))


# ---------------------------------------------------------------------------
# fixed points


@dataclass(frozen=True)
class CriticalPoint:
    theta_c: float
    x_c: float
    # e^{theta_c}: the largest admissible multiplier in x = A E[e^{H(x-1)}]
    a_c: float


def critical_point(law: Distribution) -> CriticalPoint:
    """(theta_c, x_c) for the branching law ``law`` of H.

    x_c > 1 solves x E[H e^{H(x-1)}] = E[e^{H(x-1)}]; theta_c = -log E[H e^{H(x_c-1)}].
    Returns infinite values when no root exists below the overflow bound.
    """
    if not law.mean < 1:
        raise DomainError("critical point needs E[H] < 1")
    if law.mean == 0:
        return CriticalPoint(math.inf, math.inf, math.inf)

    def D(x):
        m = law.mgf(x - 1.0)
        m1 = law.mgf1(x - 1.0)
        if not (np.isfinite(m) and np.isfinite(m1)):
            return math.inf
        return x * m1 - m

    s_max = law.abscissa
    if np.isfinite(s_max):
        hi = 1.0 + s_max
        frac = 0.5
        while not D(1.0 + s_max * (1.0 - frac)) > 0:
            frac *= 0.5
            if frac < 1e-15:
                break
        hi = 1.0 + s_max * (1.0 - frac)
    else:
        hi = 2.0
        while not D(hi) > 0:
            hi = 1.0 + 2.0 * (hi - 1.0)
            if hi > 1e6:
                return CriticalPoint(math.inf, math.inf, math.inf)
    lo, hi = _bisect(D, 1.0, hi)
    x = 0.5 * (lo + hi)
    for _ in range(2):
        d1 = x * law.mgf2(x - 1.0)
        if d1 > 0:
            xn = x - D(x) / d1
            if lo - 1e-12 <= xn <= hi + 1e-12:
                x = xn
    m1 = law.mgf1(x - 1.0)
    return CriticalPoint(-math.log(m1), x, 1.0 / m1)


def minimal_root(law: Distribution, mult: float, crit: Optional[CriticalPoint] = None,
                 max_iter: int = 60, trace: Optional[list] = None) -> float:
    """Minimal solution of x = mult * E[e^{H(x-1)}], or inf when none exists.

    Starts with the monotone iteration x_{n+1} = mult E[e^{H(x_n - 1)}]
    from x_0 = 1 (asserting monotonicity), then polishes with Newton steps,
    which stay monotone because the map is convex.
    """
    crit = crit or critical_point(law)
    if mult > crit.a_c * (1.0 + 1e-15):
        return math.inf
    x = 1.0
    up = mult >= 1.0
    if trace is not None:
        trace.append(x)
    for _ in range(max_iter):
        xn = mult * law.mgf(x - 1.0)
        if (up and xn < x - 1e-15 * x) or (not up and xn > x + 1e-15 * x):
            raise NumericalError("fixed-point iteration lost monotonicity")
        if xn > crit.x_c * (1.0 + 1e-12):
            raise NumericalError("fixed-point iteration crossed the critical point")
        done = abs(xn - x) <= 1e-15 * max(1.0, x)
        x = xn
        if trace is not None:
            trace.append(x)
        if done:
            break
    for _ in range(100):
        g = mult * law.mgf(x - 1.0) - x
        dg = mult * law.mgf1(x - 1.0) - 1.0
        if g == 0 or dg >= 0:
            break
        step = -g / dg
        # from the left the convex map only moves up; a backward step is rounding
        if up and not step > 0:
            break
        xn = min(x + step, crit.x_c)
        if trace is not None:
            trace.append(xn)
        if abs(xn - x) <= 1e-16 * max(1.0, x):
            x = xn
            break
        x = xn
    resid = mult * law.mgf(x - 1.0) - x
    if abs(resid) > 1e-9 * max(1.0, x):
        raise NumericalError(f"fixed point did not converge (residual {resid:.3g})")
    return x


def gamma_marked(nu: float, law: Distribution, theta: float, crit: Optional[CriticalPoint] = None) -> float:
    """Gamma(theta) = nu (f(theta) - 1); +inf beyond the critical exponent."""
    if theta == 0:
        return 0.0
    crit = crit or critical_point(law)
    if theta > crit.theta_c:
        return math.inf
    x = minimal_root(law, math.exp(theta), crit)
    return nu * (x - 1.0)


def gamma_marked_derivative(nu: float, law: Distribution, theta: float,
                            crit: Optional[CriticalPoint] = None) -> float:
    """Gamma'(theta) by implicit differentiation of the fixed point."""
    crit = crit or critical_point(law)
    if theta > crit.theta_c:
        return math.inf
    A = math.exp(theta)
    x = minimal_root(law, A, crit)
    den = 1.0 - A * law.mgf1(x - 1.0)
    if den <= 0:
        return math.inf
    return nu * x / den


@dataclass(frozen=True)
class GammaCurve:
    theta_grid: np.ndarray
    gamma_values: np.ndarray
    theta_c: float
    x_c: float


def gamma_curve(nu: float, law: Distribution, theta_grid) -> GammaCurve:
    crit = critical_point(law)
    th = np.asarray(theta_grid, float)
    vals = np.array([gamma_marked(nu, law, float(x), crit) for x in th])
    return GammaCurve(th, vals, crit.theta_c, crit.x_c)


def unmarked_law(l1: float) -> Point:
    """Branching law of an unmarked kernel: H is the constant ||h||_1."""
    return Point(l1)


# ---------------------------------------------------------------------------
# rate functions


def _xlogx_ratio(x, y):
    return 0.0 if x == 0 else x * math.log(x / y)


def rate_linear(nu: float, l1: float, x: float) -> float:
    """I(x) = x log(x / (nu + x l1)) - x + x l1 + nu for x >= 0, +inf otherwise."""
    if not l1 < 1:
        raise DomainError("rate_linear needs ||h||_1 < 1")
    if x < 0:
        return math.inf
    return _xlogx_ratio(x, nu + x * l1) - x + x * l1 + nu


def rate_moderate(nu: float, l1: float, x: float) -> float:
    """J(x) = x^2 (1 - l1)^3 / (2 nu)."""
    if not l1 < 1:
        raise DomainError("rate_moderate needs ||h||_1 < 1")
    return x * x * (1.0 - l1) ** 3 / (2.0 * nu)


@dataclass(frozen=True)
class RatePoint:
    value: float
    theta_star: float
    x_star: float


def rate_marked(nu: float, law: Distribution, x: float, crit: Optional[CriticalPoint] = None) -> RatePoint:
    """Lambda(x) = theta* x - nu (x* - 1) with (theta*, x*) from the optimality system.

    The outer unknown is x* in (0, x_c): writing R(y) = E[H e^{(y-1)H}] / E[e^{(y-1)H}],
    x* solves y + (x/nu)(y R(y) - 1) = 0, which is increasing in y; then
    theta* = log x* - log E[e^{(x*-1)H}].
    """
    if not nu > 0:
        raise DomainError("rate_marked needs nu > 0")
    if x < 0:
        return RatePoint(math.inf, math.nan, math.nan)
    if x == 0:
        return RatePoint(nu, -math.inf, 0.0)
    crit = crit or critical_point(law)
    r = x / nu

    def phi(y):
        return y + r * (y * law.mgf1(y - 1.0) / law.mgf(y - 1.0) - 1.0)

    hi = crit.x_c if np.isfinite(crit.x_c) else 2.0
    while not np.isfinite(crit.x_c) and phi(hi) <= 0:
        hi *= 2.0
    lo = 0.0
    if phi(hi) <= 0:
        raise NumericalError("rate_marked: outer equation not bracketed")
    lo, hi = _bisect(phi, lo, hi)
    y = 0.5 * (lo + hi)
    for _ in range(2):
        m, m1, m2 = law.mgf(y - 1.0), law.mgf1(y - 1.0), law.mgf2(y - 1.0)
        dR = m2 / m - (m1 / m) ** 2
        d = 1.0 + r * (m1 / m + y * dR)
        yn = y - phi(y) / d
        if lo - 1e-12 <= yn <= hi + 1e-12:
            y = yn
    theta = math.log(y) - math.log(law.mgf(y - 1.0))
    return RatePoint(theta * x - nu * (y - 1.0), theta, y)


def legendre_marked(nu: float, law: Distribution, x: float, crit: Optional[CriticalPoint] = None):
    """sup over theta of theta x - Gamma(theta) by golden-section search.

    Returns (value, argmax).
    """
    crit = crit or critical_point(law)
    if x < 0:
        return math.inf, math.nan
    if x == 0:
        return nu, -math.inf
    lo = min(-1.0, math.log(x / nu) - 10.0)
    hi = crit.theta_c

    def obj(th):
        return th * x - gamma_marked(nu, law, th, crit)

    th, val = golden_max(obj, lo, hi)
    return val, th


# ---------------------------------------------------------------------------
# closed forms for exponentially distributed H


def gamma_exp_closed(nu: float, lam: float, theta: float) -> float:
    """Gamma(theta) when H ~ Exponential(lam)."""
    if theta > math.log((lam + 1) ** 2 / (4 * lam)):
        return math.inf
    disc = (lam + 1) ** 2 - 4 * lam * math.exp(theta)
    return nu * (0.5 * (lam + 1 - math.sqrt(max(disc, 0.0))) - 1.0)


def rate_exp_closed(nu: float, lam: float, x: float) -> float:
    """Rate function when H ~ Exponential(lam)."""
    if x < 0:
        return math.inf
    if x == 0:
        return nu
    root = math.sqrt(4 * x * x + nu * nu * (lam + 1) ** 2)
    theta = math.log((-2 * x * x + x * root) / (lam * nu * nu))
    return x * theta - nu * (0.5 * (lam + 1 - (-2 * x + root) / nu) - 1.0)


# ---------------------------------------------------------------------------
# heavy-tailed claim laws


def _heavy_mgf(law, s):
    # E[e^{sX}] = 1 + s int_0^inf e^{sx} P(X > x) dx; infinite for s > 0
    if s == 0:
        return 1.0
    if s > 0:
        return math.inf
    return 1.0 + s * integrate.quad(lambda x: math.exp(s * x) * law.survival(x), 0.0, np.inf, limit=400)[0]


def _heavy_mgf1(law, s):
    # E[X e^{sX}] = int_0^inf (1 + s x) e^{sx} P(X > x) dx
    return integrate.quad(lambda x: (1.0 + s * x) * math.exp(s * x) * law.survival(x), 0.0, np.inf, limit=400)[0]


@dataclass(frozen=True)
class RegularlyVarying(Distribution):
    """Lomax claims: P(C > x) = (1 + x/scale)^{-(alpha+1)}, regularly varying of index -(alpha+1)."""

    alpha: float
    scale: float = 1.0

    code = 4

    def __post_init__(self):
        if not (self.alpha > 0 and self.scale > 0):
            raise DomainError("RegularlyVarying needs alpha > 0 and scale > 0")

    @property
    def mean(self):
        return self.scale / self.alpha

    @property
    def abscissa(self):
        return 0.0

    def survival(self, x):
        return (1.0 + x / self.scale) ** (-(self.alpha + 1.0))

    def mgf(self, s):
        return _heavy_mgf(self, s)

    def mgf1(self, s):
        return self.mean if s == 0 else (math.inf if s > 0 else _heavy_mgf1(self, s))

    def integrated_tail(self, u):
        """1 - B_0(u), B_0 the integrated-tail (equilibrium) distribution."""
        return (1.0 + u / self.scale) ** (-self.alpha)

    def sample(self, rng, n):
        return self.scale * ((1.0 - rng.random(n)) ** (-1.0 / (self.alpha + 1.0)) - 1.0)


@dataclass(frozen=True)
class Gumbel(Distribution):
    """Weibull claims with shape < 1 (Gumbel domain of attraction): P(C > x) = exp(-(x/scale)^shape)."""

    shape: float
    scale: float = 1.0

    code = 5

    def __post_init__(self):
        if not (0 < self.shape < 1 and self.scale > 0):
            raise DomainError("Gumbel-class Weibull needs 0 < shape < 1")

    @property
    def mean(self):
        return self.scale * math.gamma(1.0 + 1.0 / self.shape)

    @property
    def abscissa(self):
        return 0.0

    def survival(self, x):
        return math.exp(-((x / self.scale) ** self.shape))

    def mgf(self, s):
        return _heavy_mgf(self, s)

    def mgf1(self, s):
        return self.mean if s == 0 else (math.inf if s > 0 else _heavy_mgf1(self, s))

    def integrated_tail(self, u):
        k = self.shape
        return float(special.gammaincc(1.0 / k, (u / self.scale) ** k))

    def sample(self, rng, n):
        return self.scale * rng.weibull(self.shape, n)


# ---------------------------------------------------------------------------
# risk model


@dataclass(frozen=True)
class RiskSpec:
    """Surplus R_t = u + rho t - sum_{i <= N_t} C_i driven by a marked linear process.

    ``h_law`` is the law of H(a); the net-profit condition
    rho > E[C] nu / (1 - E[H]) is enforced at construction.
    """

    rho: float
    nu: float
    h_law: Distribution
    claim_law: Distribution
    u: float = 0.0
    z: Optional[float] = None
    # plain simulation of unprofitable portfolios may switch the check off
    require_net_profit: bool = True

    def __post_init__(self):
        if not (self.nu > 0 and self.rho > 0):
            raise DomainError("premium rate and base intensity must be positive")
        if not self.h_law.mean < 1:
            raise DomainError("risk model needs E[H] < 1")
        if self.require_net_profit and not self.rho > self.net_profit_bound:
            raise DomainError(f"net-profit condition fails: rho={self.rho} <= {self.net_profit_bound:.6g}")

    @property
    def net_profit_bound(self) -> float:
        return self.claim_law.mean * self.nu / (1.0 - self.h_law.mean)


def _claim_critical(rs: RiskSpec):
    """(theta_c, x_c) of Gamma_C: x_c as for the marks, M_C(theta_c) = e^{theta_c(H)}."""
    crit = critical_point(rs.h_law)
    target = crit.a_c
    law = rs.claim_law
    if isinstance(law, Exponential):
        th = law.rate * (1.0 - 1.0 / target)
    else:
        hi = law.abscissa if np.isfinite(law.abscissa) else 1.0
        if np.isfinite(law.abscissa):
            hi = law.abscissa * (1.0 - 1e-15)
        else:
            while law.mgf(hi) < target:
                hi *= 2.0
        lo, hi = _bisect(lambda t: law.mgf(t) - target, 0.0, hi)
        th = 0.5 * (lo + hi)
    return th, crit


def gamma_claims(rs: RiskSpec, theta: float) -> float:
    """Gamma_C(theta) = nu (x - 1), x minimal root of x = M_C(theta) E[e^{(x-1)H}]."""
    th_c, crit = _claim_critical(rs)
    if theta > th_c:
        return math.inf
    mult = rs.claim_law.mgf(theta)
    return rs.nu * (minimal_root(rs.h_law, min(mult, crit.a_c), crit) - 1.0)


def gamma_claims_derivative(rs: RiskSpec, theta: float) -> float:
    th_c, crit = _claim_critical(rs)
    if theta > th_c:
        return math.inf
    mult = min(rs.claim_law.mgf(theta), crit.a_c)
    x = minimal_root(rs.h_law, mult, crit)
    den = 1.0 - mult * rs.h_law.mgf1(x - 1.0)
    if den <= 0:
        return math.inf
    return rs.nu * rs.claim_law.mgf1(theta) * rs.h_law.mgf(x - 1.0) / den


def sandwich_bounds(rs: RiskSpec):
    """(lower, upper) premium bounds between which the ruin exponent exists."""
    th_c, crit = _claim_critical(rs)
    return rs.net_profit_bound, rs.nu * (crit.x_c - 1.0) / th_c


def ruin_exponent(rs: RiskSpec) -> float:
    """theta_dagger in (0, theta_c): the positive root of Gamma_C(theta) = rho theta."""
    lo_b, hi_b = sandwich_bounds(rs)
    if not (lo_b < rs.rho < hi_b):
        raise DomainError(f"premium {rs.rho} outside the admissible band ({lo_b:.6g}, {hi_b:.6g})")
    th_c, _ = _claim_critical(rs)

    def G(th):
        return gamma_claims(rs, th) - rs.rho * th

    # G is convex, zero at 0, negative just after it: bracket from its minimiser
    th_min, _ = golden_max(lambda th: -G(th), 0.0, th_c, tol=1e-10)
    lo, hi = _bisect(G, th_min, th_c)
    th = 0.5 * (lo + hi)
    for _ in range(2):
        d = gamma_claims_derivative(rs, th) - rs.rho
        if np.isfinite(d) and d > 0:
            tn = th - G(th) / d
            if lo - 1e-12 <= tn <= hi + 1e-12:
                th = tn
    return th


def ruin_exponent_exp_closed(nu: float, lam: float, gamma: float, rho: float):
    """Both roots of rho^2 th^2 - (rho^2 gamma - rho nu (1 - lam)) th - (rho nu gamma (1 - lam) + lam nu^2) = 0.

    Returned as (smaller, larger); for H ~ Exponential(lam), C ~ Exponential(gamma).
    """
    A = rho * rho
    B = -(rho * rho * gamma - rho * nu * (1.0 - lam))
    C = -(rho * nu * gamma * (1.0 - lam) + lam * nu * nu)
    disc = B * B - 4 * A * C
    if disc < 0:
        raise NumericalError("no real root")
    sq = math.sqrt(disc)
    return (-B - sq) / (2 * A), (-B + sq) / (2 * A)


def legendre_claims(rs: RiskSpec, y: float):
    """Lambda_C(y) = sup theta y - Gamma_C(theta); returns (value, argmax)."""
    th_c, _ = _claim_critical(rs)
    if y <= 0:
        raise DomainError("legendre_claims needs y > 0")

    def f(th):
        return gamma_claims_derivative(rs, th) - y

    hi = th_c
    if np.isfinite(f(hi)) and f(hi) < 0:
        th = hi
    else:
        lo = -1.0
        while f(lo) > 0:
            lo *= 2.0
        lo, hi2 = _bisect(f, lo, hi)
        th = 0.5 * (lo + hi2)
    return th * y - gamma_claims(rs, th), th


def finite_horizon_breakpoint(rs: RiskSpec, theta_dagger: Optional[float] = None, step: float = 1e-6) -> float:
    """1 / (Gamma_C'(theta_dagger) - rho), derivative by central difference."""
    td = ruin_exponent(rs) if theta_dagger is None else theta_dagger
    d = (gamma_claims(rs, td + step) - gamma_claims(rs, td - step)) / (2 * step)
    return 1.0 / (d - rs.rho)


def ruin_finite_horizon(rs: RiskSpec, z: Optional[float] = None) -> float:
    """w(z) = z Lambda_C(1/z + rho) below the breakpoint, theta_dagger above it."""
    z = rs.z if z is None else z
    if z is None or not z > 0:
        raise DomainError("horizon factor z must be positive")
    td = ruin_exponent(rs)
    z0 = finite_horizon_breakpoint(rs, td)
    if z >= z0 or not np.isfinite(z):
        return td
    val, _ = legendre_claims(rs, 1.0 / z + rs.rho)
    return z * val


def ruin_heavy_tail(rs: RiskSpec, u: Optional[float] = None, T: float = math.inf,
                    tail: Optional[Distribution] = None) -> dict:
    """Subexponential-claim ruin asymptotics.

    ``tail`` (default: the model's claim law) must be :class:`RegularlyVarying`
    or :class:`Gumbel`.  Returns the infinite-horizon constant, the
    finite-horizon constant for horizon factor ``T`` and, when ``u`` is
    given, the implied estimates constant * (1 - B_0(u)).
    """
    tail = rs.claim_law if tail is None else tail
    if not isinstance(tail, (RegularlyVarying, Gumbel)):
        raise DomainError("ruin_heavy_tail needs a RegularlyVarying or Gumbel claim law")
    eh = rs.h_law.mean
    ec = tail.mean
    slack = rs.rho * (1.0 - eh) - rs.nu * ec
    if not slack > 0:
        raise DomainError("net-profit condition fails for the heavy-tailed claims")
    const = rs.nu * ec / slack
    kappa = slack / (rs.rho * (1.0 - eh))
    if isinstance(tail, RegularlyVarying):
        bracket = 1.0 - (1.0 + kappa * T / tail.alpha) ** (-tail.alpha) if np.isfinite(T) else 1.0
    else:
        bracket = 1.0 - math.exp(-kappa * T) if np.isfinite(T) else 1.0
    out = {"infinite_constant": const, "finite_constant": const * bracket, "bracket": bracket,
           "tail": type(tail).__name__}
    if u is not None:
        b0 = tail.integrated_tail(u)
        out["psi_infinite"] = const * b0
        out["psi_finite"] = const * bracket * b0
    return out


# ---------------------------------------------------------------------------
# explosion, small times


@dataclass(frozen=True)
class SmallTimeExplosion:
    exponent: float
    c_k: float
    abs_c_k: float
    limit_constant: float


def explosion_small_time(gamma: float, k: float, delta: float, h0: float) -> SmallTimeExplosion:
    """Small-time explosion asymptotics for lambda(z) = gamma z^k + delta.

    C_k = int_0^inf log(g y^k / (g y^k + 1)) dy with g = gamma h0^k (negative).
    ``limit_constant`` is the value of lim eps^{1/(k-1)} log P(tau <= eps)
    implied by a saddle-point argument, -(k-1) (|C_k| / k)^{k/(k-1)}; it
    carries an explicit minus sign.
    """
    if not k > 1:
        raise DomainError("small-time explosion needs k > 1")
    g = gamma * h0 ** k

    def f(y):
        if y == 0:
            return -math.inf
        return -math.log1p(1.0 / (g * y ** k))

    c_k = integrate.quad(f, 0.0, 1.0, limit=400)[0] + integrate.quad(f, 1.0, np.inf, limit=400)[0]
    a = abs(c_k)
    return SmallTimeExplosion(1.0 / (k - 1.0), c_k, a, -(k - 1.0) * (a / k) ** (k / (k - 1.0)))
