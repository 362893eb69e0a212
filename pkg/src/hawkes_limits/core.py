"""Shared domain types: kernels, rate functions, mark models, event streams.

Everything here is an immutable value object except :class:`MarkovState`,
which is owned by a single simulation loop.
"""
from __future__ import annotations

import csv
import io
import math
import time
from dataclasses import dataclass, field
from functools import cached_property
from typing import Optional, Sequence

import numpy as np
from scipy import special


# ---------------------------------------------------------------------------
# errors


class HawkesError(Exception):
    """Base class; ``code`` is the short machine-readable tag used by the CLI."""

    code = "error"


class DomainError(HawkesError, ValueError):
    code = "domain"


class RegimeError(HawkesError, ValueError):
    code = "regime"


class OutOfSupportError(HawkesError, ValueError):
    code = "support"


class CriticalityError(HawkesError, ArithmeticError):
    code = "criticality"


class NumericalError(HawkesError, ArithmeticError):
    code = "numerical"


class ConfigError(HawkesError, ValueError):
    code = "config"


# ---------------------------------------------------------------------------
# random streams


def replica_seed_sequence(master_seed: int, replica: int) -> np.random.SeedSequence:
    return np.random.SeedSequence([int(master_seed), int(replica)])


def replica_rng(master_seed: int, replica: int) -> np.random.Generator:
    """Counter-based Philox stream for replica ``replica`` of ``master_seed``."""
    return np.random.Generator(np.random.Philox(replica_seed_sequence(master_seed, replica)))


def replica_key(master_seed: int, replica: int) -> int:
    """64-bit key for the hash-based uniforms used by the embedding sampler."""
    return int(replica_seed_sequence(master_seed, replica).generate_state(1, np.uint64)[0])


# ---------------------------------------------------------------------------
# nonnegative laws (marks, claims)


class Distribution:
    """Nonnegative scalar law with a closed-form moment generating function.

    ``mgf(s)`` is E[e^{sX}] (``inf`` outside the domain), ``mgf1(s)`` is
    E[X e^{sX}] and ``mgf2(s)`` is E[X^2 e^{sX}].
    """

    code = -1

    @property
    def mean(self) -> float:
        return self.mgf1(0.0)

    @property
    def var(self) -> float:
        return self.mgf2(0.0) - self.mean ** 2

    @property
    def abscissa(self) -> float:
        """Supremum of the ``s`` for which the mgf is finite."""
        return math.inf

    def log_mgf(self, s: float) -> float:
        m = self.mgf(s)
        return math.log(m) if np.isfinite(m) else math.inf

    def _nb(self):
        """(code, p0, p1, values, cdf) for the compiled samplers."""
        raise NotImplementedError


@dataclass(frozen=True)
class Point(Distribution):
    value: float

    code = 0

    def __post_init__(self):
        if not (self.value >= 0 and np.isfinite(self.value)):
            raise DomainError(f"point mass must be finite and nonnegative, got {self.value}")

    def mgf(self, s):
        return math.exp(s * self.value)

    def mgf1(self, s):
        return self.value * math.exp(s * self.value)

    def mgf2(self, s):
        return self.value ** 2 * math.exp(s * self.value)

    def scaled(self, c: float) -> "Point":
        return Point(self.value * c)

    def tilted(self, s: float) -> "Point":
        return self

    def sample(self, rng, n):
        return np.full(n, self.value)

    def _nb(self):
        return 0, self.value, 0.0, np.zeros(1), np.ones(1)


@dataclass(frozen=True)
class Exponential(Distribution):
    rate: float

    code = 1

    def __post_init__(self):
        if not self.rate > 0:
            raise DomainError(f"exponential rate must be positive, got {self.rate}")

    @property
    def abscissa(self):
        return self.rate

    def mgf(self, s):
        return self.rate / (self.rate - s) if s < self.rate else math.inf

    def mgf1(self, s):
        return self.rate / (self.rate - s) ** 2 if s < self.rate else math.inf

    def mgf2(self, s):
        return 2.0 * self.rate / (self.rate - s) ** 3 if s < self.rate else math.inf

    def scaled(self, c):
        return Exponential(self.rate / c)

    def tilted(self, s):
        # density proportional to e^{sx} times the exponential density
        if s >= self.rate:
            raise DomainError("tilt outside the mgf domain")
        return Exponential(self.rate - s)

    def sample(self, rng, n):
        return rng.exponential(1.0 / self.rate, n)

    def _nb(self):
        return 1, self.rate, 0.0, np.zeros(1), np.ones(1)


@dataclass(frozen=True)
class Gamma(Distribution):
    shape: float
    scale: float

    code = 2

    def __post_init__(self):
        if not (self.shape > 0 and self.scale > 0):
            raise DomainError("gamma shape and scale must be positive")

    @property
    def abscissa(self):
        return 1.0 / self.scale

    def mgf(self, s):
        return (1.0 - self.scale * s) ** (-self.shape) if s * self.scale < 1 else math.inf

    def mgf1(self, s):
        if s * self.scale >= 1:
            return math.inf
        return self.shape * self.scale * (1.0 - self.scale * s) ** (-self.shape - 1)

    def mgf2(self, s):
        if s * self.scale >= 1:
            return math.inf
        k, th = self.shape, self.scale
        return k * (k + 1) * th ** 2 * (1.0 - th * s) ** (-k - 2)

    def scaled(self, c):
        return Gamma(self.shape, self.scale * c)

    def tilted(self, s):
        if s * self.scale >= 1:
            raise DomainError("tilt outside the mgf domain")
        return Gamma(self.shape, self.scale / (1.0 - self.scale * s))

    def sample(self, rng, n):
        return rng.gamma(self.shape, self.scale, n)

    def _nb(self):
        return 2, self.shape, self.scale, np.zeros(1), np.ones(1)


@dataclass(frozen=True, eq=False)
class Empirical(Distribution):
    """Discrete law on ``values`` with optional ``weights`` (uniform by default)."""

    values: np.ndarray
    weights: Optional[np.ndarray] = None

    code = 3

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float).ravel()
        if v.size == 0 or np.any(v < 0) or not np.all(np.isfinite(v)):
            raise DomainError("empirical law needs finite nonnegative values")
        w = np.full(v.size, 1.0 / v.size) if self.weights is None else np.asarray(self.weights, float).ravel()
        if w.shape != v.shape or np.any(w < 0) or w.sum() <= 0:
            raise DomainError("bad empirical weights")
        w = w / w.sum()
        v.setflags(write=False)
        w.setflags(write=False)
        object.__setattr__(self, "values", v)
        object.__setattr__(self, "weights", w)

    def mgf(self, s):
        return float(np.dot(self.weights, np.exp(s * self.values)))

    def mgf1(self, s):
        return float(np.dot(self.weights, self.values * np.exp(s * self.values)))

    def mgf2(self, s):
        return float(np.dot(self.weights, self.values ** 2 * np.exp(s * self.values)))

    def scaled(self, c):
        return Empirical(self.values * c, self.weights)

    def tilted(self, s):
        w = self.weights * np.exp(s * (self.values - self.values.max()))
        return Empirical(self.values, w)

    def sample(self, rng, n):
        return rng.choice(self.values, size=n, p=self.weights)

    def _nb(self):
        cdf = np.cumsum(self.weights)
        cdf[-1] = 1.0
        return 3, 0.0, 0.0, np.ascontiguousarray(self.values), cdf


# ---------------------------------------------------------------------------
# kernels


class Kernel:
    """Exciting function h on [0, inf); h(t) = 0 for t < 0."""

    def __call__(self, t):
        t_arr = np.asarray(t, dtype=float)
        if not np.all(np.isfinite(t_arr)):
            raise DomainError("kernel evaluated at a non-finite time")
        out = np.where(t_arr < 0, 0.0, self._eval(np.maximum(t_arr, 0.0)))
        return float(out) if out.ndim == 0 else out

    @property
    def h0(self) -> float:
        return float(self(0.0))

    @cached_property
    def l1_norm(self) -> float:
        return self.tail(0.0)

    @property
    def truncated(self) -> bool:
        return False

    def laplace(self, theta: float) -> Optional[float]:
        """Closed-form Laplace transform, or None when quadrature is needed."""
        return None

    def fourier(self, omega: float) -> Optional[complex]:
        return None


@dataclass(frozen=True, eq=False)
class SumExp(Kernel):
    """h(t) = sum_i a_i exp(-b_i t)."""

    a: np.ndarray
    b: np.ndarray

    def __post_init__(self):
        a = np.atleast_1d(np.asarray(self.a, dtype=float)).copy()
        b = np.atleast_1d(np.asarray(self.b, dtype=float)).copy()
        if a.shape != b.shape or a.ndim != 1:
            raise DomainError("SumExp needs matching 1-d coefficient arrays")
        if np.any(b <= 0) or not np.all(np.isfinite(a)):
            raise DomainError("SumExp decay rates must be positive")
        a.setflags(write=False)
        b.setflags(write=False)
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "b", b)
        if np.any(a < 0):
            grid = np.linspace(0.0, 50.0 / b.min(), 4001)
            if np.any(self._eval(grid) < -1e-14):
                raise DomainError("SumExp kernel takes negative values")

    @classmethod
    def from_terms(cls, terms: Sequence[tuple]) -> "SumExp":
        terms = list(terms)
        if not terms:
            return cls(np.zeros(0), np.zeros(0))
        a, b = zip(*terms)
        return cls(np.array(a, float), np.array(b, float))

    @property
    def terms(self):
        return list(zip(self.a.tolist(), self.b.tolist()))

    def _eval(self, t):
        t = np.asarray(t, dtype=float)
        if self.a.size == 0:
            return np.zeros_like(t)
        return np.sum(self.a * np.exp(-np.multiply.outer(t, self.b)), axis=-1)

    def tail(self, t):
        return float(np.sum(self.a / self.b * np.exp(-self.b * t)))

    def first_moment(self):
        return float(np.sum(self.a / self.b ** 2))

    @cached_property
    def is_decreasing(self):
        if np.all(self.a >= 0):
            return True
        grid = np.linspace(0.0, 50.0 / self.b.min(), 4001)
        deriv = -np.sum(self.a * self.b * np.exp(-np.multiply.outer(grid, self.b)), axis=-1)
        return bool(np.all(deriv <= 1e-14))

    def laplace(self, theta):
        if np.any(self.b + theta <= 0):
            return math.inf
        return float(np.sum(self.a / (self.b + theta)))

    def laplace_moment(self, theta):
        """Integral of t h(t) e^{-theta t}."""
        return float(np.sum(self.a / (self.b + theta) ** 2))

    def fourier(self, omega):
        return complex(np.sum(self.a / (self.b - 1j * omega)))

    def sample_lags(self, rng, n):
        w = self.a / self.b
        comp = rng.choice(self.a.size, size=n, p=w / w.sum())
        return rng.exponential(1.0, n) / self.b[comp]

    def _nb(self):
        return 0, np.concatenate(([float(self.a.size)], self.a, self.b))


def ExponentialKernel(a: float, b: float) -> SumExp:
    """h(t) = a exp(-b t)."""
    return SumExp(np.array([a], float), np.array([b], float))


@dataclass(frozen=True)
class PowerLaw(Kernel):
    """h(t) = c / (1 + t)^p."""

    c: float
    p: float

    def __post_init__(self):
        if not (self.c >= 0 and self.p > 0):
            raise DomainError("PowerLaw needs c >= 0 and p > 0")

    def _eval(self, t):
        return self.c * (1.0 + np.asarray(t, float)) ** (-self.p)

    def tail(self, t):
        if self.c == 0:
            return 0.0
        if self.p <= 1:
            return math.inf
        return self.c * (1.0 + t) ** (1.0 - self.p) / (self.p - 1.0)

    def first_moment(self):
        if self.c == 0:
            return 0.0
        if self.p <= 2:
            return math.inf
        return self.c / ((self.p - 1.0) * (self.p - 2.0))

    is_decreasing = True

    def laplace(self, theta):
        if theta > 0:
            # c e^theta theta^(p-1) Gamma(1-p, theta), written with the regularised upper gamma when possible
            if self.p < 1:
                return float(self.c * math.exp(theta) * theta ** (self.p - 1)
                             * special.gamma(1 - self.p) * special.gammaincc(1 - self.p, theta))
            return None
        if theta == 0:
            return self.l1_norm
        return math.inf

    def sample_lags(self, rng, n):
        if self.p <= 1:
            raise DomainError("non-integrable PowerLaw has no lag density")
        u = rng.random(n)
        return (1.0 - u) ** (-1.0 / (self.p - 1.0)) - 1.0

    def _nb(self):
        return 1, np.array([self.c, self.p])


@dataclass(frozen=True, eq=False)
class Tabulated(Kernel):
    """Piecewise-linear kernel on ``grid`` (starting at 0).

    Beyond the last grid point the kernel continues as
    h(t_end) (t / t_end)^(-tail_exponent) when ``tail_exponent`` is given.
    Without a tail the support ends at the grid: direct evaluation past it
    raises, while norms and simulation treat the kernel as zero there
    (``truncated`` is then True).
    """

    grid: np.ndarray
    values: np.ndarray
    tail_exponent: Optional[float] = None

    def __post_init__(self):
        g = np.asarray(self.grid, float).ravel().copy()
        v = np.asarray(self.values, float).ravel().copy()
        if g.shape != v.shape or g.size < 2:
            raise DomainError("Tabulated needs at least two (t, h) pairs")
        if g[0] != 0.0:
            raise DomainError("Tabulated grid must start at t=0")
        if np.any(np.diff(g) <= 0):
            raise DomainError("Tabulated grid times must be strictly increasing")
        if np.any(v < 0) or not np.all(np.isfinite(v)):
            raise DomainError("Tabulated values must be finite and nonnegative")
        if self.tail_exponent is not None and not self.tail_exponent > 0:
            raise DomainError("tail exponent must be positive")
        g.setflags(write=False)
        v.setflags(write=False)
        object.__setattr__(self, "grid", g)
        object.__setattr__(self, "values", v)

    @property
    def truncated(self):
        return self.tail_exponent is None

    def _eval(self, t):
        t = np.asarray(t, float)
        end = self.grid[-1]
        if self.tail_exponent is None and np.any(t > end):
            raise OutOfSupportError(f"t beyond tabulated grid end {end} and no tail declared")
        inside = np.interp(np.minimum(t, end), self.grid, self.values)
        if self.tail_exponent is None:
            return inside
        with np.errstate(divide="ignore"):
            tail = self.values[-1] * (np.maximum(t, end) / end) ** (-self.tail_exponent)
        return np.where(t > end, tail, inside)

    def _eval_trunc(self, t):
        t = np.asarray(t, float)
        if self.tail_exponent is not None:
            return self._eval(t)
        return np.where(t > self.grid[-1], 0.0, np.interp(t, self.grid, self.values))

    @cached_property
    def _cum(self):
        seg = 0.5 * np.diff(self.grid) * (self.values[1:] + self.values[:-1])
        return np.concatenate(([0.0], np.cumsum(seg)))

    def _tail_beyond(self, t):
        """Integral over [max(t, t_end), inf) of the declared tail."""
        q, end, hv = self.tail_exponent, self.grid[-1], self.values[-1]
        if q is None or hv == 0:
            return 0.0
        if q <= 1:
            return math.inf
        s = max(t, end)
        return hv * end ** q * s ** (1.0 - q) / (q - 1.0)

    def tail(self, t):
        end = self.grid[-1]
        if t >= end:
            return self._tail_beyond(t)
        hv = float(np.interp(t, self.grid, self.values))
        i = int(np.searchsorted(self.grid, t, side="right"))
        head = 0.5 * (self.grid[i] - t) * (hv + self.values[i])
        return float(head + (self._cum[-1] - self._cum[i]) + self._tail_beyond(end))

    def first_moment(self):
        g, v = self.grid, self.values
        # Simpson is exact for t * (linear) on each segment
        mid = 0.5 * (g[1:] + g[:-1])
        vm = 0.5 * (v[1:] + v[:-1])
        inside = np.sum(np.diff(g) / 6.0 * (g[:-1] * v[:-1] + 4 * mid * vm + g[1:] * v[1:]))
        q, end, hv = self.tail_exponent, g[-1], v[-1]
        if q is None or hv == 0:
            return float(inside)
        if q <= 2:
            return math.inf
        return float(inside + hv * end ** 2 / (q - 2.0))

    @cached_property
    def is_decreasing(self):
        return bool(np.all(np.diff(self.values) <= 0))

    def sample_lags(self, rng, n):
        total = self.l1_norm
        if not np.isfinite(total) or total <= 0:
            raise DomainError("Tabulated kernel has no normalisable lag density")
        u = rng.random(n) * total
        out = np.empty(n)
        inside_mass = self._cum[-1]
        inner = u < inside_mass
        ui = u[inner]
        i = np.clip(np.searchsorted(self._cum, ui, side="right") - 1, 0, self.grid.size - 2)
        g0, dg = self.grid[i], np.diff(self.grid)[i]
        v0, v1 = self.values[i], self.values[i + 1]
        r = ui - self._cum[i]
        slope = (v1 - v0) / dg
        # solve v0 x + slope x^2 / 2 = r on the segment
        with np.errstate(divide="ignore", invalid="ignore"):
            disc = np.sqrt(np.maximum(v0 ** 2 + 2 * slope * r, 0.0))
            x_quad = 2 * r / (v0 + disc)
        out[inner] = g0 + np.clip(np.where(np.isfinite(x_quad), x_quad, 0.0), 0.0, dg)
        if np.any(~inner):
            # Pareto-type tail: mass beyond s is hv end^q s^(1-q) / (q-1)
            q, end, hv = self.tail_exponent, self.grid[-1], self.values[-1]
            rem = total - u[~inner]
            out[~inner] = (rem * (q - 1.0) / (hv * end ** q)) ** (1.0 / (1.0 - q))
        return out

    def _nb(self):
        q = -1.0 if self.tail_exponent is None else float(self.tail_exponent)
        return 2, np.concatenate(([float(self.grid.size), q], self.grid, self.values))


# ---------------------------------------------------------------------------
# rate functions


class RateFn:
    """Nondecreasing intensity map z -> lambda(z) with lambda(0) > 0."""

    def __call__(self, z):
        z_arr = np.asarray(z, dtype=float)
        if np.any(z_arr < 0):
            raise DomainError("rate function evaluated at negative z")
        out = self._eval(z_arr)
        return float(out) if np.ndim(out) == 0 else out

    @property
    def lipschitz_constant(self) -> Optional[float]:
        return None

    @property
    def explosive(self) -> bool:
        """Whether sum_n 1/lambda(n) converges (decided per family)."""
        return False

    def _check(self):
        if not (self._eval(np.asarray(0.0)) > 0):
            raise DomainError(f"{self!r}: lambda(0) must be positive")


@dataclass(frozen=True)
class Linear(RateFn):
    nu: float

    def __post_init__(self):
        if not self.nu >= 0:
            raise DomainError("base intensity must be nonnegative")

    def _eval(self, z):
        return self.nu + z

    asymptotic_slope = 1.0
    lipschitz_constant = 1.0

    def _nb(self):
        return 0, np.array([self.nu, 1.0, 0.0])


@dataclass(frozen=True)
class ScaledLinear(RateFn):
    alpha: float
    nu: float

    def __post_init__(self):
        if not (self.alpha >= 0 and self.nu >= 0):
            raise DomainError("ScaledLinear needs alpha >= 0 and nu >= 0")

    def _eval(self, z):
        return self.nu + self.alpha * z

    @property
    def asymptotic_slope(self):
        return self.alpha

    @property
    def lipschitz_constant(self):
        return self.alpha

    def _nb(self):
        return 0, np.array([self.nu, self.alpha, 0.0])


@dataclass(frozen=True)
class Power(RateFn):
    """lambda(z) = gamma z^k + delta."""

    gamma: float
    k: float
    delta: float

    def __post_init__(self):
        if not (self.gamma > 0 and self.k > 0 and self.delta > 0):
            raise DomainError("Power needs gamma, k, delta > 0")

    def _eval(self, z):
        return self.gamma * np.asarray(z, float) ** self.k + self.delta

    @property
    def asymptotic_slope(self):
        return 0.0 if self.k < 1 else (self.gamma if self.k == 1 else math.inf)

    @property
    def lipschitz_constant(self):
        return self.gamma if self.k == 1 else None

    @property
    def explosive(self):
        return self.k > 1

    def _nb(self):
        return 1, np.array([self.gamma, self.k, self.delta])


@dataclass(frozen=True)
class SubPower(RateFn):
    """lambda(z) = gamma (c + z)^beta with 0 < beta < 1."""

    gamma: float
    beta: float
    c: float

    def __post_init__(self):
        if not (self.gamma > 0 and 0 < self.beta < 1 and self.c > 0):
            raise DomainError("SubPower needs gamma > 0, 0 < beta < 1, c > 0")

    def _eval(self, z):
        return self.gamma * (self.c + np.asarray(z, float)) ** self.beta

    asymptotic_slope = 0.0

    @property
    def lipschitz_constant(self):
        return self.gamma * self.beta * self.c ** (self.beta - 1.0)

    def _nb(self):
        return 2, np.array([self.gamma, self.beta, self.c])


@dataclass(frozen=True)
class ShiftedPower(RateFn):
    """lambda(z) = gamma (c + z)^k for any k > 0; k > 1 is explosive."""

    gamma: float
    c: float
    k: float

    def __post_init__(self):
        if not (self.gamma > 0 and self.c > 0 and self.k > 0):
            raise DomainError("ShiftedPower needs gamma, c, k > 0")

    def _eval(self, z):
        return self.gamma * (self.c + np.asarray(z, float)) ** self.k

    @property
    def asymptotic_slope(self):
        return 0.0 if self.k < 1 else (self.gamma if self.k == 1 else math.inf)

    @property
    def lipschitz_constant(self):
        return self.gamma * self.k * self.c ** (self.k - 1.0) if self.k <= 1 else None

    @property
    def explosive(self):
        return self.k > 1

    def _nb(self):
        return 2, np.array([self.gamma, self.k, self.c])


@dataclass(frozen=True)
class LogRate(RateFn):
    """lambda(z) = log(c + z) with c > 1."""

    c: float

    def __post_init__(self):
        if not self.c > 1:
            raise DomainError("LogRate needs c > 1")

    def _eval(self, z):
        return np.log(self.c + np.asarray(z, float))

    asymptotic_slope = 0.0

    @property
    def lipschitz_constant(self):
        return 1.0 / self.c

    def _nb(self):
        return 3, np.array([self.c, 0.0, 0.0])


# ---------------------------------------------------------------------------
# marks


@dataclass(frozen=True)
class MarkModel:
    """Marked kernel h(t, a) = a g(t) with marks a drawn from ``scale_law``.

    ``claim_law`` optionally attaches claim sizes for the risk model.
    """

    base: Kernel
    scale_law: Distribution
    claim_law: Optional[Distribution] = None

    def __post_init__(self):
        g1 = self.base.l1_norm
        if not (np.isfinite(g1) and g1 > 0):
            raise DomainError("mark base kernel needs a finite positive L1 norm")

    @classmethod
    def deterministic(cls, a0: float, base: Kernel | None = None, claim_law=None):
        return cls(base or ExponentialKernel(1.0, 1.0), Point(a0), claim_law)

    @classmethod
    def exponential_h(cls, rate: float, base: Kernel | None = None, claim_law=None):
        """Marks chosen so that H(a) is Exponential(rate)."""
        base = base or ExponentialKernel(1.0, 1.0)
        return cls(base, Exponential(rate * base.l1_norm), claim_law)

    @classmethod
    def scaled_base(cls, base: Kernel, scale_law: Distribution, claim_law=None):
        return cls(base, scale_law, claim_law)

    @property
    def h_law(self) -> Distribution:
        """Law of H(a) = integral of h(t, a) over t."""
        return self.scale_law.scaled(self.base.l1_norm)

    def H(self, a):
        return np.asarray(a, float) * self.base.l1_norm

    @property
    def mean_h(self) -> float:
        return self.scale_law.mean * self.base.l1_norm

    @property
    def var_h(self) -> float:
        return self.scale_law.var * self.base.l1_norm ** 2


# ---------------------------------------------------------------------------
# event streams and state


@dataclass(frozen=True, eq=False)
class EventStream:
    """Strictly increasing event times in [0, horizon), optional marks."""

    times: np.ndarray
    horizon: float
    marks: Optional[np.ndarray] = None
    seed: Optional[int] = None
    truncated: bool = False

    def __post_init__(self):
        t = np.asarray(self.times, dtype=float).ravel().copy()
        if not np.isfinite(self.horizon) or self.horizon < 0:
            raise DomainError("horizon must be finite and nonnegative")
        if t.size:
            if np.any(np.diff(t) <= 0):
                raise DomainError("event times must be strictly increasing")
            if t[0] < 0 or t[-1] >= self.horizon:
                raise DomainError("event times must lie in [0, horizon)")
        t.setflags(write=False)
        object.__setattr__(self, "times", t)
        if self.marks is not None:
            m = np.asarray(self.marks, dtype=float).ravel().copy()
            if m.shape != t.shape:
                raise DomainError("marks must match times in length")
            m.setflags(write=False)
            object.__setattr__(self, "marks", m)

    def __len__(self):
        return self.times.size

    @property
    def n_events(self) -> int:
        return self.times.size

    def count(self, t) -> np.ndarray:
        """N(0, t] for each t."""
        return np.searchsorted(self.times, t, side="right")

    def to_csv(self) -> str:
        buf = io.StringIO()
        if self.marks is None:
            buf.write("time\n")
            for x in self.times:
                buf.write(f"{x:.17g}\n")
        else:
            buf.write("time,mark\n")
            for x, m in zip(self.times, self.marks):
                buf.write(f"{x:.17g},{m:.17g}\n")
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str, horizon: float | None = None) -> "EventStream":
        rows = list(csv.reader(io.StringIO(text)))
        if not rows or rows[0][0].strip() != "time":
            raise ConfigError("event CSV must start with a 'time' header")
        header = [h.strip() for h in rows[0]]
        body = [r for r in rows[1:] if r]
        times = np.array([float(r[0]) for r in body])
        marks = None
        if header == ["time", "mark"]:
            marks = np.array([float(r[1]) for r in body])
        elif header != ["time"]:
            raise ConfigError(f"unexpected CSV header {header}")
        if horizon is None:
            horizon = float(np.nextafter(times[-1], np.inf)) if times.size else 0.0
        return cls(times, horizon, marks)


class MarkovState:
    """Mutable sum-of-exponentials state z_i(t) = sum_j a_i e^{-b_i (t - tau_j)}."""

    def __init__(self, a, b, z=None, t: float = 0.0):
        self.a = np.asarray(a, float).copy()
        self.b = np.asarray(b, float).copy()
        self.z = np.zeros_like(self.a) if z is None else np.asarray(z, float).copy()
        self.t = float(t)
        if np.any(np.sign(self.z) * np.sign(self.a) < 0):
            raise DomainError("each component must share the sign of its jump size")

    @classmethod
    def for_kernel(cls, k: SumExp) -> "MarkovState":
        return cls(k.a, k.b)

    @property
    def components(self):
        return list(zip(self.z.tolist(), self.a.tolist(), self.b.tolist()))

    @property
    def total(self) -> float:
        return float(self.z.sum())

    def decay(self, dt: float) -> None:
        if dt < 0:
            raise DomainError("cannot decay backwards in time")
        self.z *= np.exp(-self.b * dt)
        self.t += dt

    def jump(self, mark: float = 1.0) -> None:
        self.z += mark * self.a


# ---------------------------------------------------------------------------
# Monte Carlo summaries


@dataclass(frozen=True)
class MonteCarloSummary:
    estimate: float
    std_error: float
    ci_half_width: float
    n_replicas: int
    seed: int
    elapsed: float = field(default=0.0, compare=False)

    @classmethod
    def from_values(cls, values, seed: int, elapsed: float = 0.0) -> "MonteCarloSummary":
        v = np.asarray(values, dtype=float)
        n = v.size
        est = float(np.mean(v)) if n else math.nan
        se = float(np.std(v, ddof=1) / math.sqrt(n)) if n > 1 else math.nan
        return cls(est, se, 1.96 * se, n, int(seed), elapsed)

    def z_score(self, theory: float) -> float:
        return (self.estimate - theory) / self.std_error if self.std_error > 0 else math.inf

    def as_dict(self):
        return {
            "estimate": self.estimate,
            "std_error": self.std_error,
            "ci_half_width": self.ci_half_width,
            "n_replicas": self.n_replicas,
            "seed": self.seed,
            "elapsed": self.elapsed,
        }


class Stopwatch:
    def __enter__(self):
        self.start = time.perf_counter()
        return self

    def __exit__(self, *exc):
        self.elapsed = time.perf_counter() - self.start
        return False
