"""Maximum-likelihood calibration of exponential-kernel Hawkes processes.

The intensity is lambda_t = nu + sum_{tau_i < t} a e^{-b (t - tau_i)} and the
log-likelihood over [start, T] is sum log lambda_{tau_i} - int lambda_s ds.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import optimize

from . import _engine
from .core import DomainError, EventStream

MIN_EVENTS = 10


def _check_params(nu, a, b):
    if not (nu > 0 and a > 0 and b > 0):
        raise DomainError(f"likelihood parameters must be positive, got nu={nu}, a={a}, b={b}")


def _prepare(stream: EventStream, start: float):
    times = np.ascontiguousarray(stream.times, float)
    if start:
        if times.size and times[0] < start:
            raise DomainError("events before the start of the observation window")
        times = times - start
    return times, float(stream.horizon) - start


def loglik_exp(stream: EventStream, nu: float, a: float, b: float, start: float = 0.0) -> float:
    """Exact O(n) log-likelihood on the window [start, horizon].

    ``a = 0`` is accepted as the Poisson boundary case; every other
    nonpositive parameter raises DomainError.
    """
    if a == 0 and nu > 0 and b > 0:
        n = stream.n_events
        return n * math.log(nu) - nu * (stream.horizon - start)
    _check_params(nu, a, b)
    times, T = _prepare(stream, start)
    return float(_engine.exp_loglik(times, T, float(nu), float(a), float(b))[0])


def loglik_exp_grad(stream: EventStream, nu: float, a: float, b: float, start: float = 0.0) -> np.ndarray:
    """Analytic partial derivatives (d/dnu, d/da, d/db)."""
    _check_params(nu, a, b)
    times, T = _prepare(stream, start)
    _, gn, ga, gb = _engine.exp_loglik(times, T, float(nu), float(a), float(b))
    return np.array([gn, ga, gb])


@dataclass(frozen=True)
class FitResult:
    params: tuple
    loglik: float
    n_events: int
    converged: bool
    iterations: int
    init_loglik: float = math.nan

    @property
    def nu(self):
        return self.params[0]

    @property
    def a(self):
        return self.params[1]

    @property
    def b(self):
        return self.params[2]

    def as_dict(self):
        return {"params": {"nu": self.params[0], "a": self.params[1], "b": self.params[2]},
                "loglik": self.loglik, "n_events": self.n_events, "converged": self.converged,
                "iterations": self.iterations, "init_loglik": self.init_loglik}


def default_inits(stream: EventStream):
    """Three deterministic starting points built from the empirical rate."""
    rate = max(stream.n_events / stream.horizon, 1e-12)
    return [(0.5 * rate, 0.5, 1.0), (0.8 * rate, 0.2, 5.0), (0.2 * rate, 2.0, 4.0)]


def fit_exp(stream: EventStream, init=None, fatol: float = 1e-8, max_iter: int = 4000) -> FitResult:
    """Maximise :func:`loglik_exp` by Nelder-Mead over log-parameters.

    ``init`` is one (nu, a, b) triple or a list of them; by default three
    deterministic starts are used and the best converged run is returned.
    """
    n = stream.n_events
    if n < MIN_EVENTS:
        raise DomainError(f"fit_exp needs at least {MIN_EVENTS} events, got {n}")
    if init is None:
        inits = default_inits(stream)
    elif np.ndim(init) == 1:
        inits = [tuple(init)]
    else:
        inits = [tuple(x) for x in init]
    times, T = _prepare(stream, 0.0)

    def negll(x):
        nu, a, b = np.exp(x)
        if not np.all(np.isfinite((nu, a, b))):
            return math.inf
        return -_engine.exp_loglik(times, T, nu, a, b)[0]

    best = None
    iters = 0
    first_ll = math.nan
    for p0 in inits:
        _check_params(*p0)
        x0 = np.log(np.asarray(p0, float))
        ll0 = -negll(x0)
        if math.isnan(first_ll):
            first_ll = ll0
        res = optimize.minimize(negll, x0, method="Nelder-Mead",
                                options={"fatol": fatol, "xatol": 1e-10, "maxiter": max_iter,
                                         "maxfev": 2 * max_iter, "adaptive": True})
        iters += int(res.nit)
        ll = -float(res.fun)
        cand = (bool(res.success), ll, tuple(float(v) for v in np.exp(res.x)), ll0)
        if best is None or (cand[0], cand[1]) > (best[0], best[1]):
            best = cand
    converged, ll, params, ll0 = best
    return FitResult(params, ll, n, converged, iters, ll0)
