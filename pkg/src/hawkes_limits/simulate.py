"""Exact samplers for (marked, nonlinear) Hawkes event streams.

Four constructions are provided:

* ``simulate_thinning``: thinning through a Poisson embedding, valid for any
  decreasing kernel and nondecreasing rate;
* ``simulate_markov``: state-based simulation for sums of exponentials;
* ``simulate_cluster``: immigration-birth construction for linear rates;
* ``simulate_tilted``: state-based simulation under a changed intensity,
  returning the log likelihood ratio.

``sample_explosion_time`` draws explosion times for explosive rates.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Optional

import numpy as np
from scipy import integrate

from . import _engine
from .core import (
    DomainError,
    EventStream,
    Kernel,
    Linear,
    MarkModel,
    Point,
    RateFn,
    RegimeError,
    ScaledLinear,
    SumExp,
    Tabulated,
    replica_key,
    replica_rng,
)

METHODS = ("thinning", "markov", "cluster", "auto")


@dataclass(frozen=True)
class SimConfig:
    """Simulation request.

    With ``marks`` the kernel is h(t, a) = a * kernel(t); ``kernel`` may be
    omitted and is then taken from ``marks.base``.
    """

    rate: RateFn
    kernel: Optional[Kernel] = None
    horizon: float = 1.0
    marks: Optional[MarkModel] = None
    seed: int = 0
    max_events: int = 10_000_000
    method: str = "auto"
    band_width: float = 1.0

    def __post_init__(self):
        if self.kernel is None:
            if self.marks is None:
                raise DomainError("a kernel or a mark model is required")
            object.__setattr__(self, "kernel", self.marks.base)
        elif self.marks is not None and self.marks.base is not self.kernel:
            object.__setattr__(self, "marks", replace(self.marks, base=self.kernel))
        if not (np.isfinite(self.horizon) and self.horizon >= 0):
            raise DomainError("horizon must be finite and nonnegative")
        if self.method not in METHODS:
            raise DomainError(f"unknown method {self.method!r}")
        if self.max_events < 1:
            raise DomainError("max_events must be positive")
        if not self.band_width > 0:
            raise DomainError("band_width must be positive")
        if self.method == "markov" and not isinstance(self.kernel, SumExp):
            raise DomainError("the state-based method needs a sum-of-exponentials kernel")
        if self.method == "cluster":
            _cluster_params(self)

    @property
    def mark_law(self):
        return self.marks.scale_law if self.marks is not None else Point(1.0)

    @property
    def branching_ratio(self) -> float:
        alpha = _linear_slope(self.rate)
        if alpha is None:
            return math.nan
        return alpha * self.kernel.l1_norm * self.mark_law.mean


def _linear_slope(rate):
    if isinstance(rate, Linear):
        return 1.0
    if isinstance(rate, ScaledLinear):
        return rate.alpha
    return None


def _cluster_params(cfg: SimConfig, allow_critical=False):
    alpha = _linear_slope(cfg.rate)
    if alpha is None:
        raise DomainError("the cluster construction needs a linear rate")
    br = alpha * cfg.kernel.l1_norm * cfg.mark_law.mean
    if not allow_critical and not br < 1:
        raise RegimeError(f"branching mean {br:.6g} >= 1: cluster construction rejected")
    return alpha, br


def _law_nb(law):
    code, p0, p1, vals, cdf = law._nb()
    return code, float(p0), float(p1), np.asarray(vals, float), np.asarray(cdf, float)


def _rate_nb(rate):
    code, p = rate._nb()
    return code, np.asarray(p, float)


def _window(cfg: SimConfig) -> float:
    """Memory window: the neglected kernel tail stays below 1e-12 lambda(0)."""
    k = cfg.kernel
    if isinstance(k, Tabulated) and k.truncated:
        return float(k.grid[-1])
    lam0 = max(float(cfg.rate(0.0)), 1e-300)
    target = 1e-12 * lam0 / max(cfg.mark_law.mean, 1e-300)
    if not np.isfinite(k.l1_norm):
        return cfg.horizon
    w = 1.0
    while k.tail(w) > target and w < cfg.horizon:
        w *= 2.0
    return min(w, cfg.horizon)


def _stream(times, marks, cfg, truncated, seed):
    mk = marks if cfg.marks is not None else None
    return EventStream(times, cfg.horizon, mk, seed=seed, truncated=bool(truncated))


# ---------------------------------------------------------------------------
# thinning


def thinning_raw(cfg: SimConfig, key: int, rng):
    """Run the embedding sampler; returns (times, marks, truncated)."""
    if not getattr(cfg.kernel, "is_decreasing", False):
        raise DomainError("thinning needs a decreasing kernel")
    rc, rp = _rate_nb(cfg.rate)
    kc, kp = cfg.kernel._nb()
    mc, m0, m1, mv, mcdf = _law_nb(cfg.mark_law)
    times, marks, _, trunc = _engine.embed_run(
        rc, rp, kc, np.asarray(kp, float), _window(cfg), mc, m0, m1, mv, mcdf,
        float(cfg.horizon), int(cfg.max_events), float(cfg.band_width), np.uint64(key), rng)
    return times, marks, trunc


def simulate_thinning(cfg: SimConfig, replica: int = 0) -> EventStream:
    """Thinning sampler.

    Candidates are the points of a planar unit-rate Poisson process; a point
    (s, y) becomes an event when y < lambda(Z_s).  Only the bands below the
    bound lambda(Z at the latest candidate) are scanned, which is valid
    because Z decays between events and lambda is nondecreasing.  Runs with
    the same seed share the planar process, so intensities that are pointwise
    larger produce supersets of events.
    """
    times, marks, trunc = thinning_raw(cfg, replica_key(cfg.seed, replica), replica_rng(cfg.seed, replica))
    return _stream(times, marks, cfg, trunc, cfg.seed)


# ---------------------------------------------------------------------------
# state-based


def markov_raw(cfg: SimConfig, rng, checkpoints=None, store=True, tilt_rate=None, shift=0.0):
    k = cfg.kernel
    if not isinstance(k, SumExp):
        raise DomainError("the state-based method needs a sum-of-exponentials kernel")
    rc, rp = _rate_nb(cfg.rate)
    if tilt_rate is None:
        tc, tp, tilt = rc, rp, False
    else:
        tc, tp = _rate_nb(tilt_rate)
        tilt = True
    mc, m0, m1, mv, mcdf = _law_nb(cfg.mark_law)
    ck = np.zeros(0) if checkpoints is None else np.ascontiguousarray(checkpoints, float)
    return _engine.markov_run(
        rc, rp, np.ascontiguousarray(k.a), np.ascontiguousarray(k.b), mc, m0, m1, mv, mcdf,
        float(cfg.horizon), int(cfg.max_events), ck, bool(store), tilt, tc, tp, float(shift), rng)


def simulate_markov(cfg: SimConfig, replica: int = 0) -> EventStream:
    """Exact state-based sampler for h(t) = sum a_i e^{-b_i t}.

    Between events each component decays by e^{-b_i dt}; candidates are drawn
    at the current-state bound lambda(sum z_i).
    """
    times, marks, _, trunc, *_ = markov_raw(cfg, replica_rng(cfg.seed, replica))
    return _stream(times, marks, cfg, trunc, cfg.seed)


def simulate_tilted(cfg: SimConfig, tilt_rate: RateFn, replica: int = 0):
    """Simulate under ``tilt_rate`` and return (stream, log dP/dP_hat)."""
    if not float(tilt_rate(0.0)) > 0:
        raise DomainError("tilted rate must be strictly positive")
    times, marks, _, trunc, _, _, logw = markov_raw(cfg, replica_rng(cfg.seed, replica), tilt_rate=tilt_rate)
    if not np.isfinite(logw):
        raise DomainError("likelihood ratio blew up: the original intensity vanished at an event")
    return _stream(times, marks, cfg, trunc, cfg.seed), float(logw)


# ---------------------------------------------------------------------------
# cluster


def cluster_raw(cfg: SimConfig, rng, allow_critical=False):
    """Immigration-birth sampler, generation by generation.

    With ``allow_critical`` the branching mean may reach or exceed one; the
    horizon truncation then keeps the forest finite.
    """
    alpha, _ = _cluster_params(cfg, allow_critical)
    T = float(cfg.horizon)
    nu = float(cfg.rate.nu)
    law = cfg.mark_law
    g = cfg.kernel
    g1 = g.l1_norm
    n_imm = rng.poisson(nu * T) if nu > 0 and T > 0 else 0
    gen_t = rng.random(n_imm) * T
    gen_m = law.sample(rng, n_imm)
    out_t, out_m = [gen_t], [gen_m]
    total = n_imm
    truncated = False
    # explicit generation queue, no recursion
    while gen_t.size:
        kids = rng.poisson(alpha * gen_m * g1)
        parents = np.repeat(gen_t, kids)
        child = parents + g.sample_lags(rng, parents.size)
        child = child[child < T]
        gen_t = child
        gen_m = law.sample(rng, child.size)
        out_t.append(gen_t)
        out_m.append(gen_m)
        total += child.size
        if total >= cfg.max_events:
            truncated = True
            break
    times = np.concatenate(out_t)
    marks = np.concatenate(out_m)
    order = np.argsort(times, kind="stable")
    times, marks = times[order], marks[order]
    if truncated:
        times, marks = times[: cfg.max_events], marks[: cfg.max_events]
    # ties have probability zero but floating point can produce them
    if times.size > 1:
        dup = np.flatnonzero(np.diff(times) <= 0)
        for i in dup:
            times[i + 1] = np.nextafter(times[i], np.inf)
    return times, marks, truncated


def simulate_cluster(cfg: SimConfig, replica: int = 0) -> EventStream:
    """Poisson forest of immigrants and their offspring, subcritical only."""
    times, marks, trunc = cluster_raw(cfg, replica_rng(cfg.seed, replica))
    return _stream(times, marks, cfg, trunc, cfg.seed)


def simulate(cfg: SimConfig, replica: int = 0) -> EventStream:
    method = cfg.method
    if method == "auto":
        method = "markov" if isinstance(cfg.kernel, SumExp) else "thinning"
    return {"thinning": simulate_thinning, "markov": simulate_markov,
            "cluster": simulate_cluster}[method](cfg, replica)


# ---------------------------------------------------------------------------
# explosion


@dataclass(frozen=True)
class ExplosionSample:
    time: float
    censored: bool
    log_weight: float
    n_events: int


def _tilt_term(q):
    """q / (1 + q) - log(1 + q), with a series where it cancels."""
    if q < 1e-3:
        return q * q * (-0.5 + q * (2.0 / 3.0 + q * (-0.75 + q * 0.8)))
    return q / (1.0 + q) - math.log1p(q)


def _remainder(rate: RateFn, h0: float, z: float, shift: float = 0.0, n_direct: int = 4000,
               with_weight: bool = True):
    """Expected remaining time and weight correction once Z is large.

    Past the stopping level the path is a pure birth chain with rates
    lambda(z + n h0) (+ shift under the tilt); decay is negligible over the
    remaining time.  Returns (mean remaining time, log-weight increment).
    """
    n = np.arange(n_direct, dtype=float)
    lam = rate(z + n * h0)
    time = np.sum(1.0 / (lam + shift))
    corr = sum(_tilt_term(q) for q in shift / lam) if shift and with_weight else 0.0
    x0 = n_direct - 0.5
    # log substitution x = x0 e^u: the integrands then decay like e^{-(k-1)u}
    k = float(getattr(rate, "k", 2.0))
    u_max = min(700.0, 40.0 / max(k - 1.0, 0.05))

    def f_time(u):
        x = x0 * math.exp(u)
        return x / (float(rate(z + x * h0)) + shift)

    time += integrate.quad(f_time, 0.0, u_max, epsabs=0.0, epsrel=1e-10, limit=400)[0]
    if shift and with_weight:
        def f_corr(u):
            x = x0 * math.exp(u)
            return x * _tilt_term(shift / float(rate(z + x * h0)))
        corr += integrate.quad(f_corr, 0.0, u_max, epsabs=0.0, epsrel=1e-10, limit=400)[0]
    return float(time), float(corr)


def explosion_threshold(rate: RateFn, h0: float, tol: float, shift: float = 0.0) -> float:
    """Smallest (dyadically bracketed) Z whose remaining expected time is below ``tol``."""
    lo, hi = 0.0, 1.0
    while _remainder(rate, h0, hi, shift, with_weight=False)[0] > tol:
        lo, hi = hi, 2.0 * hi
        if hi > 1e15:
            raise DomainError("cannot reach the explosion tolerance")
    for _ in range(60):
        mid = 0.5 * (lo + hi)
        if _remainder(rate, h0, mid, shift, with_weight=False)[0] > tol:
            lo = mid
        else:
            hi = mid
        if hi - lo < 1e-6 * hi:
            break
    return hi


def _explosion_check(r: RateFn, k: Kernel):
    if not r.explosive:
        raise RegimeError(f"{r!r} is not explosive: sum of 1/lambda(n) diverges")
    if not isinstance(k, SumExp):
        raise DomainError("explosion sampling needs a sum-of-exponentials kernel")
    if not np.all(k.a >= 0) or k.h0 <= 0:
        raise DomainError("explosion sampling needs positive jump sizes")


@dataclass(frozen=True)
class ExplosionTable:
    """Stopping level and tabulated remainder (mean time, weight) on [z_stop, z_stop + h0]."""

    z_stop: float
    z_grid: np.ndarray
    remainder: np.ndarray
    shift: float


def explosion_table(r: RateFn, k: Kernel, tol: float = 1e-6, shift: float = 0.0) -> ExplosionTable:
    _explosion_check(r, k)
    h0 = k.h0
    z_stop = explosion_threshold(r, h0, tol, shift)
    zg = z_stop + h0 * np.linspace(0.0, 1.0, 65)
    return ExplosionTable(z_stop, zg, np.array([_remainder(r, h0, zz, shift) for zz in zg]), float(shift))


def explosion_samples(r: RateFn, k: Kernel, n: int, cap: float, seed: int = 0,
                      tol: float = 1e-6, shift: float = 0.0, first_replica: int = 0,
                      table: Optional[ExplosionTable] = None):
    """Draw ``n`` explosion times (optionally under an additive tilt ``shift``).

    The chain is simulated exactly until the remaining expected time
    sum_{m>=0} 1/lambda(Z + m h(0)) drops below ``tol``; that remainder is
    then added as its mean.  Returns arrays (time, censored, log_weight,
    n_events); log_weight is log dP/dP_hat (zero without tilt).  A
    precomputed ``table`` (same ``shift``) skips the setup.
    """
    _explosion_check(r, k)
    h0 = k.h0
    rc, rp = _rate_nb(r)
    if table is None:
        table = explosion_table(r, k, tol, shift)
    elif table.shift != shift:
        raise DomainError("explosion table was built for a different tilt")
    z_stop, zg, rem_tab = table.z_stop, table.z_grid, table.remainder
    ka, kb = np.ascontiguousarray(k.a), np.ascontiguousarray(k.b)
    times = np.empty(n)
    cens = np.zeros(n, dtype=bool)
    logw = np.zeros(n)
    counts = np.zeros(n, dtype=np.int64)
    for i in range(n):
        rng = replica_rng(seed, first_replica + i)
        if cap <= 0:
            times[i], cens[i] = 0.0, True
            continue
        t, z, m, reached, lw = _engine.explode_run(rc, rp, ka, kb, z_stop, float(cap), float(shift), rng)
        counts[i] = m
        if reached:
            if z <= zg[-1]:
                rem = np.interp(z, zg, rem_tab[:, 0])
                corr = np.interp(z, zg, rem_tab[:, 1])
            else:
                rem, corr = _remainder(r, h0, z, shift)
            t += rem
            lw += corr
        if not reached or t >= cap:
            times[i], cens[i] = cap, True
        else:
            times[i] = t
        logw[i] = lw
    return times, cens, logw, counts


def sample_explosion_time(r: RateFn, k: Kernel, cap: float, seed: int = 0, replica: int = 0,
                          tol: float = 1e-6) -> ExplosionSample:
    """One explosion time; censored at ``cap``."""
    t, c, lw, m = explosion_samples(r, k, 1, cap, seed, tol, first_replica=replica)
    return ExplosionSample(float(t[0]), bool(c[0]), float(lw[0]), int(m[0]))
