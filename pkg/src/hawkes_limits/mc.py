"""Replicated Monte Carlo experiments checked against limit theorems.

Every experiment derives replica r's randomness from (seed, r) only, so the
result does not depend on the number of worker threads.  Reports carry
(estimate, theory, z-score, relative error) for each comparison.
"""
from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Callable, Optional, Sequence

import numpy as np
from scipy import special, stats

from . import analysis, ldp
from .core import (
    DomainError,
    Exponential,
    ExponentialKernel,
    Kernel,
    Linear,
    MonteCarloSummary,
    Point,
    RateFn,
    RegimeError,
    ScaledLinear,
    Stopwatch,
    SumExp,
    replica_key,
    replica_rng,
)
from .simulate import (
    SimConfig,
    _cluster_params,
    _law_nb,
    _linear_slope,
    cluster_raw,
    explosion_samples,
    explosion_table,
    markov_raw,
    thinning_raw,
)
from . import _engine


def n_threads() -> int:
    env = os.environ.get("HAWKES_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            raise DomainError(f"HAWKES_THREADS must be an integer, got {env!r}")
    return os.cpu_count() or 1


def run_replicas(fn: Callable[[int], object], n: int, first: int = 0, threads: Optional[int] = None) -> list:
    """[fn(first), ..., fn(first + n - 1)] in replica order.

    The compiled samplers release the GIL, so threads give real parallelism.
    """
    threads = n_threads() if threads is None else max(1, int(threads))
    idx = range(first, first + n)
    if threads == 1 or n < 2:
        return [fn(r) for r in idx]
    with ThreadPoolExecutor(max_workers=threads) as ex:
        return list(ex.map(fn, idx))


# ---------------------------------------------------------------------------
# report types


@dataclass(frozen=True)
class ExperimentSpec:
    sim: SimConfig
    statistic: str
    replicas: int
    time_points: tuple = ()
    theory_value: Optional[float] = None
    note: str = ""

    def __post_init__(self):
        if self.replicas < 2:
            raise DomainError("an experiment needs at least two replicas")
        tp = np.asarray(self.time_points, float)
        if tp.size > 1 and np.any(np.diff(tp) <= 0):
            raise DomainError("time points must be increasing")


@dataclass(frozen=True)
class Comparison:
    """Estimate against theory.

    ``rule`` selects the pass criterion: ``'rel'`` relative error within
    ``tolerance``, ``'abs'`` absolute error, ``'z'`` |z| <= 3, ``'le'`` / ``'ge'``
    one-sided bounds.
    """

    name: str
    estimate: float
    std_error: float
    theory: float
    tolerance: float
    rule: str = "rel"

    @property
    def z_score(self) -> float:
        if not self.std_error > 0:
            return 0.0 if self.estimate == self.theory else math.inf
        return (self.estimate - self.theory) / self.std_error

    @property
    def rel_error(self) -> float:
        if self.theory == 0:
            return abs(self.estimate)
        return abs(self.estimate - self.theory) / abs(self.theory)

    @property
    def passed(self) -> bool:
        if self.rule == "z":
            return abs(self.z_score) <= 3.0
        if self.rule == "abs":
            return abs(self.estimate - self.theory) <= self.tolerance
        if self.rule == "le":
            return self.estimate <= self.theory + self.tolerance
        if self.rule == "ge":
            return self.estimate >= self.theory - self.tolerance
        return self.rel_error <= self.tolerance

    def as_dict(self):
        return {"name": self.name, "estimate": self.estimate, "std_error": self.std_error,
                "theory": self.theory, "z_score": self.z_score, "rel_error": self.rel_error,
                "tolerance": self.tolerance, "rule": self.rule, "passed": self.passed}


@dataclass
class Report:
    name: str
    comparisons: list = field(default_factory=list)
    summaries: dict = field(default_factory=dict)
    diagnostics: dict = field(default_factory=dict)
    per_replica: dict = field(default_factory=dict)
    elapsed: float = 0.0

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.comparisons)

    def comparison(self, name: str) -> Comparison:
        for c in self.comparisons:
            if c.name == name:
                return c
        raise KeyError(name)

    def as_dict(self):
        return {"experiment": self.name, "passed": self.passed,
                "comparisons": [c.as_dict() for c in self.comparisons],
                "summaries": {k: v.as_dict() for k, v in self.summaries.items()},
                "diagnostics": self.diagnostics, "elapsed": self.elapsed}


def _summary(values, seed, elapsed=0.0):
    return MonteCarloSummary.from_values(values, seed, elapsed)


# ---------------------------------------------------------------------------
# helpers


def branching_law(cfg: SimConfig):
    """Law of the total excitation H carried by one event (linear rates only)."""
    alpha = _linear_slope(cfg.rate)
    if alpha is None:
        raise DomainError("branching law needs a linear rate")
    return cfg.mark_law.scaled(alpha * cfg.kernel.l1_norm) if alpha > 0 else Point(0.0)


def lln_theory(cfg: SimConfig) -> float:
    law = branching_law(cfg)
    if not law.mean < 1:
        raise RegimeError("LLN mean needs a subcritical configuration")
    return cfg.rate.nu / (1.0 - law.mean)


def clt_theory(cfg: SimConfig) -> float:
    law = branching_law(cfg)
    if not law.mean < 1:
        raise RegimeError("CLT variance needs a subcritical configuration")
    return cfg.rate.nu * (1.0 + law.var) / (1.0 - law.mean) ** 3


def count_at_horizon(cfg: SimConfig, replica: int) -> int:
    """N_T for one replica, without storing the stream when possible."""
    method = cfg.method
    if method == "auto":
        method = "markov" if isinstance(cfg.kernel, SumExp) else "thinning"
    rng = replica_rng(cfg.seed, replica)
    if method == "markov":
        out = markov_raw(cfg, rng, store=False)
        return int(out[2])
    if method == "cluster":
        return int(cluster_raw(cfg, rng)[0].size)
    return int(thinning_raw(cfg, replica_key(cfg.seed, replica), rng)[0].size)


def _counts(cfg, replicas, threads=None):
    return np.array(run_replicas(lambda r: count_at_horizon(cfg, r), replicas, threads=threads), dtype=float)


# ---------------------------------------------------------------------------
# LLN / CLT


def lln_experiment(cfg: SimConfig, replicas: int, tol: float = 0.02, threads=None) -> Report:
    """Pooled N_T / T against nu / (1 - E[H])."""
    with Stopwatch() as sw:
        theory = lln_theory(cfg)
        vals = _counts(cfg, replicas, threads) / cfg.horizon
    s = _summary(vals, cfg.seed, sw.elapsed)
    rep = Report("lln", [Comparison("mean_rate", s.estimate, s.std_error, theory, tol)],
                 {"rate": s}, per_replica={"rate": vals}, elapsed=sw.elapsed)
    return rep


def _var_se(x):
    """Sample variance and its delta-method standard error."""
    n = x.size
    s2 = float(np.var(x, ddof=1))
    m4 = float(np.mean((x - x.mean()) ** 4))
    v = (m4 - s2 * s2 * (n - 3) / (n - 1)) / n
    return s2, math.sqrt(max(v, 0.0))


def clt_experiment(cfg: SimConfig, replicas: int, tol: float = 0.10, threads=None) -> Report:
    """Variance of (N_T - mu T) / sqrt(T) against nu (1 + Var H) / (1 - E H)^3.

    Normality is screened by sample skewness and excess kurtosis, each
    within three of their standard errors.
    """
    with Stopwatch() as sw:
        mu = lln_theory(cfg)
        sigma2 = clt_theory(cfg)
        T = cfg.horizon
        x = (_counts(cfg, replicas, threads) - mu * T) / math.sqrt(T)
    n = x.size
    s2, se = _var_se(x)
    skew = float(stats.skew(x))
    kurt = float(stats.kurtosis(x))
    skew_se = math.sqrt(6.0 * n * (n - 1) / ((n - 2) * (n + 1) * (n + 3)))
    kurt_se = 2.0 * skew_se * math.sqrt((n * n - 1) / ((n - 3) * (n + 5)))
    rep = Report("clt", [Comparison("variance", s2, se, sigma2, tol)],
                 {"scaled_count": _summary(x, cfg.seed, sw.elapsed)},
                 {"skewness": skew, "skewness_se": skew_se, "excess_kurtosis": kurt,
                  "kurtosis_se": kurt_se,
                  "normal_screen": bool(abs(skew) <= 3 * skew_se and abs(kurt) <= 3 * kurt_se)},
                 per_replica={"scaled_count": x}, elapsed=sw.elapsed)
    return rep


@dataclass(frozen=True)
class SigmaEstimate:
    sigma2: float
    by_lag: np.ndarray
    plateau_change: float
    mean_count: float


def sigma_empirical(streams, lag_max: int, burn_in: float = 0.0) -> SigmaEstimate:
    """Long-run variance from unit-interval counts.

    ``streams`` is one EventStream or a list of them; autocovariances of the
    counts N[j, j+1] after ``burn_in`` are averaged across streams around the
    pooled mean and summed up to ``lag_max``.  ``by_lag[L]`` is the partial
    sum through lag L and ``plateau_change`` the relative change between
    lag_max // 2 and lag_max.
    """
    if not isinstance(streams, (list, tuple)):
        streams = [streams]
    series = []
    for s in streams:
        start = math.ceil(burn_in)
        end = int(math.floor(s.horizon))
        if end - start < 2:
            continue
        edges = np.arange(start, end + 1, dtype=float)
        series.append(np.diff(np.searchsorted(s.times, edges, side="left")).astype(float))
    if not series:
        raise DomainError("streams too short for unit-interval counts")
    mean = float(np.concatenate(series).mean())
    shortest = min(c.size for c in series)
    if lag_max >= shortest:
        raise DomainError("lag_max must be below the number of unit intervals")
    acov = np.zeros(lag_max + 1)
    weight = np.zeros(lag_max + 1)
    for c in series:
        d = c - mean
        m = d.size
        for L in range(lag_max + 1):
            acov[L] += float(np.dot(d[: m - L], d[L:]))
            weight[L] += m - L
    acov /= weight
    partial = acov[0] + 2.0 * np.concatenate(([0.0], np.cumsum(acov[1:])))
    half = partial[lag_max // 2]
    full = partial[lag_max]
    change = abs(full - half) / abs(full) if full != 0 else math.inf
    return SigmaEstimate(float(full), partial, float(change), mean)


# ---------------------------------------------------------------------------
# critical regime


def critical_experiment(nu: float, kernel: SumExp, T: float, replicas: int, s: float = 1.0,
                        seed: int = 0, tol: float = 0.10, threads=None) -> Report:
    """Moment scaling of a critical linear process with exponential-sum kernel.

    Compares E[N_T]/T^2 with nu/(2m), E[lambda_T]/T with nu/m and the mean of
    N[T, T + s/T] with nu s / m; also reports the variance-to-mean ratio of
    that window count (a negative-binomial marginal is overdispersed).
    """
    if not isinstance(kernel, SumExp):
        raise DomainError("critical_experiment simulates sum-of-exponentials kernels")
    if not math.isclose(kernel.l1_norm, 1.0, rel_tol=1e-12):
        raise RegimeError("critical_experiment needs ||h||_1 = 1")
    m = kernel.first_moment()
    end = T + s / T
    cfg = SimConfig(Linear(nu), kernel, horizon=end, seed=seed, max_events=2 ** 62)
    ck = np.array([T, end])

    def one(r):
        out = markov_raw(cfg, replica_rng(seed, r), checkpoints=ck, store=False)
        n_ck, z_ck = out[4], out[5]
        return n_ck[0], nu + z_ck[0], n_ck[1] - n_ck[0]

    with Stopwatch() as sw:
        res = np.array(run_replicas(one, replicas, threads=threads), dtype=float)
    nT, lam, win = res[:, 0] / T ** 2, res[:, 1] / T, res[:, 2]
    sN, sL, sW = (_summary(v, seed, sw.elapsed) for v in (nT, lam, win))
    vm = float(np.var(win, ddof=1) / np.mean(win)) if np.mean(win) > 0 else math.nan
    comps = [
        Comparison("count_over_T2", sN.estimate, sN.std_error, nu / (2 * m), tol),
        Comparison("intensity_over_T", sL.estimate, sL.std_error, nu / m, tol),
        Comparison("window_mean", sW.estimate, sW.std_error, nu * s / m, tol),
    ]
    return Report("critical", comps, {"count_over_T2": sN, "intensity_over_T": sL, "window_count": sW},
                  {"variance_over_mean": vm, "overdispersed": bool(vm > 1.2), "m": m},
                  {"count_over_T2": nT, "intensity_over_T": lam, "window_count": win}, sw.elapsed)


def heavy_critical_experiment(nu: float, kernel: Kernel, alpha: float, T: float, replicas: int,
                              seed: int = 0, tol: float = 0.15, slope_tol: float = 0.05,
                              n_slope: int = 4, threads=None) -> Report:
    """Critical linear process whose kernel tail integral decays like t^{-alpha}.

    Compares N_T / T^{1+alpha} with nu / (Gamma(1-alpha) Gamma(2+alpha)) and
    lambda_T / T^alpha with nu sin(pi alpha) / (pi alpha), and regresses log
    E[N_t] on log t over a geometric grid ending at T (slope 1 + alpha).
    The constants presume H(t) ~ t^{-alpha} exactly, so the kernel should
    satisfy int_t^inf h = (1 + t)^{-alpha}.
    """
    if not 0 < alpha < 1:
        raise DomainError("heavy-tail exponent must lie in (0, 1)")
    if not math.isclose(kernel.l1_norm, 1.0, rel_tol=1e-9):
        raise RegimeError("heavy_critical_experiment needs ||h||_1 = 1")
    cfg = SimConfig(Linear(nu), kernel, horizon=T, seed=seed, max_events=2 ** 62)
    grid = T * np.geomspace(1.0 / 2 ** (n_slope - 1), 1.0, n_slope)

    def one(r):
        times, _, _ = cluster_raw(cfg, replica_rng(seed, r), allow_critical=True)
        counts = np.searchsorted(times, grid, side="left")
        lam = nu + float(np.sum(kernel(T - times)))
        return np.concatenate((counts, [lam]))

    with Stopwatch() as sw:
        res = np.array(run_replicas(one, replicas, threads=threads), dtype=float)
    nT = res[:, n_slope - 1] / T ** (1 + alpha)
    lam = res[:, -1] / T ** alpha
    c_n = nu / (special.gamma(1 - alpha) * special.gamma(2 + alpha))
    c_l = nu * math.sin(math.pi * alpha) / (math.pi * alpha)
    means = res[:, :n_slope].mean(axis=0)
    slope, _ = np.polyfit(np.log(grid), np.log(means), 1)
    # standard error of the slope from replica-level jackknife-free bootstrap proxy
    sN, sL = _summary(nT, seed, sw.elapsed), _summary(lam, seed, sw.elapsed)
    comps = [
        Comparison("count_scaled", sN.estimate, sN.std_error, c_n, tol),
        Comparison("intensity_scaled", sL.estimate, sL.std_error, c_l, tol),
        Comparison("loglog_slope", float(slope), math.nan, 1 + alpha, slope_tol, rule="abs"),
    ]
    return Report("heavy_critical", comps, {"count_scaled": sN, "intensity_scaled": sL},
                  {"slope_grid": grid.tolist(), "mean_counts": means.tolist()},
                  {"count_scaled": nT, "intensity_scaled": lam}, sw.elapsed)


# ---------------------------------------------------------------------------
# super-critical regime


def supercritical_experiment(nu: float, kernel: SumExp, T: float, replicas: int, seed: int = 0,
                             n_grid: int = 41, slope_tol: float = 0.02, tol: float = 0.10,
                             threads=None) -> Report:
    """Malthusian growth of E[lambda_t] and the limit of E[lambda_T e^{-theta T}].

    The growth exponent is the least-squares slope of log of the replica
    mean of lambda_t over the second half of [0, T].
    """
    if not isinstance(kernel, SumExp):
        raise DomainError("supercritical_experiment simulates sum-of-exponentials kernels")
    if not kernel.l1_norm > 1:
        raise RegimeError("supercritical_experiment needs ||h||_1 > 1")
    theta = analysis.malthusian(kernel)
    mbar = float(np.sum(kernel.a / (kernel.b + theta) ** 2))
    cfg = SimConfig(Linear(nu), kernel, horizon=T, seed=seed, max_events=2 ** 62)
    grid = np.linspace(0.0, T, n_grid)
    grid[-1] = np.nextafter(T, 0.0)

    def one(r):
        out = markov_raw(cfg, replica_rng(seed, r), checkpoints=grid, store=False)
        return nu + out[5]

    with Stopwatch() as sw:
        lam = np.array(run_replicas(one, replicas, threads=threads))
    mean = lam.mean(axis=0)
    late = grid >= T / 2
    slope, _ = np.polyfit(grid[late], np.log(mean[late]), 1)
    w = lam[:, -1] * math.exp(-theta * T)
    sW = _summary(w, seed, sw.elapsed)
    comps = [
        Comparison("growth_exponent", float(slope), math.nan, theta, slope_tol),
        Comparison("scaled_intensity", sW.estimate, sW.std_error, nu / (theta * mbar), tol),
    ]
    return Report("supercritical", comps, {"scaled_intensity": sW},
                  {"theta": theta, "mbar": mbar, "grid": grid.tolist(), "mean_intensity": mean.tolist()},
                  {"scaled_intensity": w}, sw.elapsed)


# ---------------------------------------------------------------------------
# explosion


def small_time_shift(r: RateFn, k: SumExp, eps: float) -> float:
    """Additive tilt sigma = (|C_k| / (k eps))^{k/(k-1)} aimed at explosion by ``eps``."""
    kk = r.k
    st = ldp.explosion_small_time(r.gamma, kk, getattr(r, "delta", 0.0), k.h0)
    return (st.abs_c_k / (kk * eps)) ** (kk / (kk - 1.0))


def explosion_experiment(r: RateFn, k: SumExp, eps_grid: Sequence[float], n_small: int,
                         t_grid: Sequence[float], n_large: int, seed: int = 0,
                         slope_tol: float = 0.20, tol: float = 1e-4, threads=None) -> Report:
    """Small- and large-time behaviour of the explosion time tau.

    P(tau <= eps) is exponentially small, so it is estimated by importance
    sampling under lambda + sigma(eps) (see :func:`small_time_shift`); the
    slope of log|log P(tau <= eps)| against log(1/eps) is compared with
    1/(k-1).  Large times use plain samples censored at max(t_grid) and
    check -(1/t) log P(tau >= t) <= lambda(0).  ``tol`` is the expected
    remaining time at which paths stop and the remainder mean is added.
    """
    kk = getattr(r, "k", None)
    if kk is None or not r.explosive:
        raise RegimeError("explosion_experiment needs an explosive power rate")
    eps = np.asarray(eps_grid, float)
    probs, ses = [], []
    per = {}
    with Stopwatch() as sw:
        for j, e in enumerate(eps):
            shift = small_time_shift(r, k, e)
            first = j * n_small
            table = explosion_table(r, k, tol, shift)
            chunks = _chunked(lambda a, b: explosion_samples(r, k, b - a, float(e) * 1.0000001, seed,
                                                             shift=shift, first_replica=first + a,
                                                             table=table),
                              n_small, threads)
            t = np.concatenate([c[0] for c in chunks])
            cens = np.concatenate([c[1] for c in chunks])
            lw = np.concatenate([c[2] for c in chunks])
            hit = (~cens) & (t <= e)
            w = np.where(hit, np.exp(lw), 0.0)
            probs.append(float(w.mean()))
            ses.append(float(w.std(ddof=1) / math.sqrt(w.size)))
            per[f"weight_eps_{e:g}"] = w
        probs = np.array(probs)
        ses = np.array(ses)
        x = np.log(1.0 / eps)
        y = np.log(-np.log(probs))
        slope, _ = np.polyfit(x, y, 1)
        tg = np.asarray(t_grid, float)
        cap = float(tg.max()) * 1.0000001
        first = len(eps) * n_small
        table = explosion_table(r, k, tol)
        chunks = _chunked(lambda a, b: explosion_samples(r, k, b - a, cap, seed, first_replica=first + a,
                                                         table=table),
                          n_large, threads)
        tl = np.concatenate([c[0] for c in chunks])
        cl = np.concatenate([c[1] for c in chunks])
    surv = np.array([float(np.mean(cl | (tl >= t))) for t in tg])
    with np.errstate(divide="ignore"):
        rate = -np.log(surv) / tg
    lam0 = float(r(0.0))
    ok = bool(np.all(rate[surv > 0] <= lam0))
    comps = [
        Comparison("small_time_slope", float(slope), math.nan, 1.0 / (kk - 1.0), slope_tol),
        Comparison("large_time_bound", float(np.max(rate[surv > 0]) if np.any(surv > 0) else 0.0),
                   math.nan, lam0, 0.0, rule="le"),
    ]
    rep = Report("explosion", comps, {},
                 {"eps": eps.tolist(), "p_small": probs.tolist(), "p_small_se": ses.tolist(),
                  "t_grid": tg.tolist(), "survival": surv.tolist(), "decay_rate": rate.tolist(),
                  "bound_holds": ok, "censored_fraction": float(cl.mean())},
                 per, sw.elapsed)
    return rep


def _chunked(fn, n, threads, size=256):
    """Split replicas [0, n) into chunks processed in order (possibly in parallel)."""
    bounds = [(a, min(a + size, n)) for a in range(0, n, size)]
    return run_replicas(lambda i: fn(*bounds[i]), len(bounds), threads=threads)


# ---------------------------------------------------------------------------
# ruin


@dataclass(frozen=True)
class RuinSetup:
    """Numerical ingredients of the exponentially tilted ruin sampler."""

    theta: float
    x: float
    drift: float


def ruin_tilt(rs: ldp.RiskSpec) -> RuinSetup:
    th = ldp.ruin_exponent(rs)
    x = 1.0 + ldp.gamma_claims(rs, th) / rs.nu
    drift = 1.0 / ldp.finite_horizon_breakpoint(rs, th)
    return RuinSetup(th, x, drift)


def _ruin_paths(rs, kernel, levels, cap, seed, first, n, tilt: Optional[RuinSetup]):
    g1 = kernel.l1_norm
    mark_law = rs.h_law.scaled(1.0 / g1)
    claim = rs.claim_law
    if tilt is None:
        K, cH, logmH, theta, logmC = 1.0, 0.0, 0.0, 0.0, 0.0
        ml, cl = mark_law, claim
    else:
        K, theta = tilt.x, tilt.theta
        cH = tilt.x - 1.0
        logmH = rs.h_law.log_mgf(cH)
        logmC = claim.log_mgf(theta)
        ml, cl = mark_law.tilted(cH * g1), claim.tilted(theta)
    mc, m0, m1, mv, mcdf = _law_nb(ml)
    cc, c0, c1, cv, ccdf = _law_nb(cl)
    ga, gb = np.ascontiguousarray(kernel.a), np.ascontiguousarray(kernel.b)
    out = np.empty((n, levels.size))
    for i in range(n):
        rng = replica_rng(seed, first + i)
        out[i] = _engine.ruin_run(rs.nu, 1.0, ga, gb, mc, m0, m1, mv, mcdf, cc, c0, c1, cv, ccdf,
                                  rs.rho, levels, cap, K, cH, logmH, g1, theta, logmC, rng)
    return out


def ruin_probabilities(rs: ldp.RiskSpec, u_grid, replicas: int, cap: float, seed: int = 0,
                       kernel: Optional[SumExp] = None, tilted: bool = True, threads=None):
    """psi(u) estimates on ``u_grid`` for a horizon ``cap``.

    With ``tilted`` paths run under the exponential change of measure at the
    ruin exponent (intensity scaled by x = f_C(theta), marks and claims
    exponentially tilted), under which ruin is certain; otherwise plain
    paths are used.  Returns (estimates, standard errors, censored fraction).
    """
    kernel = kernel or ExponentialKernel(1.0, 1.0)
    if not isinstance(kernel, SumExp):
        raise DomainError("ruin simulation needs a sum-of-exponentials base kernel")
    u = np.asarray(u_grid, float)
    order = np.argsort(u)
    levels = np.ascontiguousarray(u[order])
    tilt = ruin_tilt(rs) if tilted else None
    chunks = _chunked(lambda a, b: _ruin_paths(rs, kernel, levels, cap, seed, a, b - a, tilt),
                      replicas, threads)
    lw = np.concatenate(chunks)
    w = np.where(np.isnan(lw), 0.0, np.exp(lw))
    est = np.empty(u.size)
    se = np.empty(u.size)
    est[order] = w.mean(axis=0)
    se[order] = w.std(axis=0, ddof=1) / math.sqrt(w.shape[0])
    cens = np.empty(u.size)
    cens[order] = np.isnan(lw).mean(axis=0)
    return est, se, cens


def ruin_experiment(rs: ldp.RiskSpec, u_grid, replicas: int, seed: int = 0,
                    kernel: Optional[SumExp] = None, tol: float = 0.15, crude_u=(0.0,),
                    crude_replicas: int = 2000, crude_cap: float = 200.0, threads=None) -> Report:
    """Exponential decay rate of the ruin probability.

    psi(u) is estimated by importance sampling under the tilted measure (the
    plain estimator cannot see probabilities of order e^{-25}); the slope of
    a linear fit of log psi(u) against u is compared with -theta_dagger.
    Plain estimates at ``crude_u`` are reported for reference together with
    a horizon-doubling censoring diagnostic.
    """
    u = np.asarray(u_grid, float)
    with Stopwatch() as sw:
        tilt = ruin_tilt(rs)
        cap = 50.0 * (u.max() + 1.0) / tilt.drift
        est, se, cens = ruin_probabilities(rs, u, replicas, cap, seed, kernel, True, threads)
        slope, _ = np.polyfit(u, np.log(est), 1)
        crude = {}
        if crude_u:
            cu = np.asarray(crude_u, float)
            p1, s1, _ = ruin_probabilities(rs, cu, crude_replicas, crude_cap, seed + 1, kernel, False, threads)
            p2, s2, _ = ruin_probabilities(rs, cu, crude_replicas, 2 * crude_cap, seed + 1, kernel, False, threads)
            crude = {"u": cu.tolist(), "psi": p2.tolist(), "psi_se": s2.tolist(), "psi_half_horizon": p1.tolist(),
                     "censoring_bias": [float((b - a) / b) if b > 0 else 0.0 for a, b in zip(p1, p2)]}
    comps = [Comparison("log_psi_slope", float(slope), math.nan, -tilt.theta, tol)]
    return Report("ruin", comps, {},
                  {"u": u.tolist(), "psi": est.tolist(), "psi_se": se.tolist(), "censored": cens.tolist(),
                   "theta_dagger": tilt.theta, "tilt_multiplier": tilt.x, "horizon": cap, "crude": crude},
                  {}, sw.elapsed)


# ---------------------------------------------------------------------------
# MGF


def mgf_experiment(nu: float, kernel: SumExp, theta: float, t: float, replicas: int, seed: int = 0,
                   tol: float = 0.05, grid_step: float = 0.01, crude: bool = True, threads=None) -> Report:
    """(1/t) log E[e^{theta N_t}] by simulation against the renewal solver.

    The estimator simulates under lambda_hat = K lambda with K = f(theta) the
    minimal fixed point, weighting e^{theta N_t} by the exact likelihood
    ratio; the plain average of e^{theta N_t} is reported alongside.
    """
    if not isinstance(kernel, SumExp):
        raise DomainError("mgf_experiment simulates sum-of-exponentials kernels")
    l1 = kernel.l1_norm
    with Stopwatch() as sw:
        theory = ldp.mgf_renewal(nu, kernel, theta, t, grid_step) / t
        K = ldp.minimal_root(Point(l1), math.exp(theta))
        cfg = SimConfig(Linear(nu), kernel, horizon=t, seed=seed, max_events=2 ** 62)
        tilt = ScaledLinear(K, K * nu)

        def one(r):
            out = markov_raw(cfg, replica_rng(seed, r), store=False, tilt_rate=tilt)
            return theta * out[2] + out[6]

        lv = np.array(run_replicas(one, replicas, threads=threads))
        est, se = _log_mean_exp(lv)
        diag = {"tilt_multiplier": K}
        if crude:
            c = _counts(replace(cfg, seed=seed + 1), replicas, threads)
            ce, cs = _log_mean_exp(theta * c)
            diag.update(crude_estimate=ce / t, crude_se=cs / t)
    comps = [Comparison("scaled_log_mgf", est / t, se / t, theory, tol)]
    return Report("mgf", comps, {}, diag, {"log_terms": lv}, sw.elapsed)


def _log_mean_exp(lv):
    """log of the mean of e^{lv} and its delta-method standard error."""
    m = float(np.max(lv))
    w = np.exp(lv - m)
    mean = float(w.mean())
    se = float(w.std(ddof=1) / math.sqrt(w.size)) / mean
    return m + math.log(mean), se


# ---------------------------------------------------------------------------
# likelihood ratio, method equivalence, covariance


def likelihood_ratio_mean(cfg: SimConfig, tilt_rate: RateFn, replicas: int, threads=None) -> Report:
    """E_hat[dP/dP_hat] over the horizon, which must equal one."""
    def one(r):
        return markov_raw(cfg, replica_rng(cfg.seed, r), store=False, tilt_rate=tilt_rate)[6]

    with Stopwatch() as sw:
        w = np.exp(np.array(run_replicas(one, replicas, threads=threads)))
    s = _summary(w, cfg.seed, sw.elapsed)
    return Report("likelihood_ratio", [Comparison("mean_weight", s.estimate, s.std_error, 1.0, 0.0, rule="z")],
                  {"weight": s}, per_replica={"weight": w}, elapsed=sw.elapsed)


def method_equivalence(cfg: SimConfig, replicas: int, level: float = 0.01, threads=None) -> Report:
    """Pairwise two-sample KS between thinning, state-based and cluster counts.

    Each method uses its own master seed offset so samples are independent.
    """
    methods = ["thinning"]
    if isinstance(cfg.kernel, SumExp):
        methods.append("markov")
    try:
        _cluster_params(cfg)
        methods.append("cluster")
    except (DomainError, RegimeError):
        pass
    counts = {}
    with Stopwatch() as sw:
        for i, m in enumerate(methods):
            counts[m] = _counts(replace(cfg, method=m, seed=cfg.seed + 1000 * i), replicas, threads)
    pvals = {}
    comps = []
    for i in range(len(methods)):
        for j in range(i + 1, len(methods)):
            a, b = methods[i], methods[j]
            p = float(stats.ks_2samp(counts[a], counts[b]).pvalue)
            pvals[f"{a}-{b}"] = p
            comps.append(Comparison(f"ks_{a}_{b}", p, math.nan, level, 0.0, rule="ge"))
    summ = {m: _summary(c, cfg.seed, sw.elapsed) for m, c in counts.items()}
    return Report("method_equivalence", comps, summ, {"p_values": pvals}, counts, sw.elapsed)


def covariance_experiment(a: float, b: float, nu: float, T: float, lags=(0.5, 1.0, 2.0), delta: float = 0.25,
                          burn_in: float = 50.0, seed: int = 0, tol: float = 0.15) -> Report:
    """Covariance density of a stationary exponential-kernel process from one long stream.

    Counts in bins of width ``delta`` give Cov(N_bin(0), N_bin(tau)) / delta^2,
    which approximates mu(tau) up to a factor (2 cosh((b-a) delta) - 2) / ((b-a) delta)^2.
    """
    cfg = SimConfig(Linear(nu), ExponentialKernel(a, b), horizon=T + burn_in, seed=seed, max_events=2 ** 62)
    with Stopwatch() as sw:
        times = markov_raw(cfg, replica_rng(seed, 0))[0]
        times = times[times >= burn_in] - burn_in
        nb = int(T / delta)
        c = np.bincount(np.minimum((times / delta).astype(np.int64), nb), minlength=nb + 1)[:nb].astype(float)
        d = c - c.mean()
        comps = []
        est = {}
        for tau in lags:
            L = int(round(tau / delta))
            cov = float(np.dot(d[: nb - L], d[L:]) / (nb - L)) / delta ** 2
            # batch-means standard error of the lagged products
            prod = d[: nb - L] * d[L:] / delta ** 2
            nbatch = 100
            bm = prod[: (prod.size // nbatch) * nbatch].reshape(nbatch, -1).mean(axis=1)
            se = float(bm.std(ddof=1) / math.sqrt(nbatch))
            theory = analysis.exp_covariance_density(a, b, nu, tau)
            comps.append(Comparison(f"cov_{tau:g}", cov, se, theory, tol))
            est[tau] = cov
    bias = (2 * math.cosh((b - a) * delta) - 2) / ((b - a) * delta) ** 2
    return Report("covariance", comps, {}, {"bin_width": delta, "bin_bias_factor": bias, "n_events": int(times.size)},
                  {}, sw.elapsed)
