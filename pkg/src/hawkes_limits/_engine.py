"""Compiled inner loops.

Families are passed as integer codes plus flat parameter arrays (see the
``_nb`` methods in :mod:`hawkes_limits.core`):

rates    0 affine nu + alpha z, 1 gamma z^k + delta, 2 gamma (c + z)^k, 3 log(c + z)
kernels  0 sum of exponentials, 1 power law, 2 tabulated
laws     0 point, 1 exponential, 2 gamma, 3 discrete
"""
import math

import numpy as np
from numba import njit

_C1 = np.uint64(0xBF58476D1CE4E5B9)
_C2 = np.uint64(0x94D049BB133111EB)
_GOLD = np.uint64(0x9E3779B97F4A7C15)

# 16-point Gauss-Legendre on [0, 1]
_glx, _glw = np.polynomial.legendre.leggauss(16)
GL_X = 0.5 * (_glx + 1.0)
GL_W = 0.5 * _glw


@njit(cache=True)
def _mix(x):
    x = (x ^ (x >> np.uint64(30))) * _C1
    x = (x ^ (x >> np.uint64(27))) * _C2
    return x ^ (x >> np.uint64(31))


@njit(cache=True)
def hash_uniform(key, stream, ctr):
    """Counter-based uniform on (0, 1) indexed by (key, stream, counter)."""
    x = _mix(key ^ _mix(np.uint64(stream) * _GOLD + np.uint64(ctr)))
    return (np.float64(x >> np.uint64(11)) + 0.5) * (1.0 / 9007199254740992.0)


@njit(cache=True)
def rate_val(code, p, z):
    if z < 0.0:
        z = 0.0
    if code == 0:
        return p[0] + p[1] * z
    elif code == 1:
        return p[0] * z ** p[1] + p[2]
    elif code == 2:
        return p[0] * (p[2] + z) ** p[1]
    return math.log(p[0] + z)


@njit(cache=True)
def kern_val(code, p, t):
    if t < 0.0:
        return 0.0
    if code == 0:
        n = int(p[0])
        s = 0.0
        for i in range(n):
            s += p[1 + i] * math.exp(-p[1 + n + i] * t)
        return s
    elif code == 1:
        return p[0] * (1.0 + t) ** (-p[1])
    m = int(p[0])
    q = p[1]
    end = p[2 + m - 1]
    if t > end:
        if q < 0.0:
            return 0.0
        return p[2 + 2 * m - 1] * (t / end) ** (-q)
    grid = p[2:2 + m]
    vals = p[2 + m:2 + 2 * m]
    j = np.searchsorted(grid, t, side="right") - 1
    if j >= m - 1:
        return vals[m - 1]
    w = (t - grid[j]) / (grid[j + 1] - grid[j])
    return vals[j] * (1.0 - w) + vals[j + 1] * w


@njit(cache=True)
def draw(code, p0, p1, vals, cdf, rng):
    if code == 0:
        return p0
    elif code == 1:
        return rng.exponential(1.0 / p0)
    elif code == 2:
        return rng.gamma(p0, p1)
    j = np.searchsorted(cdf, rng.random(), side="right")
    if j >= vals.size:
        j = vals.size - 1
    return vals[j]


@njit(cache=True)
def _decayed_sum(z, b, dt):
    s = 0.0
    for i in range(z.size):
        s += z[i] * math.exp(-b[i] * dt)
    return s


@njit(cache=True)
def _grow(arr, n):
    out = np.empty(max(2 * arr.size, 16))
    out[:n] = arr[:n]
    return out


@njit(cache=True)
def seg_integral(rc, rp, tc, tp, shift, z, b, dt):
    """Integral over [0, dt] of lambda_hat(Z_s) + shift - lambda(Z_s), Z_s decaying from z."""
    if dt <= 0.0:
        return 0.0
    if rc == 0 and tc == 0:
        zint = 0.0
        for i in range(z.size):
            zint += z[i] * (-math.expm1(-b[i] * dt)) / b[i]
        return (tp[0] - rp[0] + shift) * dt + (tp[1] - rp[1]) * zint
    bmax = 0.0
    for i in range(b.size):
        bmax = max(bmax, b[i])
    # past ~40 decay times the state is numerically zero; integrate the rest as a constant
    head = dt
    if bmax > 0.0 and dt * bmax > 40.0:
        head = 40.0 / bmax
    nsub = int(min(max(1.0, math.ceil(head * bmax)), 64.0))
    h = head / nsub
    acc = 0.0
    for k in range(nsub):
        for j in range(GL_X.size):
            s = (k + GL_X[j]) * h
            zz = _decayed_sum(z, b, s)
            acc += GL_W[j] * h * (rate_val(tc, tp, zz) + shift - rate_val(rc, rp, zz))
    if head < dt:
        zz = _decayed_sum(z, b, head)
        acc += (dt - head) * (rate_val(tc, tp, zz) + shift - rate_val(rc, rp, zz))
    return acc


@njit(nogil=True, cache=True)
def markov_run(rc, rp, ka, kb, mc, m0, m1, mv, mcdf, horizon, max_events,
               ckpts, store, tilt, tc, tp, shift, rng):
    """State-based simulation for sum-of-exponential kernels.

    Returns (times, marks, n, truncated, ck_count, ck_z, log_weight).
    ``log_weight`` is log dP/dP_hat when ``tilt`` is set, the dynamics then
    running at tc/tp plus ``shift``.
    """
    d = ka.size
    z = np.zeros(d)
    t = 0.0
    n = 0
    cap = 1024 if store else 0
    times = np.empty(cap)
    marks = np.empty(cap)
    nck = ckpts.size
    ck_count = np.full(nck, -1, dtype=np.int64)
    ck_z = np.full(nck, np.nan)
    ci = 0
    logw = 0.0
    truncated = False
    while True:
        zt = 0.0
        for i in range(d):
            zt += z[i]
        if tilt:
            bound = rate_val(tc, tp, zt) + shift
        else:
            bound = rate_val(rc, rp, zt)
        if bound > 0.0:
            s = t + rng.exponential(1.0 / bound)
        else:
            s = np.inf
        while ci < nck and ckpts[ci] <= s and ckpts[ci] <= horizon:
            ck_count[ci] = n
            ck_z[ci] = _decayed_sum(z, kb, ckpts[ci] - t)
            ci += 1
        if s >= horizon:
            if tilt:
                logw += seg_integral(rc, rp, tc, tp, shift, z, kb, horizon - t)
            break
        if tilt:
            logw += seg_integral(rc, rp, tc, tp, shift, z, kb, s - t)
        for i in range(d):
            z[i] *= math.exp(-kb[i] * (s - t))
        t = s
        zs = 0.0
        for i in range(d):
            zs += z[i]
        if tilt:
            lam_hat = rate_val(tc, tp, zs) + shift
            accept = rng.random() * bound < lam_hat
        else:
            accept = rng.random() * bound < rate_val(rc, rp, zs)
        if accept:
            if tilt:
                lam = rate_val(rc, rp, zs)
                if lam <= 0.0:
                    logw = -np.inf
                else:
                    logw -= math.log(lam_hat / lam)
            mk = draw(mc, m0, m1, mv, mcdf, rng)
            for i in range(d):
                z[i] += mk * ka[i]
            if store:
                if n >= times.size:
                    times = _grow(times, n)
                    marks = _grow(marks, n)
                times[n] = t
                marks[n] = mk
            n += 1
            if n >= max_events:
                truncated = True
                break
    return times[:n].copy(), marks[:n].copy(), n, truncated, ck_count, ck_z, logw


@njit(nogil=True, cache=True)
def embed_run(rc, rp, kc, kp, window, mc, m0, m1, mv, mcdf, horizon, max_events,
              band, key, rng):
    """Thinning through a Poisson embedding on [0, T] x [0, inf).

    The plane is cut into horizontal bands of height ``band``; band j owns
    its own counter-based stream of candidate points, so runs sharing ``key``
    share the same planar Poisson process whatever their intensity.
    """
    times = np.empty(1024)
    marks = np.empty(1024)
    n = 0
    lo = 0
    nbands = 0
    nxt = np.empty(64)
    cnt = np.zeros(64, dtype=np.int64)
    t = 0.0
    truncated = False
    markov = kc == 0
    d = int(kp[0]) if markov else 0
    ka = kp[1:1 + d]
    kb = kp[1 + d:1 + 2 * d]
    z = np.zeros(d)
    while True:
        # intensity argument right after the current time
        if markov:
            zt = 0.0
            for i in range(d):
                zt += z[i]
        else:
            while lo < n and times[lo] < t - window:
                lo += 1
            zt = 0.0
            for i in range(lo, n):
                zt += marks[i] * kern_val(kc, kp, t - times[i])
        bound = rate_val(rc, rp, zt)
        need = int(bound / band) + 1
        if need > nxt.size:
            nn = max(need, 2 * nxt.size)
            tmp = np.empty(nn)
            tmp[:nxt.size] = nxt
            nxt = tmp
            tmpc = np.zeros(nn, dtype=np.int64)
            tmpc[:cnt.size] = cnt
            cnt = tmpc
        while nbands < need:
            nxt[nbands] = -math.log(hash_uniform(key, 2 * nbands, 0)) / band
            cnt[nbands] = 0
            nbands += 1
        s = np.inf
        jb = -1
        for j in range(need):
            # catch up a band that was idle while the bound sat below it
            while nxt[j] <= t:
                cnt[j] += 1
                nxt[j] += -math.log(hash_uniform(key, 2 * j, cnt[j])) / band
            if nxt[j] < s:
                s = nxt[j]
                jb = j
        if s >= horizon:
            break
        height = band * (jb + hash_uniform(key, 2 * jb + 1, cnt[jb]))
        cnt[jb] += 1
        nxt[jb] += -math.log(hash_uniform(key, 2 * jb, cnt[jb])) / band
        if markov:
            for i in range(d):
                z[i] *= math.exp(-kb[i] * (s - t))
            zs = 0.0
            for i in range(d):
                zs += z[i]
        else:
            while lo < n and times[lo] < s - window:
                lo += 1
            zs = 0.0
            for i in range(lo, n):
                zs += marks[i] * kern_val(kc, kp, s - times[i])
        t = s
        if height < rate_val(rc, rp, zs):
            mk = draw(mc, m0, m1, mv, mcdf, rng)
            if n >= times.size:
                times = _grow(times, n)
                marks = _grow(marks, n)
            if n > 0 and t <= times[n - 1]:
                t = np.nextafter(times[n - 1], np.inf)
            times[n] = t
            marks[n] = mk
            n += 1
            if markov:
                for i in range(d):
                    z[i] += mk * ka[i]
            if n >= max_events:
                truncated = True
                break
    return times[:n].copy(), marks[:n].copy(), n, truncated


@njit(nogil=True, cache=True)
def explode_run(rc, rp, ka, kb, z_stop, cap, shift, rng):
    """Run the state dynamics until Z >= z_stop or time ``cap``.

    The path is drawn under lambda + shift; returns (t, Z, n, reached,
    log dP/dP_hat) where the weight is shift * t - sum log(1 + shift/lambda).
    """
    d = ka.size
    z = np.zeros(d)
    t = 0.0
    n = 0
    logw = 0.0
    while True:
        zt = 0.0
        for i in range(d):
            zt += z[i]
        if zt >= z_stop:
            return t, zt, n, True, logw
        bound = rate_val(rc, rp, zt) + shift
        s = t + rng.exponential(1.0 / bound)
        if s >= cap:
            logw += shift * (cap - t)
            return cap, zt, n, False, logw
        logw += shift * (s - t)
        for i in range(d):
            z[i] *= math.exp(-kb[i] * (s - t))
        t = s
        zs = 0.0
        for i in range(d):
            zs += z[i]
        lam = rate_val(rc, rp, zs)
        if rng.random() * bound < lam + shift:
            logw -= math.log1p(shift / lam)
            for i in range(d):
                z[i] += ka[i]
            n += 1


@njit(nogil=True, cache=True)
def ruin_run(nu, alpha, ga, gb, mc, m0, m1, mv, mcdf, cc, c0, c1, cv, ccdf,
             rho, levels, cap, K, cH, logmH, g1, theta, logmC, rng):
    """Surplus process u + rho t - sum C_i under a linear marked intensity.

    Simulates lambda_hat = K (nu + alpha Z) with marks and claims drawn
    from the supplied (possibly tilted) laws.  For each level u_j (sorted
    ascending) returns the log likelihood ratio dP/dP_hat at the first time
    the aggregate loss S_t = sum C_i - rho t exceeds u_j, or nan when the
    horizon ``cap`` is reached first.  Per-event weight factors are
    -log K - (cH H(a) - logmH) - (theta C - logmC), with H(a) = a g1.
    """
    d = ga.size
    z = np.zeros(d)
    t = 0.0
    loss = 0.0
    logw = 0.0
    nl = levels.size
    out = np.full(nl, np.nan)
    j = 0
    while j < nl and levels[j] < 0.0:
        out[j] = 0.0
        j += 1
    logK = math.log(K)
    while j < nl:
        zt = 0.0
        for i in range(d):
            zt += z[i]
        bound = K * (nu + alpha * zt)
        s = t + rng.exponential(1.0 / bound)
        if s >= cap:
            break
        dt = s - t
        zint = 0.0
        for i in range(d):
            zint += z[i] * (-math.expm1(-gb[i] * dt)) / gb[i]
            z[i] *= math.exp(-gb[i] * dt)
        logw += (K - 1.0) * (nu * dt + alpha * zint)
        t = s
        zs = 0.0
        for i in range(d):
            zs += z[i]
        if rng.random() * bound < K * (nu + alpha * zs):
            a = draw(mc, m0, m1, mv, mcdf, rng)
            c = draw(cc, c0, c1, cv, ccdf, rng)
            logw += -logK - (cH * a * g1 - logmH) - (theta * c - logmC)
            for i in range(d):
                z[i] += a * ga[i]
            loss += c
            excess = loss - rho * t
            while j < nl and excess > levels[j]:
                out[j] = logw
                j += 1
    return out


@njit(nogil=True, cache=True)
def exp_loglik(times, horizon, nu, a, b):
    """Log-likelihood and its gradient for nu + sum a e^{-b (t - tau_i)}."""
    n = times.size
    ll = 0.0
    g_nu = 0.0
    g_a = 0.0
    g_b = 0.0
    # y: unit-jump state, v: its derivative in b (negated); Z = a y
    y = 0.0
    v = 0.0
    prev = 0.0
    for i in range(n):
        if i > 0:
            dt = times[i] - prev
            e = math.exp(-b * dt)
            v = e * (v + dt * (y + 1.0))
            y = e * (y + 1.0)
        lam = nu + a * y
        ll += math.log(lam)
        g_nu += 1.0 / lam
        g_a += y / lam
        g_b -= a * v / lam
        prev = times[i]
    comp = nu * horizon
    sum_em = 0.0
    sum_ue = 0.0
    for i in range(n):
        u = horizon - times[i]
        em = -math.expm1(-b * u)
        sum_em += em
        sum_ue += u * math.exp(-b * u)
    comp += a / b * sum_em
    ll -= comp
    g_nu -= horizon
    g_a -= sum_em / b
    g_b -= -a / b ** 2 * sum_em + a / b * sum_ue
    return ll, g_nu, g_a, g_b


@njit(cache=True)
def renewal_solve(hg, theta, dt, n, jmax, bracket):
    """F on the grid j*dt, j = 0..n, for F(s) = exp(theta + int_0^s h(u)(F(s-u)-1)du).

    Trapezoidal convolution; the implicit end term is resolved by Newton.
    Returns (F, ok) where ok is False when F leaves [0, bracket].
    """
    F = np.empty(n + 1)
    G = np.empty(n + 1)
    F[0] = math.exp(theta)
    G[0] = F[0] - 1.0
    beta = 0.5 * dt * hg[0]
    for m in range(1, n + 1):
        acc = 0.0
        top = min(m - 1, jmax)
        for j in range(1, top + 1):
            acc += hg[j] * G[m - j]
        if m <= jmax:
            acc += 0.5 * hg[m] * G[0]
        c = theta + dt * acc - beta
        # x = exp(c + beta x), start from the previous value
        x = F[m - 1]
        for _ in range(50):
            e = math.exp(c + beta * x)
            step = (e - x) / (1.0 - beta * e)
            x += step
            if abs(step) < 1e-15 * max(1.0, abs(x)):
                break
        if not (x >= 0.0 and x <= bracket) or not np.isfinite(x):
            return F[:m], False
        F[m] = x
        G[m] = x - 1.0
    return F, True
