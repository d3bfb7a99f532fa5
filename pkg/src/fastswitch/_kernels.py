"""Compiled inner loops.

The kernels take model callbacks as first-class numba functions.  Every
function here also runs uncompiled through ``.py_func`` when a callback
cannot be jitted.
"""

import math

import numba
import numpy as np

# status codes shared with hybrid_sde
DONE = 1
NEED_NOISE = 2
STOPPED = 3
BLOWUP = 4
NONFINITE = 5

MONITOR_NONE = 0
MONITOR_CLOSENESS = 1
MONITOR_EXIT = 2

# ivars layout
I_REGIME, I_GRID, I_EVENT, I_NOISE, I_REC, I_STATUS = range(6)
# fvars layout
F_TIME, F_AUX = range(2)


@numba.njit(cache=True)
def no_rates(x):
    return np.zeros((1, 1))


@numba.njit(nogil=True)
def polyline_distance(x, poly):
    """Euclidean distance from ``x`` to a polyline (or single point)."""
    n = poly.shape[0]
    d = x.shape[0]
    if n == 1:
        s = 0.0
        for j in range(d):
            s += (x[j] - poly[0, j]) ** 2
        return math.sqrt(s)
    best = np.inf
    for k in range(n - 1):
        num = 0.0
        den = 0.0
        for j in range(d):
            seg = poly[k + 1, j] - poly[k, j]
            num += (x[j] - poly[k, j]) * seg
            den += seg * seg
        u = 0.0
        if den > 0.0:
            u = min(1.0, max(0.0, num / den))
        s = 0.0
        for j in range(d):
            s += (x[j] - poly[k, j] - u * (poly[k + 1, j] - poly[k, j])) ** 2
        if s < best:
            best = s
    return math.sqrt(best)


@numba.njit(nogil=True)
def _record(rec_t, rec_x, rec_i, rec_grid, ivars, t, x, regime, on_grid):
    r = ivars[I_REC]
    if r >= rec_t.shape[0]:
        return
    rec_t[r] = t
    rec_x[r, :] = x
    rec_i[r] = regime
    rec_grid[r] = on_grid
    ivars[I_REC] = r + 1


@numba.njit(nogil=True)
def advance(drift, diffusion, rate_fn, x, ivars, fvars,
            h, n_grid, T, delta, log_scheme, guard,
            ev_t, ev_next, ev_u, qbar,
            noise, m,
            rec_t, rec_x, rec_i, rec_grid, stride, rec_switch,
            monitor, ref, gamma, poly, theta3, radius):
    """Integrate one path until done, stopped, failed or out of noise.

    The grid is ``t_k = k*h`` for ``k < n_grid`` and ``t_{n_grid} = T``.
    Every substep ends at the earlier of the next grid time and the next
    candidate switching time.  Constant generators pass the next regime in
    ``ev_next``; ``ev_next[e] < 0`` asks for thinning against ``qbar`` with
    ``rate_fn(x)``.
    """
    d = x.shape[0]
    sqd = math.sqrt(delta)
    n_ev = ev_t.shape[0]
    n_noise = noise.shape[0]
    xn = np.empty(d)
    while True:
        t = fvars[F_TIME]
        regime = ivars[I_REGIME]
        k = ivars[I_GRID]
        e = ivars[I_EVENT]
        if k > n_grid:
            ivars[I_STATUS] = DONE
            return
        tg = k * h if k < n_grid else T
        te = ev_t[e] if e < n_ev else np.inf
        tn = tg if tg <= te else te
        dt = tn - t
        if dt > 0.0:
            pos = ivars[I_NOISE]
            if sqd > 0.0 and pos + m > n_noise:
                ivars[I_STATUS] = NEED_NOISE
                return
            fx = drift(x, regime)
            if sqd > 0.0:
                g = diffusion(x, regime)
                sdt = sqd * math.sqrt(dt)
            if log_scheme:
                for j in range(d):
                    xj = x[j]
                    mu = fx[j] / xj
                    inc = 0.0
                    if sqd > 0.0:
                        s2 = 0.0
                        dw = 0.0
                        for c in range(m):
                            cj = g[j, c] / xj
                            s2 += cj * cj
                            dw += cj * noise[pos + c]
                        mu -= 0.5 * delta * s2
                        inc = sdt * dw
                    xn[j] = math.exp(math.log(xj) + mu * dt + inc)
            else:
                for j in range(d):
                    v = x[j] + fx[j] * dt
                    if sqd > 0.0:
                        dw = 0.0
                        for c in range(m):
                            dw += g[j, c] * noise[pos + c]
                        v += sdt * dw
                    xn[j] = v
            if sqd > 0.0:
                ivars[I_NOISE] = pos + m
            nrm = 0.0
            ok = True
            for j in range(d):
                if not math.isfinite(xn[j]):
                    ok = False
                nrm += xn[j] * xn[j]
            if not ok:
                ivars[I_STATUS] = NONFINITE
                fvars[F_AUX] = tn
                return
            if math.sqrt(nrm) > guard:
                ivars[I_STATUS] = BLOWUP
                fvars[F_AUX] = tn
                return
            if log_scheme:
                for j in range(d):
                    if xn[j] <= 0.0:
                        ivars[I_STATUS] = NONFINITE
                        fvars[F_AUX] = tn
                        return
            x[:] = xn
            fvars[F_TIME] = tn
        if e < n_ev and te == tn:
            nxt = ev_next[e]
            if nxt < 0:
                q = rate_fn(x)
                rate = -q[regime, regime]
                nxt = regime
                if ev_u[e, 0] * qbar < rate:
                    u = ev_u[e, 1] * rate
                    acc = 0.0
                    for c in range(q.shape[0]):
                        if c == regime:
                            continue
                        acc += q[regime, c]
                        if q[regime, c] > 0.0:
                            nxt = c
                        if u < acc:
                            break
            ivars[I_EVENT] = e + 1
            if nxt != regime:
                ivars[I_REGIME] = nxt
                regime = nxt
                if rec_switch:
                    _record(rec_t, rec_x, rec_i, rec_grid, ivars, tn, x, regime, False)
        if tg == tn:
            if k % stride == 0 or k == n_grid:
                _record(rec_t, rec_x, rec_i, rec_grid, ivars, tn, x, regime, True)
            ivars[I_GRID] = k + 1
            if monitor == MONITOR_CLOSENESS:
                s = 0.0
                for j in range(d):
                    s += (x[j] - ref[k, j]) ** 2
                dev = math.sqrt(s)
                if dev > fvars[F_AUX]:
                    fvars[F_AUX] = dev
                if dev >= gamma:
                    ivars[I_STATUS] = STOPPED
                    return
            elif monitor == MONITOR_EXIT:
                s = 0.0
                for j in range(d):
                    s += x[j] * x[j]
                if math.sqrt(s) <= radius and polyline_distance(x, poly) >= theta3:
                    ivars[I_STATUS] = STOPPED
                    fvars[F_AUX] = tn
                    return


@numba.njit(nogil=True)
def rk4_run(field, x0, h, n, out):
    """Classical RK4: ``out[k]`` is the state after ``k`` steps of size ``h``."""
    x = x0.copy()
    out[0, :] = x
    for k in range(n):
        k1 = field(x)
        k2 = field(x + 0.5 * h * k1)
        k3 = field(x + 0.5 * h * k2)
        k4 = field(x + h * k3)
        x = x + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        out[k + 1, :] = x
    return x


@numba.njit(nogil=True)
def rk4_step(field, x, h):
    k1 = field(x)
    k2 = field(x + 0.5 * h * k1)
    k3 = field(x + 0.5 * h * k2)
    k4 = field(x + h * k3)
    return x + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
