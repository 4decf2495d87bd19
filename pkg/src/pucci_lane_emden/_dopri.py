"""Dormand-Prince 5(4) kernel with dense output, event location and branch restarts.

The kernel is compiled with numba and serves two vector fields: the radial
first-order system (``KIND_RADIAL``) and the quadratic phase system
(``KIND_PHASE``). Both are piecewise smooth; the pieces are selected by a small
integer branch vector, and every switch is located as a root of a continuous
event function so that each smooth piece is integrated at full order.

Parameter vector layout (``par``)::

    0 lam   1 Lam   2 N   3 p   4 q
    5 lo    (slope of m on s<=0 and divisor of M on s<=0)
    6 hi    (slope of m on s>0 and divisor of M on s>0)
    7 line  (value of X, Y on the lines L_X, L_Y)
    8 blow  (blow-up threshold)

Branch vector (``br``): ``[su, sv, au, av]`` where ``su`` is the sign of u' and
``au`` the sign of the argument of the extremal operator in the u equation.
"""
import numpy as np
from numba import njit

KIND_RADIAL = 0
KIND_PHASE = 1
N_EVENTS = 8

ACT_OFF = 0
ACT_RECORD = 1
ACT_KINK = 2
ACT_STOP = 3

ST_END = 0
ST_EVENT = 1
ST_CONVERGED = 2
ST_MAXSTEPS = 3
ST_STEPFAIL = 4

_C = np.array([0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0])
_A = np.array([
    [0.0, 0.0, 0.0, 0.0, 0.0],
    [1 / 5, 0.0, 0.0, 0.0, 0.0],
    [3 / 40, 9 / 40, 0.0, 0.0, 0.0],
    [44 / 45, -56 / 15, 32 / 9, 0.0, 0.0],
    [19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729, 0.0],
    [9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656],
])
_B = np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84])
_E = np.array([-71 / 57600, 0.0, 71 / 16695, -71 / 1920, 17253 / 339200,
               -22 / 525, 1 / 40])
_P = np.array([
    [1.0, -8048581381 / 2820520608, 8663915743 / 2820520608,
     -12715105075 / 11282082432],
    [0.0, 0.0, 0.0, 0.0],
    [0.0, 131558114200 / 32700410799, -68118460800 / 10900136933,
     87487479700 / 32700410799],
    [0.0, -1754552775 / 470086768, 14199869525 / 1410260304,
     -10690763975 / 1880347072],
    [0.0, 127303824393 / 49829197408, -318862633887 / 49829197408,
     701980252875 / 199316789632],
    [0.0, -282668133 / 205662961, 2019193451 / 616988883,
     -1453857185 / 822651844],
    [0.0, 40617522 / 29380423, -110615467 / 29380423,
     69997945 / 29380423],
])


@njit(cache=True)
def spow(x, e):
    """Odd power ``|x|^(e-1) x``."""
    if x >= 0.0:
        return x ** e
    return -((-x) ** e)


@njit(cache=True)
def _slope(par, s):
    return par[5] if s < 0 else par[6]


@njit(cache=True)
def branch_pair(par, s, a):
    """Effective dimension and divisor ``(Ntil, iota)`` of one component."""
    ms = _slope(par, s)
    md = _slope(par, a)
    return (ms / md) * (par[2] - 1.0) + 1.0, md


@njit(cache=True)
def rhs(kind, x, y, par, br, out):
    p = par[3]
    q = par[4]
    if kind == KIND_RADIAL:
        nm1 = par[2] - 1.0
        ms_u = _slope(par, br[0])
        ms_v = _slope(par, br[1])
        md_u = _slope(par, br[2])
        md_v = _slope(par, br[3])
        out[0] = y[1]
        out[1] = (-nm1 * ms_u * y[1] / x - spow(y[2], p)) / md_u
        out[2] = y[3]
        out[3] = (-nm1 * ms_v * y[3] / x - spow(y[0], q)) / md_v
    else:
        nu, iu = branch_pair(par, br[0], br[2])
        nv, iv = branch_pair(par, br[1], br[3])
        X = y[0]
        Y = y[1]
        Z = y[2]
        W = y[3]
        out[0] = X * (X - (nu - 2.0) + Z / iu)
        out[1] = Y * (Y - (nv - 2.0) + W / iv)
        out[2] = Z * (nu - p * Y - Z / iu)
        out[3] = W * (nv - q * X - W / iv)


@njit(cache=True)
def events(kind, x, y, par, br, out):
    """Continuous event functions; zeros mark vanishing, kinks and thresholds."""
    nm1 = par[2] - 1.0
    if kind == KIND_RADIAL:
        out[0] = y[0]
        out[1] = y[2]
        out[2] = y[1]
        out[3] = y[3]
        mu = _slope(par, -1.0 if y[1] < 0 else 1.0) * y[1]
        mv = _slope(par, -1.0 if y[3] < 0 else 1.0) * y[3]
        out[4] = -nm1 * mu / x - spow(y[2], par[3])
        out[5] = -nm1 * mv / x - spow(y[0], par[4])
        # resolution floor; par[8] = 0 disables it
        out[6] = max(y[0], y[2]) - par[8] if par[8] > 0.0 else 1.0
        out[7] = 1.0
    else:
        out[0] = y[2] - _slope(par, br[0]) * nm1
        out[1] = y[3] - _slope(par, br[1]) * nm1
        out[2] = y[0] - par[7]
        out[3] = y[1] - par[7]
        for i in range(4):
            out[4 + i] = abs(y[i]) - par[8]


@njit(cache=True)
def _sgn(v, fallback):
    if v > 0:
        return 1.0
    if v < 0:
        return -1.0
    return fallback


@njit(cache=True)
def refresh_branch(kind, x, y, par, br):
    """Recompute the branch vector from the state (zeros keep the old value)."""
    if kind == KIND_RADIAL:
        br[0] = _sgn(y[1], br[0])
        br[1] = _sgn(y[3], br[1])
        g = np.empty(N_EVENTS)
        events(kind, x, y, par, br, g)
        br[2] = _sgn(g[4], br[2])
        br[3] = _sgn(g[5], br[3])
    else:
        nm1 = par[2] - 1.0
        br[2] = br[0] * _sgn(y[2] - _slope(par, br[0]) * nm1, br[2] * br[0])
        br[3] = br[1] * _sgn(y[3] - _slope(par, br[1]) * nm1, br[3] * br[1])


@njit(cache=True)
def apply_kink(kind, j, g_end, br):
    """Set the branch entry switched by event ``j`` from its post-crossing sign."""
    s = 1.0 if g_end[j] > 0 else -1.0
    if kind == KIND_RADIAL:
        if 2 <= j <= 5:
            br[j - 2] = s
    elif j <= 1:
        br[2 + j] = br[j] * s


@njit(cache=True)
def dense_eval(y0, h, K, theta, out):
    t1 = theta
    t2 = theta * theta
    t3 = t2 * theta
    t4 = t3 * theta
    for i in range(4):
        acc = 0.0
        for j in range(7):
            acc += K[j, i] * (_P[j, 0] * t1 + _P[j, 1] * t2 + _P[j, 2] * t3
                              + _P[j, 3] * t4)
        out[i] = y0[i] + h * acc


@njit(cache=True)
def _crossed(g0, g1, d):
    if d >= 0 and g0 < 0.0 and g1 >= 0.0:
        return True
    if d <= 0 and g0 > 0.0 and g1 <= 0.0:
        return True
    return False


@njit(cache=True)
def _locate(kind, x, y0, h, K, par, br, j, ga, gb):
    """Illinois iteration on the dense output; returns the bracket end past the root."""
    a = 0.0
    b = 1.0
    fa = ga
    fb = gb
    side = 0
    pos_b = gb > 0
    yt = np.empty(4)
    g = np.empty(N_EVENTS)
    for _ in range(100):
        if b - a <= 4e-16:
            break
        if fb != fa:
            c = b - fb * (b - a) / (fb - fa)
        else:
            c = 0.5 * (a + b)
        if not (c > a and c < b):
            c = 0.5 * (a + b)
        dense_eval(y0, h, K, c, yt)
        events(kind, x + c * h, yt, par, br, g)
        fc = g[j]
        if fc == 0.0 or (fc > 0) == pos_b:
            b = c
            fb = fc
            if side == -1:
                fa *= 0.5
            side = -1
        else:
            a = c
            fa = fc
            if side == 1:
                fb *= 0.5
            side = 1
    return b


@njit(cache=True)
def _wrms(err, sc):
    s = 0.0
    for i in range(4):
        s += (err[i] / sc[i]) ** 2
    return np.sqrt(s / 4.0)


@njit(cache=True)
def integrate(kind, x0, y0, x_end, par, br0, rtol, atol, xscale, h_max,
              max_steps, keep, ev_dir, ev_act, stat, conv_tol, conv_dt):
    """Integrate from ``x0`` towards ``x_end``.

    Returns a tuple of status, final index, recorded steps and events. Step ``i``
    runs from ``xs[i]`` to ``xs[i+1]`` and its dense output is
    ``dense_eval(ys[i], hs[i], Ks[i], (s - xs[i]) / hs[i])``.
    """
    direction = 1.0 if x_end >= x0 else -1.0
    cap = max_steps + 2 if keep >= 1 else 2
    capk = max_steps + 2 if keep >= 2 else 1
    xs = np.empty(cap)
    ys = np.empty((cap, 4))
    brs = np.empty((cap, 4))
    hs = np.empty(cap)
    Ks = np.empty((capk, 7, 4))
    max_ev = 4096
    ev_x = np.empty(max_ev)
    ev_y = np.empty((max_ev, 4))
    ev_id = np.empty(max_ev, dtype=np.int64)
    n_ev = 0

    x = x0
    y = y0.copy()
    br = br0.copy()
    refresh_branch(kind, x, y, par, br)
    K = np.zeros((7, 4))
    f = np.empty(4)
    rhs(kind, x, y, par, br, f)
    g_old = np.empty(N_EVENTS)
    g_new = np.empty(N_EVENTS)
    g_end = np.empty(N_EVENTS)
    events(kind, x, y, par, br, g_old)

    sc = np.empty(4)
    ytmp = np.empty(4)
    ynew = np.empty(4)
    err = np.empty(4)
    ftmp = np.empty(4)

    # initial step (Hairer, Norsett & Wanner heuristic)
    for i in range(4):
        sc[i] = atol + rtol * max(abs(y[i]), xscale * abs(x) * abs(f[i]))
    d0 = 0.0
    d1 = 0.0
    for i in range(4):
        d0 += (y[i] / sc[i]) ** 2
        d1 += (f[i] / sc[i]) ** 2
    d0 = np.sqrt(d0 / 4)
    d1 = np.sqrt(d1 / 4)
    if d0 < 1e-5 or d1 < 1e-5:
        h0 = 1e-6
    else:
        h0 = 0.01 * d0 / d1
    h0 = min(h0, abs(x_end - x))
    for i in range(4):
        ytmp[i] = y[i] + direction * h0 * f[i]
    rhs(kind, x + direction * h0, ytmp, par, br, ftmp)
    d2 = 0.0
    for i in range(4):
        d2 += ((ftmp[i] - f[i]) / sc[i]) ** 2
    h0 = max(h0, 1e-300)
    d2 = np.sqrt(d2 / 4) / h0
    if max(d1, d2) <= 1e-15:
        h1 = max(1e-6, h0 * 1e-3)
    else:
        h1 = (0.01 / max(d1, d2)) ** 0.2
    h = min(100 * h0, h1, h_max, abs(x_end - x))

    n = 0
    if keep >= 1:
        xs[0] = x
        ys[0, :] = y
        brs[0, :] = br
    status = ST_END
    last_event = -1
    conv_idx = -1
    conv_start = 0.0
    steps = 0
    while True:
        if direction * (x_end - x) <= 0.0:
            status = ST_END
            break
        if steps >= max_steps:
            status = ST_MAXSTEPS
            break
        if h < 1e-14 * max(1.0, abs(x)):
            status = ST_STEPFAIL
            break
        hh = direction * min(h, abs(x_end - x))
        # stages
        for i in range(4):
            K[0, i] = f[i]
        for s in range(1, 6):
            for i in range(4):
                acc = 0.0
                for j in range(s):
                    acc += _A[s, j] * K[j, i]
                ytmp[i] = y[i] + hh * acc
            rhs(kind, x + _C[s] * hh, ytmp, par, br, ftmp)
            for i in range(4):
                K[s, i] = ftmp[i]
        for i in range(4):
            acc = 0.0
            for j in range(6):
                acc += _B[j] * K[j, i]
            ynew[i] = y[i] + hh * acc
        rhs(kind, x + hh, ynew, par, br, ftmp)
        for i in range(4):
            K[6, i] = ftmp[i]
        finite = True
        for i in range(4):
            acc = 0.0
            for j in range(7):
                acc += _E[j] * K[j, i]
            err[i] = hh * acc
            if not np.isfinite(ynew[i]) or not np.isfinite(err[i]):
                finite = False
            sc[i] = atol + rtol * max(abs(y[i]), abs(ynew[i]),
                                      xscale * abs(x) * abs(f[i]))
        if finite:
            en = _wrms(err, sc)
        else:
            en = 1e10
        if en > 1.0:
            h = abs(hh) * max(0.2, 0.9 * en ** -0.2)
            continue
        steps += 1
        x_next = x + hh
        events(kind, x_next, ynew, par, br, g_new)
        jbest = -1
        tbest = 2.0
        for j in range(N_EVENTS):
            if ev_act[j] == ACT_OFF:
                continue
            if _crossed(g_old[j], g_new[j], ev_dir[j]):
                th = _locate(kind, x, y, hh, K, par, br, j, g_old[j], g_new[j])
                if th < tbest:
                    tbest = th
                    jbest = j
        if keep >= 2:
            Ks[n, :, :] = K
        if keep >= 1:
            hs[n] = hh
        stop = False
        kink = False
        if jbest >= 0:
            for j in range(N_EVENTS):
                g_end[j] = g_new[j]
            dense_eval(y, hh, K, tbest, ytmp)
            x = x + tbest * hh
            for i in range(4):
                y[i] = ytmp[i]
            events(kind, x, y, par, br, g_new)
            g_new[jbest] = 0.0
            # every event crossed up to the restart point fires here
            for j in range(N_EVENTS):
                if ev_act[j] == ACT_OFF:
                    continue
                if j != jbest and not _crossed(g_old[j], g_new[j], ev_dir[j]):
                    continue
                if n_ev < max_ev:
                    ev_x[n_ev] = x
                    ev_y[n_ev, :] = y
                    ev_id[n_ev] = j
                    n_ev += 1
                if ev_act[j] == ACT_STOP:
                    stop = True
                    last_event = j
                elif ev_act[j] == ACT_KINK:
                    kink = True
                    apply_kink(kind, j, g_end, br)
                if not stop:
                    last_event = j
        else:
            x = x_next
            for i in range(4):
                y[i] = ynew[i]
        n += 1
        if keep >= 1:
            xs[n] = x
            ys[n, :] = y
            brs[n, :] = br
        h = abs(hh) * min(10.0, max(0.2, 0.9 * max(en, 1e-10) ** -0.2))
        h = min(h, h_max)
        if jbest >= 0:
            if stop:
                status = ST_EVENT
                break
            if kink:
                if keep >= 1:
                    brs[n, :] = br
            rhs(kind, x, y, par, br, f)
            gsave = g_old[jbest]
            events(kind, x, y, par, br, g_old)
            # the restart point sits past the root; pin the post-crossing sign
            if g_old[jbest] == 0.0 or (g_old[jbest] > 0) == (gsave > 0):
                g_old[jbest] = -np.sign(gsave) * 1e-300
        else:
            for i in range(4):
                f[i] = K[6, i]
            for j in range(N_EVENTS):
                g_old[j] = g_new[j]
        if conv_tol > 0.0:
            fn = 0.0
            for i in range(4):
                fn = max(fn, abs(f[i]))
            hit = -1
            if fn < conv_tol:
                for k in range(stat.shape[0]):
                    d = 0.0
                    for i in range(4):
                        d = max(d, abs(y[i] - stat[k, i]))
                    if d < conv_tol:
                        hit = k
                        break
            if hit < 0:
                conv_idx = -1
            elif hit != conv_idx:
                conv_idx = hit
                conv_start = x
            elif abs(x - conv_start) >= conv_dt:
                status = ST_CONVERGED
                break
    return (status, n, xs, ys, brs, hs, Ks, n_ev, ev_x, ev_y, ev_id,
            last_event, conv_idx, x, y, br)
