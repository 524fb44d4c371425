# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled kernels mirroring ``_pykernels`` element by element.

Same packed-map calling convention; loops run in C over scalar paths.
"""

import numpy as np
cimport numpy as cnp
from libc.math cimport (INFINITY, exp, expm1, fabs, fmax, fmin, isfinite, isinf,
                        isnan, log, log1p, pow, sqrt)
from libc.stdlib cimport free, malloc

from ._pykernels import (BRACKET_LIMIT, FAM_AFFINE, FAM_EXP_POWER, FAM_POWER,  # noqa: F401
                         FAM_PWL, FAM_STEP, FD_RATIO, GK_NODES, GK_WEIGHTS, G_WEIGHTS,
                         KIND_DLOG_T, KIND_INV_EXP, KIND_INV_TAU, KIND_LOG_RECIP,
                         KIND_LOG_T2, KIND_STIELTJES, STIELTJES_POINTS, adaptive_gk)

cnp.import_array()

cdef enum:
    C_POWER = 0
    C_EXP = 1
    C_AFFINE = 2
    C_PWL = 3
    C_STEP = 4

cdef enum:
    K_INV_EXP = 0
    K_INV_TAU = 1
    K_LOG_T2 = 2
    K_LOG_RECIP = 3
    K_DLOG_T = 4

cdef double C_FD_RATIO = 1.01
cdef double C_BRACKET = 1e300

cdef double XK[15]
cdef double WK[15]
cdef double WG[15]
for _i in range(15):
    XK[_i] = GK_NODES[_i]
    WK[_i] = GK_WEIGHTS[_i]
    WG[_i] = G_WEIGHTS[_i]


cdef struct Map:
    int fam
    double prm[8]
    double* knots
    double* values
    Py_ssize_t m


cdef Map _make(int fam, double[::1] prm, double[::1] knots, double[::1] values):
    cdef Map mp
    cdef int i
    mp.fam = fam
    for i in range(8):
        mp.prm[i] = prm[i]
    mp.m = knots.shape[0]
    mp.knots = &knots[0] if mp.m > 0 else NULL
    mp.values = &values[0] if mp.m > 0 else NULL
    return mp


cdef inline Py_ssize_t _search_left(double* a, Py_ssize_t m, double x) nogil:
    cdef Py_ssize_t lo = 0, hi = m, mid
    while lo < hi:
        mid = (lo + hi) // 2
        if a[mid] < x:
            lo = mid + 1
        else:
            hi = mid
    return lo


cdef inline Py_ssize_t _search_right(double* a, Py_ssize_t m, double x) nogil:
    cdef Py_ssize_t lo = 0, hi = m, mid
    while lo < hi:
        mid = (lo + hi) // 2
        if a[mid] <= x:
            lo = mid + 1
        else:
            hi = mid
    return lo


cdef double _base_eval(Map* mp, double x) nogil:
    cdef double out, slope
    cdef Py_ssize_t i, m = mp.m
    if mp.fam == C_POWER:
        out = mp.prm[0] * pow(x, mp.prm[1])
    elif mp.fam == C_EXP:
        out = expm1(mp.prm[0] * pow(x, mp.prm[1])) + mp.prm[2]
    elif mp.fam == C_AFFINE:
        if mp.prm[0] > 0:
            out = INFINITY if isinf(x) else mp.prm[0] * x + mp.prm[1]
        else:
            out = mp.prm[1]
    elif mp.fam == C_PWL:
        if x > mp.knots[m - 1]:
            slope = mp.prm[6]
            if slope > 0:
                out = mp.values[m - 1] + slope * (x - mp.knots[m - 1])
            else:
                out = mp.values[m - 1]
        elif x <= mp.knots[0]:
            out = mp.values[0]
        else:
            i = _search_right(mp.knots, m, x)
            if i >= m:
                out = mp.values[m - 1]
            else:
                out = mp.values[i - 1] + (x - mp.knots[i - 1]) * (
                    (mp.values[i] - mp.values[i - 1]) / (mp.knots[i] - mp.knots[i - 1]))
    else:
        i = _search_right(mp.knots, m, x) - 1
        if i < 0:
            i = 0
        out = mp.values[i]
    if isfinite(mp.prm[5]) and x >= mp.prm[5]:
        out = INFINITY
    return out


cdef inline double _powered(double t, double power) nogil:
    return t if power == 1.0 else pow(t, power)


cdef double _eval(Map* mp, double t) nogil:
    cdef double out = _base_eval(mp, _powered(t, mp.prm[3]))
    if mp.prm[4] != 0:
        if t < 1.0:
            return t
        return fmax(out, t)
    return out


cdef inline double _blow_t(Map* mp) nogil:
    return pow(mp.prm[5], 1.0 / mp.prm[3]) if isfinite(mp.prm[5]) else INFINITY


cdef double _log_eval(Map* mp, double t) nogil:
    cdef double power = mp.prm[3], out, x, lt
    if mp.fam == C_POWER:
        out = log(mp.prm[0]) + mp.prm[1] * power * log(t)
        if t >= pow(mp.prm[5], 1.0 / power):
            out = INFINITY
    elif mp.fam == C_EXP:
        x = mp.prm[0] * pow(t, mp.prm[1] * power)
        if x > 30.0:
            out = x + log1p((mp.prm[2] - 1.0) * exp(-x))
        else:
            out = log(expm1(x) + mp.prm[2])
        if t >= pow(mp.prm[5], 1.0 / power):
            out = INFINITY
    else:
        out = log(_base_eval(mp, _powered(t, power)))
    if mp.prm[4] != 0:
        lt = log(t)
        if t < 1.0:
            return lt
        return fmax(out, lt)
    return out


cdef double _table_inverse(Map* mp, double tau) nogil:
    cdef Py_ssize_t m = mp.m, idx, i, j
    cdef double res, slope = mp.prm[6]
    if isinf(tau) and tau > 0:
        return mp.prm[5]
    idx = _search_left(mp.values, m, tau)
    if idx == 0:
        return fmin(0.0, mp.prm[5])
    if idx < m:
        if mp.fam == C_STEP:
            res = mp.knots[idx]
        else:
            i = idx
            res = mp.knots[i - 1] + (tau - mp.values[i - 1]) * (
                (mp.knots[i] - mp.knots[i - 1]) / (mp.values[i] - mp.values[i - 1]))
    elif mp.fam == C_PWL and slope > 0:
        res = mp.knots[m - 1] + (tau - mp.values[m - 1]) / slope
    else:
        res = INFINITY
    return fmin(res, mp.prm[5])


cdef double _bisect_inverse(Map* mp, double tau, double tol) nogil:
    cdef double phi0, hi, lo, f_hi, mid
    cdef int it
    if isinf(tau) and tau > 0:
        return pow(mp.prm[5], 1.0 / mp.prm[3])
    phi0 = _eval(mp, 0.0)
    if not (tau > phi0):
        return 0.0
    hi = 1.0
    f_hi = _eval(mp, hi)
    while f_hi < tau:
        hi *= 2.0
        if hi > C_BRACKET:
            return INFINITY
        f_hi = _eval(mp, hi)
    lo = hi / 2.0 if hi > 1.0 else 0.0
    for it in range(2000):
        if not ((hi - lo) > tol * hi):
            break
        mid = 0.5 * (lo + hi)
        if _eval(mp, mid) >= tau:
            hi = mid
        else:
            lo = mid
    return hi


cdef double _base_inverse(Map* mp, double tau, double tol) nogil:
    cdef double power = mp.prm[3], res, s, bt
    cdef Map tmp
    if mp.fam == C_POWER or mp.fam == C_EXP:
        if mp.fam == C_POWER:
            res = pow(fmax(tau, 0.0) / mp.prm[0], 1.0 / (mp.prm[1] * power))
        else:
            s = log1p(fmax(tau - mp.prm[2], 0.0)) / mp.prm[0]
            res = pow(s, 1.0 / (mp.prm[1] * power))
        bt = _blow_t(mp)
        res = fmin(res, bt)
        if isinf(tau):
            res = bt
    elif power != 1.0:
        tmp = mp[0]
        tmp.prm[4] = 0.0
        return _bisect_inverse(&tmp, tau, tol)
    elif mp.fam == C_AFFINE:
        if mp.prm[0] > 0:
            res = fmax(tau - mp.prm[1], 0.0) / mp.prm[0]
        else:
            res = 0.0 if tau <= mp.prm[1] else INFINITY
    else:
        res = _table_inverse(mp, tau)
    if tau <= 0.0:
        return 0.0
    return res


cdef inline double _normalize_inverse(double tau, double base) nogil:
    if tau < 1.0:
        return fmax(tau, 0.0)
    return fmin(fmax(1.0, base), tau)


cdef double _inverse(Map* mp, double tau, double tol) nogil:
    cdef double base = _base_inverse(mp, tau, tol)
    if mp.prm[4] != 0:
        return _normalize_inverse(tau, base)
    return base


cdef double _inverse_exp(Map* mp, double eta, double tol) nogil:
    cdef double power = mp.prm[3], tau = exp(eta), base, s
    if mp.fam == C_POWER:
        base = fmin(exp((eta - log(mp.prm[0])) / (mp.prm[1] * power)), _blow_t(mp))
    elif mp.fam == C_EXP:
        if eta > 30.0:
            s = eta + log1p((1.0 - mp.prm[2]) * exp(-eta))
        else:
            s = log1p(fmax(exp(eta) - mp.prm[2], 0.0))
        base = fmin(pow(s / mp.prm[0], 1.0 / (mp.prm[1] * power)), _blow_t(mp))
    else:
        base = _base_inverse(mp, tau, tol)
    if mp.prm[4] != 0:
        return _normalize_inverse(tau, base)
    return base


cdef double _integrand(int kind, Map* mp, double x, double expo) nogil:
    cdef double up, dn, dh
    if kind == K_INV_EXP:
        return pow(_inverse_exp(mp, x, 1e-10), -expo)
    if kind == K_INV_TAU:
        return 1.0 / (x * pow(_inverse(mp, x, 1e-10), expo))
    if kind == K_LOG_T2:
        return _log_eval(mp, x) / (x * x)
    if kind == K_LOG_RECIP:
        return _log_eval(mp, 1.0 / x)
    up = _log_eval(mp, x * C_FD_RATIO)
    dn = _log_eval(mp, x / C_FD_RATIO)
    if isinf(up) and up < 0 and isinf(dn) and dn < 0:
        return 0.0
    if isinf(up) and up > 0:
        return INFINITY
    dh = (up - dn) / (x * (C_FD_RATIO - 1.0 / C_FD_RATIO))
    return dh / x


cdef void _gk_panel(int kind, Map* mp, double expo, double a, double b,
                    double* val, double* err) nogil:
    cdef double half = 0.5 * (b - a), mid = 0.5 * (b + a), fx, k15 = 0.0, g7 = 0.0
    cdef int i
    for i in range(15):
        fx = _integrand(kind, mp, mid + half * XK[i], expo)
        k15 += WK[i] * fx
        g7 += WG[i] * fx
    k15 *= half
    g7 *= half
    val[0] = k15
    err[0] = fabs(k15 - g7)


cdef double _adaptive(int kind, Map* mp, double expo, double a, double b, double rtol,
                      double atol, int n_init, int max_panels, double* err_out) nogil:
    cdef double* lo
    cdef double* hi
    cdef double* val
    cdef double* err
    cdef double total, etot, mid, lv, le, rv, re, worst_err, la, lb
    cdef int n = 0, i, worst
    if b <= a:
        err_out[0] = 0.0
        return 0.0
    lo = <double*> malloc(max_panels * sizeof(double))
    hi = <double*> malloc(max_panels * sizeof(double))
    val = <double*> malloc(max_panels * sizeof(double))
    err = <double*> malloc(max_panels * sizeof(double))
    if a > 0 and n_init > 1:
        la = log(a)
        lb = log(b)
    for i in range(n_init):
        if a > 0 and n_init > 1:
            lo[i] = a if i == 0 else exp(la + (lb - la) * i / n_init)
            hi[i] = b if i == n_init - 1 else exp(la + (lb - la) * (i + 1) / n_init)
        else:
            lo[i] = a if i == 0 else a + (b - a) * i / n_init
            hi[i] = b if i == n_init - 1 else a + (b - a) * (i + 1) / n_init
        _gk_panel(kind, mp, expo, lo[i], hi[i], &val[i], &err[i])
        n += 1
        if not isfinite(val[i]):
            total = val[i]
            err_out[0] = INFINITY
            free(lo); free(hi); free(val); free(err)
            return total
    while True:
        total = 0.0
        etot = 0.0
        for i in range(n):
            total += val[i]
            etot += err[i]
        if etot <= fmax(atol, rtol * fabs(total)) or n >= max_panels:
            break
        worst = 0
        worst_err = err[0]
        for i in range(1, n):
            if err[i] > worst_err:
                worst_err = err[i]
                worst = i
        mid = 0.5 * (lo[worst] + hi[worst])
        if mid <= lo[worst] or mid >= hi[worst]:
            break
        _gk_panel(kind, mp, expo, lo[worst], mid, &lv, &le)
        _gk_panel(kind, mp, expo, mid, hi[worst], &rv, &re)
        if not (isfinite(lv) and isfinite(rv)):
            total = lv + rv
            etot = INFINITY
            break
        lo[n] = mid
        hi[n] = hi[worst]
        val[n] = rv
        err[n] = re
        hi[worst] = mid
        val[worst] = lv
        err[worst] = le
        n += 1
    free(lo); free(hi); free(val); free(err)
    err_out[0] = etot
    return total


# ---------------------------------------------------------------------------
# Python-level API (same signatures as _pykernels)

def _as_flat(t):
    arr = np.asarray(t, dtype=float)
    return arr, np.ascontiguousarray(arr.ravel())


def map_eval(int fam, prm, knots, values, t):
    cdef Map mp = _make(fam, np.ascontiguousarray(prm, dtype=float),
                        np.ascontiguousarray(knots, dtype=float), np.ascontiguousarray(values, dtype=float))
    arr, flat = _as_flat(t)
    cdef double[::1] x = flat
    out = np.empty(x.shape[0])
    cdef double[::1] o = out
    cdef Py_ssize_t i
    with nogil:
        for i in range(x.shape[0]):
            o[i] = _eval(&mp, x[i])
    return out.reshape(arr.shape)


def map_log_eval(int fam, prm, knots, values, t):
    cdef Map mp = _make(fam, np.ascontiguousarray(prm, dtype=float),
                        np.ascontiguousarray(knots, dtype=float), np.ascontiguousarray(values, dtype=float))
    arr, flat = _as_flat(t)
    cdef double[::1] x = flat
    out = np.empty(x.shape[0])
    cdef double[::1] o = out
    cdef Py_ssize_t i
    with nogil:
        for i in range(x.shape[0]):
            o[i] = _log_eval(&mp, x[i])
    return out.reshape(arr.shape)


def bisect_inverse(int fam, prm, knots, values, tau, double tol=1e-10):
    cdef Map mp = _make(fam, np.ascontiguousarray(prm, dtype=float),
                        np.ascontiguousarray(knots, dtype=float), np.ascontiguousarray(values, dtype=float))
    cdef double[::1] x = np.ascontiguousarray(np.atleast_1d(np.asarray(tau, dtype=float)))
    out = np.empty(x.shape[0])
    cdef double[::1] o = out
    cdef Py_ssize_t i
    with nogil:
        for i in range(x.shape[0]):
            o[i] = _bisect_inverse(&mp, x[i], tol)
    return out


def map_inverse(int fam, prm, knots, values, tau, double tol=1e-10):
    cdef Map mp = _make(fam, np.ascontiguousarray(prm, dtype=float),
                        np.ascontiguousarray(knots, dtype=float), np.ascontiguousarray(values, dtype=float))
    arr = np.atleast_1d(np.asarray(tau, dtype=float))
    cdef double[::1] x = np.ascontiguousarray(arr.ravel())
    out = np.empty(x.shape[0])
    cdef double[::1] o = out
    cdef Py_ssize_t i
    with nogil:
        for i in range(x.shape[0]):
            o[i] = _inverse(&mp, x[i], tol)
    return out.reshape(arr.shape)


def map_inverse_exp(int fam, prm, knots, values, eta, double tol=1e-10):
    cdef Map mp = _make(fam, np.ascontiguousarray(prm, dtype=float),
                        np.ascontiguousarray(knots, dtype=float), np.ascontiguousarray(values, dtype=float))
    arr = np.atleast_1d(np.asarray(eta, dtype=float))
    cdef double[::1] x = np.ascontiguousarray(arr.ravel())
    out = np.empty(x.shape[0])
    cdef double[::1] o = out
    cdef Py_ssize_t i
    with nogil:
        for i in range(x.shape[0]):
            o[i] = _inverse_exp(&mp, x[i], tol)
    return out.reshape(arr.shape)


def kind_integrand(int kind, int fam, prm, knots, values, x, double expo):
    if kind == KIND_STIELTJES:
        raise ValueError(f"unknown integrand kind {kind}")
    cdef Map mp = _make(fam, np.ascontiguousarray(prm, dtype=float),
                        np.ascontiguousarray(knots, dtype=float), np.ascontiguousarray(values, dtype=float))
    arr, flat = _as_flat(x)
    cdef double[::1] xs = flat
    out = np.empty(xs.shape[0])
    cdef double[::1] o = out
    cdef Py_ssize_t i
    with nogil:
        for i in range(xs.shape[0]):
            o[i] = _integrand(kind, &mp, xs[i], expo)
    return out.reshape(arr.shape)


def stieltjes_block(int fam, prm, knots, values, double a, double b):
    """Riemann-Stieltjes sum of dH(t)/t on a geometric grid over [a, b]."""
    cdef Map mp = _make(fam, np.ascontiguousarray(prm, dtype=float),
                        np.ascontiguousarray(knots, dtype=float), np.ascontiguousarray(values, dtype=float))
    cdef double[::1] t = np.geomspace(a, b, STIELTJES_POINTS)
    cdef Py_ssize_t i, n = t.shape[0]
    cdef double h0, h1, dh, total = 0.0
    with nogil:
        h0 = _log_eval(&mp, t[0])
        if isinf(h0) and h0 > 0:
            total = INFINITY
        else:
            for i in range(1, n):
                h1 = _log_eval(&mp, t[i])
                if isinf(h1) and h1 > 0:
                    total = INFINITY
                    break
                if isinf(h0) and h0 < 0 and isinf(h1) and h1 < 0:
                    dh = 0.0
                else:
                    dh = h1 - h0
                total += dh / sqrt(t[i - 1] * t[i])
                h0 = h1
    return float(total)


def integrate_kind(int kind, int fam, prm, knots, values, double a, double b,
                   double expo=1.0, double rtol=1e-8, double atol=1e-300):
    if kind == KIND_STIELTJES:
        return stieltjes_block(fam, prm, knots, values, a, b), 0.0
    cdef Map mp = _make(fam, np.ascontiguousarray(prm, dtype=float),
                        np.ascontiguousarray(knots, dtype=float), np.ascontiguousarray(values, dtype=float))
    cdef double err, val
    with nogil:
        val = _adaptive(kind, &mp, expo, a, b, rtol, atol, 4, 2000, &err)
    return val, err


def block_sums(int kind, int fam, prm, knots, values, double start, int kmax, int direction,
               double expo=1.0, double rtol=1e-8):
    """Integrals over the dyadic blocks, as in the Python backend."""
    out = np.empty(kmax + 1)
    cdef double[::1] o = out
    cdef double a, b, err
    cdef int k
    cdef Map mp
    if kind == KIND_STIELTJES:
        for k in range(kmax + 1):
            if direction > 0:
                a, b = start * 2.0 ** k, start * 2.0 ** (k + 1)
            else:
                a, b = start * 2.0 ** -(k + 1), start * 2.0 ** -k
            o[k] = stieltjes_block(fam, prm, knots, values, a, b)
        return out
    mp = _make(fam, np.ascontiguousarray(prm, dtype=float),
               np.ascontiguousarray(knots, dtype=float), np.ascontiguousarray(values, dtype=float))
    with nogil:
        for k in range(kmax + 1):
            if direction > 0:
                a = start * pow(2.0, k)
                b = start * pow(2.0, k + 1)
            else:
                a = start * pow(2.0, -(k + 1))
                b = start * pow(2.0, -k)
            o[k] = _adaptive(kind, &mp, expo, a, b, rtol, 1e-300, 4, 2000, &err)
    return out


def solve_psi(int fam, prm, knots, values, targets, lo, hi, double tol=1e-10, int maxiter=200):
    """Bisection for K with K * phi(K) = target inside [lo, hi]."""
    cdef Map mp = _make(fam, np.ascontiguousarray(prm, dtype=float),
                        np.ascontiguousarray(knots, dtype=float), np.ascontiguousarray(values, dtype=float))
    tg = np.ascontiguousarray(np.asarray(targets, dtype=float))
    shape = tg.shape
    cdef double[::1] y = tg.ravel()
    cdef double[::1] l = np.array(np.broadcast_to(np.asarray(lo, dtype=float), shape)).ravel()
    cdef double[::1] h = np.array(np.broadcast_to(np.asarray(hi, dtype=float), shape)).ravel()
    cdef Py_ssize_t i, n = y.shape[0]
    K = np.empty(n)
    res = np.empty(n)
    ok = np.empty(n, dtype=bool)
    cdef double[::1] Kv = K
    cdef double[::1] rv = res
    cdef cnp.npy_bool[::1] okv = ok
    cdef double a, b, m, f_m, r, target
    cdef int it
    with nogil:
        for i in range(n):
            a = l[i]
            b = h[i]
            target = y[i]
            okv[i] = (a * _eval(&mp, a) - target <= tol * target) and (
                b * _eval(&mp, b) - target >= -tol * target)
            m = 0.5 * (a + b)
            r = fabs(m * _eval(&mp, m) - target) / target
            if okv[i] and r > tol:
                for it in range(maxiter):
                    f_m = m * _eval(&mp, m) - target
                    if f_m > 0:
                        b = m
                    else:
                        a = m
                    m = 0.5 * (a + b)
                    r = fabs(m * _eval(&mp, m) - target) / target
                    if not (r > tol and b - a > 4e-16 * b):
                        break
            Kv[i] = m
            rv[i] = r
    return K.reshape(shape), res.reshape(shape), ok.reshape(shape)
