"""Pure-Python (numpy) kernels.

This is the fallback backend and the reference the compiled ``_ckernels``
module is tested against.  Every function takes a *packed* monotone map::

    fam      int      family code (see FAM_* below)
    prm      float64[8]
             [p0, p1, p2, power, normalized, blowup, last_slope, unused]
    knots    float64[m]   (empty for analytic families)
    values   float64[m]

``power`` is the exponent p of the composition t -> Phi(t**p).
``normalized`` selects the identity-floored map t (t<1), max(Phi(t), t) (t>=1).
"""

import math

import numpy as np

FAM_POWER = 0
FAM_EXP_POWER = 1
FAM_AFFINE = 2
FAM_PWL = 3
FAM_STEP = 4

KIND_INV_EXP = 0      # u -> [Phi^-1(e^u)]^-expo
KIND_INV_TAU = 1      # tau -> 1 / (tau [Phi^-1(tau)]^expo)
KIND_LOG_T2 = 2       # t -> H(t) / t^2
KIND_LOG_RECIP = 3    # t -> H(1/t)
KIND_DLOG_T = 4       # t -> H'(t) / t, central differences
KIND_STIELTJES = 5    # dH(t) / t, Riemann-Stieltjes sums

FD_RATIO = 1.01
STIELTJES_POINTS = 1025
BRACKET_LIMIT = 1e300

# Gauss-Kronrod 7-15 abscissae and weights (QUADPACK qk15).
_XGK = np.array([
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144845693013,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.000000000000000000000000000000000,
])
_WGK = np.array([
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714,
])
_WG = np.array([
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327,
])

GK_NODES = np.concatenate([-_XGK[:-1], _XGK[::-1]])
GK_WEIGHTS = np.concatenate([_WGK[:-1], _WGK[::-1]])
_G_WEIGHTS_FULL = np.zeros(15)
# Gauss nodes are the odd-indexed Kronrod nodes (1, 3, 5, 7 counted from the end).
for _i, _w in zip((1, 3, 5), _WG[:3]):
    _G_WEIGHTS_FULL[_i] = _w
    _G_WEIGHTS_FULL[14 - _i] = _w
_G_WEIGHTS_FULL[7] = _WG[3]
G_WEIGHTS = _G_WEIGHTS_FULL


def _powered(t, power):
    t = np.asarray(t, dtype=float)
    if power == 1.0:
        return t
    with np.errstate(over="ignore", divide="ignore"):
        return np.power(t, power)


def _base_eval(fam, prm, knots, values, x):
    """Phi at the already-powered argument x."""
    x = np.asarray(x, dtype=float)
    with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
        if fam == FAM_POWER:
            out = prm[0] * np.power(x, prm[1])
        elif fam == FAM_EXP_POWER:
            out = np.expm1(prm[0] * np.power(x, prm[1])) + prm[2]
        elif fam == FAM_AFFINE:
            out = prm[0] * x + prm[1] if prm[0] > 0 else np.full_like(x, prm[1])
            out = np.where(np.isinf(x) & (prm[0] > 0), np.inf, out)
        elif fam == FAM_PWL:
            out = np.interp(x, knots, values)
            beyond = x > knots[-1]
            if np.any(beyond):
                slope = prm[6]
                if slope > 0:
                    tail = values[-1] + slope * (x - knots[-1])
                else:
                    tail = np.full_like(x, values[-1])
                out = np.where(beyond, tail, out)
        elif fam == FAM_STEP:
            idx = np.searchsorted(knots, x, side="right") - 1
            out = values[np.clip(idx, 0, len(values) - 1)]
        else:
            raise ValueError(f"unknown family code {fam}")
    if math.isfinite(prm[5]):
        out = np.where(x >= prm[5], np.inf, out)
    return out


def map_eval(fam, prm, knots, values, t):
    t = np.asarray(t, dtype=float)
    out = _base_eval(fam, prm, knots, values, _powered(t, prm[3]))
    if prm[4]:
        out = np.where(t < 1.0, t, np.maximum(out, t))
    return out


def _base_log_eval(fam, prm, knots, values, t):
    power = prm[3]
    with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
        if fam == FAM_POWER:
            out = math.log(prm[0]) + prm[1] * power * np.log(t)
            out = np.where(t >= prm[5] ** (1.0 / power), np.inf, out)
            return out
        if fam == FAM_EXP_POWER:
            x = prm[0] * np.power(t, prm[1] * power)
            big = x > 30.0
            small_val = np.log(np.expm1(np.minimum(x, 30.0)) + prm[2])
            big_val = x + np.log1p((prm[2] - 1.0) * np.exp(-x))
            out = np.where(big, big_val, small_val)
            out = np.where(t >= prm[5] ** (1.0 / power), np.inf, out)
            return out
        return np.log(_base_eval(fam, prm, knots, values, _powered(t, power)))


def map_log_eval(fam, prm, knots, values, t):
    """H(t) = log Phi(t^p) evaluated without overflow for the exp family."""
    t = np.asarray(t, dtype=float)
    out = _base_log_eval(fam, prm, knots, values, t)
    if prm[4]:
        with np.errstate(divide="ignore"):
            lt = np.log(t)
        out = np.where(t < 1.0, lt, np.maximum(out, lt))
    return out


def _table_inverse(fam, prm, knots, values, tau):
    """Generalized inverse of the unpowered table map."""
    tau = np.asarray(tau, dtype=float)
    blowup = prm[5]
    m = len(knots)
    idx = np.searchsorted(values, tau, side="left")
    inside = idx < m
    i = np.clip(idx, 1, m - 1) if m > 1 else np.zeros_like(idx)
    if fam == FAM_STEP:
        res_in = knots[np.clip(idx, 0, m - 1)]
    else:
        t0, t1 = knots[i - 1], knots[i]
        v0, v1 = values[i - 1], values[i]
        with np.errstate(invalid="ignore", divide="ignore"):
            res_in = t0 + (tau - v0) * (t1 - t0) / (v1 - v0)
    slope = prm[6]
    if fam == FAM_PWL and slope > 0:
        with np.errstate(invalid="ignore"):
            res_out = knots[-1] + (tau - values[-1]) / slope
    else:
        res_out = np.full_like(tau, np.inf)
    res = np.where(inside, res_in, res_out)
    res = np.where(idx == 0, 0.0, res)
    res = np.minimum(res, blowup)
    res = np.where(np.isinf(tau), blowup, res)
    return res


def bisect_inverse(fam, prm, knots, values, tau, tol=1e-10):
    """inf{t : Phi(t) >= tau} by geometric bracketing and bisection.

    Works for any packed map; returns the upper end of the final bracket,
    so ``Phi(result) >= tau`` always holds.
    """
    tau = np.atleast_1d(np.asarray(tau, dtype=float))
    out = np.zeros_like(tau)
    phi0 = map_eval(fam, prm, knots, values, np.zeros(1))[0]
    # Phi(t) = inf only past the blow-up point; float overflow must not count.
    at_inf = np.isposinf(tau)
    out[at_inf] = prm[5] ** (1.0 / prm[3])
    todo = (tau > phi0) & ~at_inf
    if not np.any(todo):
        return out
    target = tau[todo]
    hi = np.ones_like(target)
    f_hi = map_eval(fam, prm, knots, values, hi)
    grow = f_hi < target
    while np.any(grow):
        hi[grow] *= 2.0
        over = hi > BRACKET_LIMIT
        hi[over & grow] = np.inf
        grow &= ~over
        if not np.any(grow):
            break
        f_hi[grow] = map_eval(fam, prm, knots, values, hi[grow])
        grow &= f_hi < target
    finite = np.isfinite(hi)
    lo = np.where(hi > 1.0, hi / 2.0, 0.0)
    lo[~finite] = np.inf
    active = finite.copy()
    for _ in range(2000):
        active &= (hi - lo) > tol * hi
        if not np.any(active):
            break
        mid = 0.5 * (lo[active] + hi[active])
        f_mid = map_eval(fam, prm, knots, values, mid)
        up = f_mid >= target[active]
        sel_hi = hi[active]
        sel_lo = lo[active]
        sel_hi[up] = mid[up]
        sel_lo[~up] = mid[~up]
        hi[active] = sel_hi
        lo[active] = sel_lo
    out[todo] = hi
    return out


def _base_inverse(fam, prm, knots, values, tau, tol):
    tau = np.asarray(tau, dtype=float)
    power = prm[3]
    with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
        if fam == FAM_POWER:
            res = np.power(np.maximum(tau, 0.0) / prm[0], 1.0 / (prm[1] * power))
        elif fam == FAM_EXP_POWER:
            s = np.log1p(np.maximum(tau - prm[2], 0.0)) / prm[0]
            res = np.power(s, 1.0 / (prm[1] * power))
        elif power != 1.0:
            unpowered = np.array(prm, dtype=float)
            unpowered[4] = 0.0
            return bisect_inverse(fam, unpowered, knots, values, tau, tol)
        elif fam == FAM_AFFINE:
            a, b = prm[0], prm[1]
            if a > 0:
                res = np.maximum(tau - b, 0.0) / a
            else:
                res = np.where(tau <= b, 0.0, np.inf)
        else:
            res = _table_inverse(fam, prm, knots, values, tau)
            return np.where(tau <= 0.0, 0.0, res)
    if fam in (FAM_POWER, FAM_EXP_POWER):
        blow_t = prm[5] ** (1.0 / power) if np.isfinite(prm[5]) else np.inf
        res = np.minimum(res, blow_t)
        res = np.where(np.isinf(tau), blow_t, res)
    return np.where(tau <= 0.0, 0.0, res)


def _normalize_inverse(tau, base):
    with np.errstate(invalid="ignore"):
        capped = np.minimum(np.maximum(1.0, base), tau)
    return np.where(tau < 1.0, np.maximum(tau, 0.0), capped)


def map_inverse(fam, prm, knots, values, tau, tol=1e-10):
    tau = np.atleast_1d(np.asarray(tau, dtype=float))
    base = _base_inverse(fam, prm, knots, values, tau, tol)
    if prm[4]:
        return _normalize_inverse(tau, base)
    return base


def map_inverse_exp(fam, prm, knots, values, eta, tol=1e-10):
    """Phi^-1(e^eta), stable for large eta."""
    eta = np.atleast_1d(np.asarray(eta, dtype=float))
    power = prm[3]
    with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
        tau = np.exp(eta)
        if fam == FAM_POWER:
            base = np.exp((eta - math.log(prm[0])) / (prm[1] * power))
        elif fam == FAM_EXP_POWER:
            big = eta > 30.0
            s_small = np.log1p(np.maximum(np.exp(np.minimum(eta, 30.0)) - prm[2], 0.0))
            s_big = eta + np.log1p((1.0 - prm[2]) * np.exp(-eta))
            s = np.where(big, s_big, s_small) / prm[0]
            base = np.power(s, 1.0 / (prm[1] * power))
        else:
            base = None
        if base is not None:
            blow_t = prm[5] ** (1.0 / power) if np.isfinite(prm[5]) else np.inf
            base = np.minimum(base, blow_t)
        else:
            base = _base_inverse(fam, prm, knots, values, tau, tol)
    if prm[4]:
        return _normalize_inverse(tau, base)
    return base


# ---------------------------------------------------------------------------
# integrands and quadrature

def kind_integrand(kind, fam, prm, knots, values, x, expo):
    x = np.asarray(x, dtype=float)
    with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
        if kind == KIND_INV_EXP:
            inv = map_inverse_exp(fam, prm, knots, values, x)
            return np.power(inv, -expo)
        if kind == KIND_INV_TAU:
            inv = map_inverse(fam, prm, knots, values, x)
            return 1.0 / (x * np.power(inv, expo))
        if kind == KIND_LOG_T2:
            return map_log_eval(fam, prm, knots, values, x) / (x * x)
        if kind == KIND_LOG_RECIP:
            return map_log_eval(fam, prm, knots, values, 1.0 / x)
        if kind == KIND_DLOG_T:
            up = map_log_eval(fam, prm, knots, values, x * FD_RATIO)
            dn = map_log_eval(fam, prm, knots, values, x / FD_RATIO)
            dh = (up - dn) / (x * (FD_RATIO - 1.0 / FD_RATIO))
            # H = -inf on both sides of a zero plateau: derivative completed by 0.
            dh = np.where(np.isneginf(up) & np.isneginf(dn), 0.0, dh)
            # H reaches +inf at a blowup: no integrable derivative gets there.
            dh = np.where(np.isposinf(up), np.inf, dh)
            return dh / x
    raise ValueError(f"unknown integrand kind {kind}")


def _gk_panel(f, a, b):
    half = 0.5 * (b - a)
    mid = 0.5 * (b + a)
    fx = f(mid + half * GK_NODES)
    k15 = half * float(np.dot(GK_WEIGHTS, fx))
    g7 = half * float(np.dot(G_WEIGHTS, fx))
    return k15, abs(k15 - g7)


def adaptive_gk(f, a, b, rtol=1e-8, atol=1e-300, n_init=4, max_panels=2000):
    """Adaptive Gauss-Kronrod 7-15 on [a, b] with log-spaced initial panels.

    ``f`` must accept a numpy array.  Returns ``(value, error_estimate)``;
    an infinite integrand value anywhere makes the result infinite.
    """
    if b <= a:
        return 0.0, 0.0
    if a > 0 and n_init > 1:
        edges = np.geomspace(a, b, n_init + 1)
    else:
        edges = np.linspace(a, b, n_init + 1)
    edges[0], edges[-1] = a, b
    panels = []
    for lo, hi in zip(edges[:-1], edges[1:]):
        val, err = _gk_panel(f, lo, hi)
        if not math.isfinite(val):
            return val, math.inf
        panels.append([lo, hi, val, err])
    while True:
        total = sum(p[2] for p in panels)
        err = sum(p[3] for p in panels)
        if err <= max(atol, rtol * abs(total)) or len(panels) >= max_panels:
            return total, err
        worst = max(range(len(panels)), key=lambda i: panels[i][3])
        lo, hi = panels[worst][0], panels[worst][1]
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            return total, err
        left = _gk_panel(f, lo, mid)
        right = _gk_panel(f, mid, hi)
        if not (math.isfinite(left[0]) and math.isfinite(right[0])):
            return left[0] + right[0], math.inf
        panels[worst] = [lo, mid, left[0], left[1]]
        panels.append([mid, hi, right[0], right[1]])


def stieltjes_block(fam, prm, knots, values, a, b):
    """Riemann-Stieltjes sum of dH(t)/t on a geometric grid over [a, b]."""
    t = np.geomspace(a, b, STIELTJES_POINTS)
    h = map_log_eval(fam, prm, knots, values, t)
    if np.any(np.isposinf(h)):
        return math.inf
    dh = np.diff(h)
    dh = np.where(np.isneginf(h[:-1]) & np.isneginf(h[1:]), 0.0, dh)
    return float(np.sum(dh / np.sqrt(t[:-1] * t[1:])))


def integrate_kind(kind, fam, prm, knots, values, a, b, expo=1.0, rtol=1e-8, atol=1e-300):
    if kind == KIND_STIELTJES:
        return stieltjes_block(fam, prm, knots, values, a, b), 0.0

    def f(x):
        return kind_integrand(kind, fam, prm, knots, values, x, expo)

    return adaptive_gk(f, a, b, rtol=rtol, atol=atol)


def block_sums(kind, fam, prm, knots, values, start, kmax, direction, expo=1.0, rtol=1e-8):
    """Integrals over the dyadic blocks [s 2^k, s 2^(k+1)] (direction +1) or
    [s 2^-(k+1), s 2^-k] (direction -1) for k = 0..kmax."""
    out = np.empty(kmax + 1)
    for k in range(kmax + 1):
        if direction > 0:
            a, b = start * 2.0 ** k, start * 2.0 ** (k + 1)
        else:
            a, b = start * 2.0 ** -(k + 1), start * 2.0 ** -k
        out[k] = integrate_kind(kind, fam, prm, knots, values, a, b, expo, rtol)[0]
    return out


# ---------------------------------------------------------------------------
# functional equation  Psi(K) = K * phi(K) = target

def solve_psi(fam, prm, knots, values, targets, lo, hi, tol=1e-10, maxiter=200):
    """Bisection for K with K * phi(K) = target inside [lo, hi].

    Returns ``(K, residual, ok)`` where residual is relative and ``ok``
    flags points whose bracket really encloses the target.
    """
    targets = np.asarray(targets, dtype=float)
    lo = np.array(lo, dtype=float)
    hi = np.array(hi, dtype=float)

    def psi(k):
        with np.errstate(over="ignore"):
            return k * map_eval(fam, prm, knots, values, k)

    f_lo = psi(lo) - targets
    f_hi = psi(hi) - targets
    ok = (f_lo <= tol * targets) & (f_hi >= -tol * targets)
    mid = 0.5 * (lo + hi)
    res = np.abs(psi(mid) - targets) / targets
    active = ok & (res > tol)
    for _ in range(maxiter):
        if not np.any(active):
            break
        m = mid[active]
        f_m = psi(m) - targets[active]
        up = f_m > 0
        h = hi[active]
        l = lo[active]
        h[up] = m[up]
        l[~up] = m[~up]
        hi[active] = h
        lo[active] = l
        mid[active] = 0.5 * (l + h)
        res[active] = np.abs(psi(mid[active]) - targets[active]) / targets[active]
        active &= (res > tol) & (hi - lo > 4e-16 * hi)
    return mid, res, ok
