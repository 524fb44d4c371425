"""Both sides of the mean inequality

    int_0^1 dr / (r k(r)^(1/p))  >=  (1/n) int_{eM}^inf d tau / (tau [Phi^-1(tau)]^(1/p))

where k is the spherical average of K and M the ball mean of Phi(K).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .classifier import ConditionKind, tau_integral
from .fields import RadialField, spherical_average
from .monotone import MonotoneMap, check_convex, evaluate
from .quadrature import Verdict, integrate

S_MAX = 30.0
S_BLOCKS = 5
TOL_CMP = 1e-6


@dataclass(frozen=True)
class HalfLineIntegral:
    """int_0^inf g(s) ds truncated at S_MAX with a fitted tail."""

    value: float
    truncated: float
    tail: float
    tail_model: str
    g_at_smax: float
    blocks: tuple


def _tail(g, s_max):
    s1, s2, s3 = s_max / 4, s_max / 2, s_max
    vals = np.asarray(g(np.array([s1, s2, s3])), dtype=float)
    if vals[2] == 0.0:
        return 0.0, "vanishing", 0.0
    if np.any(vals <= 0) or not np.all(np.isfinite(vals)):
        return math.inf, "non-positive or infinite", float(vals[2])
    L = np.log(vals)
    # exponential model: log g linear in s; power model: linear in log s
    lam1, lam2 = (L[0] - L[1]) / (s2 - s1), (L[1] - L[2]) / (s3 - s2)
    m1, m2 = (L[0] - L[1]) / math.log(s2 / s1), (L[1] - L[2]) / math.log(s3 / s2)
    exp_mis = abs(lam1 - lam2) / max(abs(lam2), 1e-300)
    pow_mis = abs(m1 - m2) / max(abs(m2), 1e-300)
    if exp_mis <= pow_mis:
        if lam2 <= 0:
            return math.inf, "exponential, non-decaying", float(vals[2])
        return float(vals[2] / lam2), f"exponential rate {lam2:.4g}", float(vals[2])
    if m2 <= 1.0:
        return math.inf, f"power s^-{m2:.4g}, not summable", float(vals[2])
    return float(vals[2] * s3 / (m2 - 1.0)), f"power s^-{m2:.4g}", float(vals[2])


def half_line_integral(g, s_max: float = S_MAX, rtol: float = 1e-9) -> HalfLineIntegral:
    """Integrate a positive vectorised ``g`` over (0, inf).

    (0, s_max] is split into a head and S_BLOCKS dyadic blocks ending at
    s_max; beyond s_max the tail is extrapolated from the better-fitting of
    an exponential or power decay model.  Infinite if the tail does not decay.
    """
    edges = s_max * 2.0 ** -np.arange(S_BLOCKS, -1, -1, dtype=float)
    pieces = [integrate(g, 0.0, edges[0], rtol)[0]]
    for a, b in zip(edges[:-1], edges[1:]):
        pieces.append(integrate(g, a, b, rtol)[0])
    blocks = tuple(float(x) for x in pieces)
    truncated = float(sum(pieces))
    if not math.isfinite(truncated):
        return HalfLineIntegral(math.inf, truncated, math.inf, "infinite integrand", math.inf, blocks)
    tail, model, g_end = _tail(g, s_max)
    return HalfLineIntegral(truncated + tail, truncated, tail, model, g_end, blocks)


def ball_mean(K: RadialField, phi: MonotoneMap) -> float:
    """Mean value of Phi(K) over the unit ball; +inf when not integrable."""
    return ball_mean_detail(K, phi).value


def ball_mean_detail(K: RadialField, phi: MonotoneMap) -> HalfLineIntegral:
    n = K.n
    PK = K.compose(lambda v: evaluate(phi, np.maximum(v, 0.0)), "Phi(K)")

    def g(s):
        with np.errstate(over="ignore", invalid="ignore", under="ignore"):
            vals = n * spherical_average(PK, np.exp(-s)) * np.exp(-n * s)
        return np.where(np.isnan(vals), math.inf, vals)

    return half_line_integral(g)


@dataclass(frozen=True)
class VerificationRecord:
    lhs: float
    rhs: float
    M: float
    p: float
    n: int
    passed: bool
    lhs_tail: float
    rhs_tail: float
    jensen_ok: bool
    rhs_exact: bool = True
    notes: tuple = field(default_factory=tuple)

    def to_dict(self) -> dict:
        return {
            "lhs": self.lhs, "rhs": self.rhs, "M": self.M, "p": self.p, "n": self.n,
            "pass": self.passed, "lhs_tail": self.lhs_tail, "rhs_tail": self.rhs_tail,
            "jensen_ok": self.jensen_ok, "rhs_exact": self.rhs_exact, "notes": list(self.notes),
        }


def jensen_check(K: RadialField, phi: MonotoneMap, radii=None, rtol: float = 1e-12) -> bool:
    """Phi(k(r)) <= spherical mean of Phi(K) at the sampled radii."""
    radii = np.geomspace(1e-3, 0.99, 16) if radii is None else np.asarray(radii, dtype=float)
    k = spherical_average(K, radii)
    lhs = evaluate(phi, np.maximum(k, 0.0))
    rhs = spherical_average(K.compose(lambda v: evaluate(phi, np.maximum(v, 0.0))), radii)
    with np.errstate(invalid="ignore"):
        ok = (lhs <= rhs * (1 + rtol) + rtol) | np.isposinf(rhs)
    return bool(np.all(ok))


def compare(lhs: float, rhs: float, tol: float = TOL_CMP) -> bool:
    """lhs >= rhs - tol * min(lhs, rhs), with the extended-real conventions."""
    if math.isinf(lhs) and lhs > 0:
        return True
    if math.isinf(rhs):
        return False
    return lhs >= rhs - tol * min(abs(lhs), abs(rhs))


def verify_lemma31(K: RadialField, phi: MonotoneMap, p: float, tol: float = TOL_CMP) -> VerificationRecord:
    """Evaluate both sides and compare them."""
    if not p > 0:
        raise ValueError("p must be positive")
    n = K.n
    notes = []
    if not check_convex(phi):
        notes.append("Phi failed the convexity check; the inequality is not guaranteed")

    def g_lhs(s):
        with np.errstate(divide="ignore", over="ignore", invalid="ignore"):
            k = spherical_average(K, np.exp(-s))
            return np.power(np.maximum(k, 0.0), -1.0 / p)

    lhs_int = half_line_integral(g_lhs)
    lhs = lhs_int.value

    m_int = ball_mean_detail(K, phi)
    M = m_int.value
    if math.isinf(M):
        notes.append("M = inf: right-hand side is 0")
        rhs, rhs_tail, exact = 0.0, 0.0, True
    else:
        rep = tau_integral(phi, math.e * M, 1.0 / p, kind=ConditionKind("C29", p=p))
        if rep.verdict is Verdict.DIVERGENT:
            rhs, rhs_tail, exact = math.inf, math.inf, True
        elif rep.verdict is Verdict.CONVERGENT:
            rhs, rhs_tail, exact = rep.value / n, rep.tail_estimate / n, True
        else:
            rhs = (rep.head + float(np.sum(rep.block_sums))) / n
            rhs_tail, exact = math.nan, False
            notes.append("right-hand side inconclusive; partial sum is a lower bound")
    passed = compare(lhs, rhs, tol)
    jensen = jensen_check(K, phi) if not K.is_radial else True
    return VerificationRecord(lhs, rhs, M, p, n, passed, lhs_int.tail, rhs_tail, jensen, exact, tuple(notes))


# ---------------------------------------------------------------------------
# randomised suite


def random_convex_pwl(rng: np.random.Generator, blowup_prob: float = 0.0) -> MonotoneMap:
    """Convex table: increasing non-negative slopes on random knots."""
    m = int(rng.integers(2, 7))
    widths = rng.uniform(0.2, 2.0, m)
    knots = np.concatenate([[0.0], np.cumsum(widths)])
    slopes = np.sort(rng.uniform(0.0, 3.0, m))
    v0 = float(rng.uniform(0.0, 2.0))
    values = np.concatenate([[v0], v0 + np.cumsum(slopes * widths)])
    blowup = math.inf
    if rng.random() < blowup_prob:
        blowup = float(knots[-1] + rng.uniform(0.5, 3.0))
    return MonotoneMap.pwl(knots, values, blowup)


def random_trial(rng: np.random.Generator):
    """One (K, Phi, p) triple with convex Phi and K from the admissible shapes."""
    from .fields import make_field

    n = int(rng.choice([2, 3]))
    p = float(rng.choice([0.5, 1.0, 2.0, 3.0]))
    fam = rng.choice(["power", "affine", "exp_power", "pwl"])
    if fam == "power":
        alpha = float(rng.uniform(1.0, 3.0))
        phi = MonotoneMap.power_law(float(rng.uniform(0.5, 2.0)), alpha)
    elif fam == "affine":
        alpha = 1.0
        phi = MonotoneMap.affine(float(rng.uniform(0.5, 2.0)), float(rng.uniform(0.0, 2.0)))
    elif fam == "exp_power":
        alpha = 1.0
        phi = MonotoneMap.exp_power(float(rng.uniform(0.5, 1.5)), float(rng.uniform(1.0, 2.0)))
    else:
        alpha = 1.0
        phi = random_convex_pwl(rng)
    shape = rng.choice(["const", "inv_power", "x1_affine", "x1_inv_power"])
    c = float(rng.uniform(0.5, 3.0))
    # growth exponent alpha: Phi(c r^-a) r^(n-1) is integrable iff a alpha < n;
    # keep a alpha in [0.1 n, 0.85 n] or clearly past n.
    u = float(rng.choice([rng.uniform(0.1, 0.85), rng.uniform(1.0, 1.5)], p=[0.8, 0.2]))
    a = u * n / alpha
    if shape == "const":
        K = make_field("const", {"c": c}, n)
    elif shape == "inv_power":
        K = make_field("inv_power", {"c": c, "a": a}, n)
    elif shape == "x1_affine":
        K = make_field("x1_affine", {"c": c, "b": float(rng.uniform(-0.9, 0.9)) * c}, n)
    else:
        K = make_field("x1_inv_power", {"c": c, "b": float(rng.uniform(-0.9, 0.9)) * c, "a": a}, n)
    return K, phi, p


def sweep(trials: int = 100, seed: int = 0):
    """Run randomised trials; returns (records, descriptions)."""
    rng = np.random.default_rng(seed)
    records, desc = [], []
    for _ in range(trials):
        K, phi, p = random_trial(rng)
        records.append(verify_lemma31(K, phi, p))
        desc.append({"K": K.spec, "phi": phi.to_spec(), "p": p, "n": K.n})
    return records, desc
