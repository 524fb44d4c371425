"""Radial stretch map with prescribed outer dilatation and a non-removable puncture.

Given a non-decreasing phi with linear growth and a convergent
int d tau / (tau phi^-1(tau)), the profile K(r) solves

    K(r) phi(K(r)) = (gamma / r)^2,     gamma = sqrt(phi(1)),

on (0, 1], and f(x) = x/|x| exp(I(|x|)) with I(t) = int_0^t dr / (r K(r))
maps the punctured ball onto the ring 1 < |y| < exp(I(1)) with outer
dilatation K(|x|), finite phi-energy and no limit at the origin.
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass

import numpy as np
from scipy.interpolate import CubicHermiteSpline

from . import _pykernels as pk
from ._backend import kernels
from .classifier import ConditionKind, classify, tau_integral
from .modulus import sphere_area
from .monotone import MonotoneMap, evaluate, generalized_inverse
from .quadrature import KMAX, RTOL, Verdict, block_verdict

TOL_FE = 1e-10
TOL_SOLVE = 1e-13
TOL_CMP = 1e-6
R_MIN = 1e-6
GRID_SIZE = 4096
GROWTH_SCAN = 2.0 ** np.arange(0, 81)
GROWTH_WINDOW = 5
GROWTH_DECAY = 0.9

# 3-point Gauss-Legendre on [0, 1]
_GL_X = 0.5 + 0.5 * np.array([-math.sqrt(0.6), 0.0, math.sqrt(0.6)])
_GL_W = np.array([5.0, 8.0, 5.0]) / 18.0


class ExtremalError(ValueError):
    """phi is unsuitable for the construction, or the profile solve failed."""


@dataclass(frozen=True)
class GrowthWitness:
    C: float
    T: float


def growth_witness(phi: MonotoneMap, scan=GROWTH_SCAN) -> GrowthWitness | None:
    """(C, T) with phi(t) >= C t on the scan points t >= T, or None.

    The ratios phi(t)/t on a doubling grid must not keep decaying
    geometrically over the last few points; C is then their minimum past
    the last vanishing ratio.
    """
    t = np.asarray(scan, dtype=float)
    with np.errstate(over="ignore", invalid="ignore"):
        ratio = evaluate(phi, t) / t
    tail = ratio[-GROWTH_WINDOW:]
    if not np.all(tail > 0):
        return None
    with np.errstate(invalid="ignore"):
        steps = tail[1:] / tail[:-1]
    if np.any(steps < GROWTH_DECAY):
        return None
    zero = np.nonzero(~(ratio > 0))[0]
    k0 = int(zero[-1]) + 1 if len(zero) else 0
    return GrowthWitness(float(np.min(ratio[k0:])), float(t[k0]))


def normalize_phi(phi: MonotoneMap) -> MonotoneMap:
    """The identity on [0, 1) and max(phi(t), t) from 1 on.

    Rejects phi without a linear-growth witness, and phi whose
    int d tau / (tau phi^-1(tau)) is not classified Convergent.
    """
    if phi.normalized:
        return phi
    if growth_witness(phi) is None:
        raise ExtremalError("no linear growth witness phi(t) >= C t was found")
    rep = classify(phi, ConditionKind("L51"))
    if rep.verdict is Verdict.DIVERGENT:
        raise ExtremalError("int d tau/(tau phi^-1(tau)) diverges; the puncture is removable")
    if rep.verdict is not Verdict.CONVERGENT:
        raise ExtremalError(f"convergence of int d tau/(tau phi^-1(tau)) undecided: {rep.note}")
    return dataclasses.replace(phi, normalized=True)


def solve_k(phi: MonotoneMap, gamma: float, r, tol: float = TOL_SOLVE):
    """K(r) from K phi(K) = (gamma/r)^2 by bisection on [phi^-1(gamma/r), gamma/r].

    Returns (K, relative residual).
    """
    r = np.atleast_1d(np.asarray(r, dtype=float))
    hi = gamma / r
    lo = np.minimum(np.asarray(generalized_inverse(phi, hi), dtype=float), hi)
    K, res, ok = kernels.solve_psi(*phi.packed, hi * hi, lo, hi, tol, 200)
    if not np.all(ok):
        bad = float(r[~ok][0])
        raise ExtremalError(f"bracket does not enclose the root at r={bad:g}; K*phi(K) is not increasing")
    return np.asarray(K), np.asarray(res)


@dataclass(frozen=True)
class DistortionProfile:
    """Solved K on a log grid of [r_min, 1] with the cumulative I table."""

    phi: MonotoneMap
    gamma: float
    r_grid: np.ndarray
    K_values: np.ndarray
    I_table: np.ndarray
    residual: float
    tail_I: float
    tail_bound: float
    tail_exponent: float
    tail_model: str
    K_nodes: np.ndarray
    _spline: CubicHermiteSpline = dataclasses.field(repr=False, compare=False)

    @property
    def r_min(self) -> float:
        return float(self.r_grid[0])

    def K(self, r):
        """K at arbitrary radii, solved directly."""
        scalar = np.ndim(r) == 0
        K, _ = solve_k(self.phi, self.gamma, r)
        return float(K[0]) if scalar else K

    def I(self, t):
        """int_0^t dr / (r K(r)); Hermite interpolation inside the grid."""
        scalar = np.ndim(t) == 0
        t = np.atleast_1d(np.asarray(t, dtype=float))
        if np.any(t <= 0) or np.any(t > 1):
            raise ValueError("I is defined on (0, 1]")
        out = np.empty_like(t)
        inside = t >= self.r_min
        out[inside] = self._spline(np.log(t[inside]))
        low = ~inside
        if np.any(low):
            out[low] = self._tail_I(t[low])
        return float(out[0]) if scalar else out

    def _tail_I(self, t):
        K = np.atleast_1d(self.K(t))
        return np.array([_tail_by_parts(self.phi, k)[0] for k in K])

    def rho(self, t):
        return np.exp(self.I(t))

    @property
    def invariants(self) -> dict:
        K = self.K_values
        r = self.r_grid
        lower = np.asarray(generalized_inverse(self.phi, self.gamma / r), dtype=float)
        return {
            "K_at_1": float(K[-1]),
            "K_decreasing": bool(np.all(np.diff(K) < 0)),
            "residual": self.residual,
            "residual_ok": self.residual <= TOL_FE,
            "upper_bound_ok": bool(np.all(K <= (self.gamma / r) * (1 + TOL_FE))),
            "lower_bound_ok": bool(np.all(K >= lower * (1 - TOL_FE))),
            "I_nondecreasing": bool(np.all(np.diff(self.I_table) >= 0)),
            "I_finite": bool(np.isfinite(self.I_table[-1])),
        }


def _tail_bound(phi, gamma, t):
    """int_{gamma/t}^inf d tau / (tau phi^-1(tau)), an upper bound for I(t)."""
    rep = tau_integral(phi, gamma / t, 1.0)
    return rep.value if rep.verdict is Verdict.CONVERGENT else math.inf


def _tail_by_parts(phi, K0):
    """I(r0) for the radius r0 where K = K0, from the K-parametrization.

    With r = gamma / sqrt(K phi(K)) and H = log phi, integration by parts gives
    I(r0) = (1 - H(K0)) / (2 K0) + 1/2 int_{K0}^inf H(K) / K^2 dK.
    Returns (value, note); value is inf if the integral is not summable.
    """
    blocks = kernels.block_sums(pk.KIND_LOG_T2, *phi.packed, K0, KMAX, 1, 1.0, RTOL)
    dec = block_verdict(blocks)
    if not math.isfinite(dec.tail_estimate):
        return math.inf, dec.note
    h0 = float(kernels.map_log_eval(*phi.packed, np.array([K0]))[0])
    return (1.0 - h0) / (2.0 * K0) + 0.5 * (float(np.sum(blocks)) + dec.tail_estimate), dec.note


def solve_profile(phi: MonotoneMap, grid_size: int = GRID_SIZE, r_min: float = R_MIN) -> DistortionProfile:
    """Solve K on a log grid and tabulate I.

    I between grid points is integrated with 3-point Gauss-Legendre in
    log r.  I(r_min) itself comes from an integral over K >= K(r_min)
    (see ``_tail_by_parts``); if that is not summable, the bound
    int_{gamma/r_min}^inf d tau/(tau phi^-1) is used instead.
    """
    if grid_size < 2:
        raise ValueError("grid_size must be at least 2")
    if not 0 < r_min < 1:
        raise ValueError("r_min must lie in (0, 1)")
    phi = normalize_phi(phi)
    gamma = math.sqrt(float(evaluate(phi, 1.0)))
    x = np.linspace(math.log(r_min), 0.0, grid_size)
    r = np.exp(x)
    r[0], r[-1] = r_min, 1.0
    K, res = solve_k(phi, gamma, r)
    h = np.diff(x)
    xq = (x[:-1, None] + h[:, None] * _GL_X[None, :]).ravel()
    Kq, resq = solve_k(phi, gamma, np.exp(xq))
    Kq = Kq.reshape(-1, 3)
    cells = h * ((1.0 / Kq) @ _GL_W)

    bound = _tail_bound(phi, gamma, r_min)
    # local exponent of K at r_min, used only for the n > 2 energy tail
    a = -(math.log(K[1]) - math.log(K[0])) / (x[1] - x[0])
    tail, _ = _tail_by_parts(phi, float(K[0]))
    model = "by parts"
    if not math.isfinite(tail) or tail > bound * (1 + TOL_CMP):
        tail, model = bound, "bound"
    if not math.isfinite(tail):
        raise ExtremalError("I(r_min) is not finite")
    I_table = tail + np.concatenate([[0.0], np.cumsum(cells)])
    spline = CubicHermiteSpline(x, I_table, 1.0 / K)
    residual = float(max(res.max(), resq.max()))
    return DistortionProfile(phi, gamma, r, K, I_table, residual, float(tail), float(bound),
                             float(a), model, Kq, spline)


@dataclass(frozen=True)
class Distortions:
    tangential: float
    radial: float
    K_O: float


@dataclass(frozen=True)
class BoundaryReport:
    t: np.ndarray
    rho: np.ndarray
    oscillation: np.ndarray
    rho_monotone: bool
    oscillation_ok: bool
    R: float


@dataclass(frozen=True)
class ExtremalMap:
    n: int
    profile: DistortionProfile

    def __post_init__(self):
        if self.n < 2:
            raise ValueError("dimension must be >= 2")

    @classmethod
    def build(cls, phi: MonotoneMap, n: int, grid_size: int = GRID_SIZE, r_min: float = R_MIN):
        return cls(n, solve_profile(phi, grid_size, r_min))

    @property
    def R(self) -> float:
        return math.exp(self.profile.I_table[-1])

    @property
    def gamma(self) -> float:
        return self.profile.gamma

    def eval_map(self, x):
        """f(x) = x/|x| exp(I(|x|)) for points 0 < |x| < 1 (last axis n)."""
        x = np.asarray(x, dtype=float)
        if x.shape[-1] != self.n:
            raise ValueError(f"points must have {self.n} coordinates")
        r = np.linalg.norm(x, axis=-1)
        if np.any(r <= 0) or np.any(r >= 1):
            raise ValueError("eval_map needs 0 < |x| < 1")
        rho = self.profile.rho(np.atleast_1d(r)).reshape(r.shape)
        return x * (rho / r)[..., None]

    def distortions(self, r: float) -> Distortions:
        if not 0 < r < 1:
            raise ValueError("need 0 < r < 1")
        rho = float(self.profile.rho(r))
        K = self.profile.K(r)
        tang, rad = rho / r, rho / (r * K)
        if rad > tang * (1 + TOL_FE):
            raise ArithmeticError("radial distortion exceeds tangential distortion")
        return Distortions(tang, rad, K)

    def phi_energy(self):
        """(energy, bound): omega int_0^1 phi(K) r^(n-1) dr and gamma^2 omega I(1)."""
        p = self.profile
        omega = sphere_area(self.n)
        x = np.log(p.r_grid)
        h = np.diff(x)
        xq = x[:-1, None] + h[:, None] * _GL_X[None, :]
        # phi(K) r^(n-1) dr = gamma^2 r^(n-2) / K d(log r)
        weight = np.exp((self.n - 2) * xq) / p.K_nodes
        head = float(np.sum(h * (weight @ _GL_W)))
        # int_0^r_min r^(n-2) dr / (r K): exact in the plane; for n > 2 a
        # power-law K gives the first form, and r^(n-2) <= r_min^(n-2) the cap
        tail = p.r_min ** (self.n - 2) * p.tail_I
        if self.n > 2 and p.tail_exponent > 0:
            tail = min(tail, p.r_min ** (self.n - 2) / ((self.n - 2 + p.tail_exponent) * p.K_values[0]))
        energy = float(omega * p.gamma ** 2 * (head + tail))
        bound = p.gamma ** 2 * omega * float(p.I_table[-1])
        if energy > bound * (1 + TOL_CMP):
            raise ArithmeticError(f"energy {energy} exceeds the bound {bound}")
        return energy, bound

    def boundary_report(self, t_probe) -> BoundaryReport:
        t = np.asarray(t_probe, dtype=float)
        if np.any(t <= 0) or np.any(t >= 1):
            raise ValueError("probes must lie in (0, 1)")
        rho = np.atleast_1d(self.profile.rho(t))
        order = np.argsort(t)
        monotone = bool(np.all(np.diff(rho[order]) >= 0) and np.all(rho > 1))
        osc = 2.0 * rho
        return BoundaryReport(t, rho, osc, monotone, bool(np.all(osc > 2.0)), self.R)

    def table(self):
        """Rows (r, K, I, rho, phi(K)) on the profile grid."""
        p = self.profile
        return np.column_stack([p.r_grid, p.K_values, p.I_table, np.exp(p.I_table),
                                evaluate(p.phi, p.K_values)])

    def summary(self) -> dict:
        energy, bound = self.phi_energy()
        p = self.profile
        return {"gamma": p.gamma, "R": self.R, "I1": float(p.I_table[-1]), "energy": energy,
                "bound": bound, "n": self.n, "grid": int(len(p.r_grid)), "r_min": p.r_min,
                "residual": p.residual, "tail_model": p.tail_model, "tail_I": p.tail_I}
