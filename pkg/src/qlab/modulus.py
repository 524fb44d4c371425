"""Dimension constants, ring modulus and spherical (n-1)-norms."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .classifier import ConditionReport, report_from_blocks
from .fields import RadialField, spherical_average
from .quadrature import KMAX, RTOL, dyadic_blocks


@dataclass(frozen=True)
class DimensionConstants:
    n: int
    omega: float   # area of the unit sphere in R^n
    Omega: float   # volume of the unit ball in R^n


def dimension_constants(n: int) -> DimensionConstants:
    """Omega_n = pi^(n/2) / Gamma(n/2 + 1) and omega = n Omega_n."""
    if int(n) != n or n < 2:
        raise ValueError("dimension must be an integer >= 2")
    n = int(n)
    Omega = math.pi ** (n / 2) / math.gamma(n / 2 + 1)
    return DimensionConstants(n, n * Omega, Omega)


def sphere_area(n: int) -> float:
    return dimension_constants(n).omega


def ring_modulus(r: float, R: float, n: int) -> float:
    """Modulus of the curves joining the boundary spheres of r < |x| < R."""
    if not (0 < r < R):
        raise ValueError("need 0 < r < R")
    if math.isinf(R):
        return 0.0
    return sphere_area(n) * math.log(R / r) ** (1 - n)


def ring_lower_bound_shape(r: float, R: float) -> float:
    """log(R/r): the shape of the separation lower bound, constant omitted."""
    if not (0 < r < R):
        raise ValueError("need 0 < r < R")
    return math.log(R / r)


_ARC_NODES, _ARC_WEIGHTS = np.polynomial.legendre.leggauss(128)


def _boundary_arc_integral(Q: RadialField, r: float) -> float:
    """int of Q over the arc of |x - e1| = r lying inside the unit disk (n = 2)."""
    if not 0 < r < 2:
        raise ValueError("boundary arcs need 0 < r < 2")
    half = math.acos(r / 2.0)
    th = math.pi + half * _ARC_NODES
    pts = np.stack([1.0 + r * np.cos(th), r * np.sin(th)], axis=-1)
    return float(r * half * np.dot(_ARC_WEIGHTS, Q.at(pts)))


def spherical_norm(Q: RadialField, r, center: str = "origin"):
    """(int over S(x0, r) within the ball of Q^(n-1) dA)^(1/(n-1)).

    ``center`` is ``"origin"`` (any n) or ``"boundary"`` (x0 = e1, n = 2
    only).  ``r`` may be an array for the origin case.
    """
    n = Q.n
    if center == "boundary":
        if n != 2:
            raise ValueError("boundary-centred norms are implemented for n = 2 only")
        return _boundary_arc_integral(Q, float(r))
    if center != "origin":
        raise ValueError(f"unknown center {center!r}")
    Qp = Q if n == 2 else Q.compose(lambda v: np.power(v, n - 1.0), "Q^(n-1)")
    mean = spherical_average(Qp, r)
    with np.errstate(over="ignore"):
        total = mean * sphere_area(n) * np.power(r, n - 1.0)
        return total if n == 2 else np.power(total, 1.0 / (n - 1))


@dataclass(frozen=True)
class NormCondition:
    """Stands in for a ConditionKind in reports of norm_divergence."""

    delta: float

    @property
    def label(self) -> str:
        return f"int_0^{self.delta:g} dr/||Q||"


@dataclass(frozen=True)
class SphericalNormProfile:
    radii: np.ndarray
    norms: np.ndarray
    n: int


def norm_profile(Q: RadialField, delta: float, points: int = 64) -> SphericalNormProfile:
    radii = np.geomspace(delta * 1e-6, delta, points)
    return SphericalNormProfile(radii, np.asarray(spherical_norm(Q, radii), dtype=float), Q.n)


def norm_divergence(Q: RadialField, delta: float, kmax: int = KMAX, rtol: float = RTOL) -> ConditionReport:
    """Classify int_0^delta dr / ||Q||_(n-1)(r) with blocks mirrored toward 0."""
    if not 0 < delta < 1:
        raise ValueError("need 0 < delta < 1")

    def f(r):
        with np.errstate(divide="ignore"):
            return 1.0 / np.asarray(spherical_norm(Q, r), dtype=float)

    blocks = dyadic_blocks(f, delta, kmax, direction=-1, rtol=rtol)
    return report_from_blocks(NormCondition(delta), blocks, delta, 0.0, "r")
