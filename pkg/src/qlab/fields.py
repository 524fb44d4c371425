"""Scalar fields on the unit ball and their spherical averages."""

from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .monotone import SpecError

N_ANGLES_2D = 256
N_LAT_3D = 64
N_LON_3D = 128


@dataclass(frozen=True)
class RadialField:
    """K : B^n -> [0, inf], either radial (``K(r)``) or given pointwise.

    A pointwise field is a callable ``K(r, u)`` of radii ``r`` and unit
    directions ``u`` (broadcastable, ``u`` with trailing axis n).  Such
    fields are averaged over spheres with a fixed product rule and are
    limited to n in {2, 3}.
    """

    n: int
    radial: Callable | None = None
    pointwise: Callable | None = None
    spec: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        if self.n < 2:
            raise ValueError("dimension must be >= 2")
        if (self.radial is None) == (self.pointwise is None):
            raise ValueError("give exactly one of radial / pointwise")

    @property
    def is_radial(self) -> bool:
        return self.radial is not None

    def at(self, x):
        """Values at points ``x`` of shape (..., n)."""
        x = np.asarray(x, dtype=float)
        r = np.linalg.norm(x, axis=-1)
        with np.errstate(divide="ignore", over="ignore", invalid="ignore"):
            if self.is_radial:
                return self.radial(r)
            return self.pointwise(r, x / r[..., None])

    def compose(self, g: Callable, label: str = "") -> "RadialField":
        """The field g(K(x)); ``g`` acts elementwise on arrays."""
        if self.is_radial:
            inner = self.radial
            return RadialField(self.n, radial=lambda r: g(inner(r)), spec={"composed": label})
        inner_p = self.pointwise
        return RadialField(self.n, pointwise=lambda r, u: g(inner_p(r, u)), spec={"composed": label})


def _sphere_nodes(n):
    """Unit-sphere nodes and area weights summing to 1."""
    if n == 2:
        th = 2.0 * math.pi * np.arange(N_ANGLES_2D) / N_ANGLES_2D
        return np.stack([np.cos(th), np.sin(th)], axis=-1), np.full(N_ANGLES_2D, 1.0 / N_ANGLES_2D)
    if n == 3:
        z, wz = np.polynomial.legendre.leggauss(N_LAT_3D)
        lon = 2.0 * math.pi * np.arange(N_LON_3D) / N_LON_3D
        zz, ll = np.meshgrid(z, lon, indexing="ij")
        s = np.sqrt(1.0 - zz ** 2)
        pts = np.stack([s * np.cos(ll), s * np.sin(ll), zz], axis=-1).reshape(-1, 3)
        w = (np.repeat(wz, N_LON_3D) / 2.0) / N_LON_3D
        return pts, w
    raise ValueError("sampled fields are supported for n = 2, 3 only")


_NODE_CACHE: dict = {}


def sphere_nodes(n):
    if n not in _NODE_CACHE:
        _NODE_CACHE[n] = _sphere_nodes(n)
    return _NODE_CACHE[n]


def spherical_average(K: RadialField, r):
    """Area-measure average of K over the sphere |x| = r.

    ``r`` may be an array; radial fields return K(r) directly.
    """
    scalar = np.ndim(r) == 0
    r = np.atleast_1d(np.asarray(r, dtype=float))
    if np.any(r <= 0):
        raise ValueError("radius must be positive")
    if K.is_radial:
        with np.errstate(divide="ignore", over="ignore"):
            out = np.asarray(K.radial(r), dtype=float) * np.ones_like(r)
    else:
        pts, w = sphere_nodes(K.n)
        with np.errstate(divide="ignore", over="ignore"):
            vals = K.pointwise(r[:, None], pts[None, :, :])
        out = vals @ w
    return float(out[0]) if scalar else out


# ---------------------------------------------------------------------------
# spec grammar for fields

_FIELD_ARGS = {
    "const": ["c"],
    "inv_power": ["c", "a"],
    "log": ["c", "b"],
    "x1_affine": ["c", "b"],
    "x1_inv_power": ["c", "b", "a"],
}


def make_field(kind: str, params: dict, n: int) -> RadialField:
    """Field constructors::

        const:c             K = c
        inv_power:c,a       K = c |x|^-a
        log:c,b             K = c log(1/|x|) + b
        x1_affine:c,b       K = c + b x_1               (non-radial)
        x1_inv_power:c,b,a  K = (c + b x_1) |x|^-a      (non-radial)
    """
    if kind not in _FIELD_ARGS:
        raise SpecError(f"unknown field kind {kind!r}", "kind")
    try:
        vals = [float(params[k]) for k in _FIELD_ARGS[kind]]
    except KeyError as exc:
        raise SpecError("missing", f"params.{exc.args[0]}") from None
    spec = {"kind": kind, "params": dict(zip(_FIELD_ARGS[kind], vals))}
    if kind == "const":
        (c,) = vals
        if c < 0:
            raise SpecError("c must be >= 0", "params.c")
        return RadialField(n, radial=lambda r: np.full_like(np.asarray(r, dtype=float), c), spec=spec)
    if kind == "inv_power":
        c, a = vals
        if c < 0:
            raise SpecError("c must be >= 0", "params.c")
        return RadialField(n, radial=lambda r: c * np.power(r, -a), spec=spec)
    if kind == "log":
        c, b = vals
        if c < 0 or b < 0:
            raise SpecError("c and b must be >= 0", "params")
        return RadialField(n, radial=lambda r: c * np.log(1.0 / np.asarray(r)) + b, spec=spec)
    c, b = vals[0], vals[1]
    if c < abs(b):
        raise SpecError("need c >= |b| so the field stays non-negative", "params.b")
    a = vals[2] if kind == "x1_inv_power" else 0.0
    if n not in (2, 3):
        raise SpecError("non-radial fields need n in {2, 3}", "n")

    def pointwise(r, u):
        r = np.asarray(r, dtype=float)
        return (c + b * r * u[..., 0]) * np.power(r, -a)

    return RadialField(n, pointwise=pointwise, spec=spec)


def parse_field(text: str, n: int) -> RadialField:
    text = text.strip()
    if text.startswith("{") or os.path.isfile(text):
        try:
            if text.startswith("{"):
                spec = json.loads(text)
            else:
                with open(text) as fh:
                    spec = json.load(fh)
        except json.JSONDecodeError as exc:
            raise SpecError(f"invalid JSON: {exc}", "") from None
        if not isinstance(spec, dict) or "kind" not in spec:
            raise SpecError("field spec needs a 'kind'", "kind")
        return make_field(spec["kind"], spec.get("params", {}), n)
    if ":" not in text:
        raise SpecError(f"expected kind:params, got {text!r}", "kind")
    kind, rest = text.split(":", 1)
    names = _FIELD_ARGS.get(kind.strip())
    if names is None:
        raise SpecError(f"unknown field kind {kind!r}", "kind")
    try:
        nums = [float(v) for v in rest.split(",") if v.strip()]
    except ValueError:
        raise SpecError(f"non-numeric parameter in {text!r}", "params") from None
    if len(nums) != len(names):
        raise SpecError(f"{kind} takes {len(names)} parameters", "params")
    return make_field(kind.strip(), dict(zip(names, nums)), n)
