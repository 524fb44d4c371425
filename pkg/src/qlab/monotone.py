"""Extended-real calculus for non-decreasing maps [0, inf] -> [0, inf].

Four families are supported, plus the composition t -> Phi(t**p)::

    power      c * t**alpha
    exp_power  exp(alpha * t**beta) - 1 + tau0
    affine     a * t + b
    pwl        piecewise linear (or step) table through (knots, values),
               continued with the last slope and sent to +inf at an optional
               blow-up abscissa

The wire format for a map is ``{"family": ..., "params": {...}}``; an inline
shorthand ``family:p1,p2,...`` is accepted by :func:`parse_spec`.
"""

from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from ._backend import kernels
from ._pykernels import FAM_AFFINE, FAM_EXP_POWER, FAM_POWER, FAM_PWL, FAM_STEP

INF = math.inf
TOL_INV = 1e-10
TOL_CONV = 1e-9

_FAMILY_CODES = {
    "power": FAM_POWER,
    "exp_power": FAM_EXP_POWER,
    "affine": FAM_AFFINE,
    "pwl": FAM_PWL,
    "step": FAM_STEP,
}


class SpecError(ValueError):
    """A function spec is malformed.  ``field`` names the offending entry."""

    def __init__(self, message: str, field: str = ""):
        super().__init__(f"{field}: {message}" if field else message)
        self.field = field
        self.message = message


@dataclass(frozen=True)
class MonotoneMap:
    """A non-decreasing map ``t -> Phi(t**power)`` from [0, inf] to [0, inf].

    Use the classmethod constructors rather than building one directly;
    they validate the parameters.  Instances are immutable and callable.
    """

    family: str
    params: tuple = ()
    knots: tuple = ()
    values: tuple = ()
    blowup: float = INF
    power: float = 1.0
    normalized: bool = False
    _packed: tuple = field(default=None, init=False, repr=False, compare=False)

    def __post_init__(self):
        if self.family not in _FAMILY_CODES:
            raise SpecError(f"unknown family {self.family!r}", "family")
        if not (self.power > 0 and math.isfinite(self.power)):
            raise SpecError("composition power must be positive", "power")
        if not self.blowup > 0:
            raise SpecError("blow-up point must be positive", "params.blowup")
        if self.family in ("pwl", "step"):
            _check_table(self.knots, self.values, self.blowup)
        else:
            _check_analytic(self.family, self.params)
        object.__setattr__(self, "_packed", self._pack())

    # -- constructors -----------------------------------------------------

    @classmethod
    def power_law(cls, c: float, alpha: float) -> "MonotoneMap":
        return cls("power", (float(c), float(alpha)))

    @classmethod
    def exp_power(cls, alpha: float, beta: float, tau0: float = 1.0) -> "MonotoneMap":
        return cls("exp_power", (float(alpha), float(beta), float(tau0)))

    @classmethod
    def affine(cls, a: float, b: float) -> "MonotoneMap":
        return cls("affine", (float(a), float(b)))

    @classmethod
    def pwl(cls, knots: Sequence[float], values: Sequence[float], blowup: float = INF) -> "MonotoneMap":
        return cls("pwl", (), tuple(map(float, knots)), tuple(map(float, values)), float(blowup))

    @classmethod
    def step(cls, knots: Sequence[float], values: Sequence[float], blowup: float = INF) -> "MonotoneMap":
        return cls("step", (), tuple(map(float, knots)), tuple(map(float, values)), float(blowup))

    # -- packed form for the kernels --------------------------------------

    def _pack(self):
        prm = np.zeros(8)
        prm[: len(self.params)] = self.params
        prm[3] = self.power
        prm[4] = 1.0 if self.normalized else 0.0
        prm[5] = self.blowup
        knots = np.asarray(self.knots, dtype=float)
        values = np.asarray(self.values, dtype=float)
        if self.family == "pwl" and len(knots) > 1:
            prm[6] = (values[-1] - values[-2]) / (knots[-1] - knots[-2])
        return (_FAMILY_CODES[self.family], prm, knots, values)

    @property
    def packed(self):
        return self._packed

    # -- evaluation -------------------------------------------------------

    def __call__(self, t):
        return evaluate(self, t)

    def inverse(self, tau):
        return generalized_inverse(self, tau)

    def log(self, t):
        """H(t) = log Phi(t), overflow-free for the exponential family."""
        scalar = np.ndim(t) == 0
        out = kernels.map_log_eval(*self._packed, np.atleast_1d(np.asarray(t, dtype=float)))
        return float(out[0]) if scalar else out

    @property
    def tau0(self) -> float:
        """Phi(0)."""
        return float(evaluate(self, 0.0))

    @property
    def t0(self) -> float:
        """sup{t : Phi(t) = 0}; zero when Phi(0) > 0."""
        if self.tau0 > 0:
            return 0.0
        if self.normalized:
            return 0.0
        fam = self.family
        if fam in ("power", "exp_power"):
            return 0.0
        if fam == "affine":
            base = 0.0 if self.params[0] > 0 else INF
        else:
            vals = np.asarray(self.values)
            last_zero = int(np.nonzero(vals == 0.0)[0][-1])
            if last_zero == len(vals) - 1:
                slope = self._packed[1][6]
                base = self.knots[-1] if (fam == "pwl" and slope > 0) else self.blowup
            elif fam == "step":
                base = self.knots[last_zero + 1]
            else:
                base = self.knots[last_zero]
        return min(base, self.blowup) ** (1.0 / self.power)

    @property
    def sup(self) -> float:
        """Phi(inf)."""
        return float(evaluate(self, INF))

    # -- wire format ------------------------------------------------------

    def to_spec(self) -> dict:
        if self.family == "power":
            params = {"c": self.params[0], "alpha": self.params[1]}
        elif self.family == "exp_power":
            params = {"alpha": self.params[0], "beta": self.params[1], "tau0": self.params[2]}
        elif self.family == "affine":
            params = {"a": self.params[0], "b": self.params[1]}
        else:
            params = {"knots": list(self.knots), "values": list(self.values)}
            if self.family == "step":
                params["step"] = True
        if math.isfinite(self.blowup):
            params["blowup"] = self.blowup
        spec = {"family": "pwl" if self.family == "step" else self.family, "params": params}
        if self.power != 1.0:
            spec["power"] = self.power
        if self.normalized:
            spec["normalized"] = True
        return spec


def _check_analytic(family, params):
    need = {"power": 2, "exp_power": 3, "affine": 2}[family]
    if len(params) != need:
        raise SpecError(f"{family} takes {need} parameters, got {len(params)}", "params")
    if any(not math.isfinite(p) for p in params):
        raise SpecError("parameters must be finite", "params")
    if family == "power":
        if params[0] <= 0:
            raise SpecError("c must be > 0", "params.c")
        if params[1] <= 0:
            raise SpecError("alpha must be > 0", "params.alpha")
    elif family == "exp_power":
        if params[0] <= 0:
            raise SpecError("alpha must be > 0", "params.alpha")
        if params[1] <= 0:
            raise SpecError("beta must be > 0", "params.beta")
        if params[2] < 0:
            raise SpecError("tau0 must be >= 0", "params.tau0")
    else:
        if params[0] < 0:
            raise SpecError("a must be >= 0", "params.a")
        if params[1] < 0:
            raise SpecError("b must be >= 0", "params.b")


def _check_table(knots, values, blowup):
    if len(knots) == 0 or len(knots) != len(values):
        raise SpecError("knots and values must be non-empty and of equal length", "params.knots")
    k = np.asarray(knots, dtype=float)
    v = np.asarray(values, dtype=float)
    if k[0] != 0.0:
        raise SpecError("first knot must be 0", "params.knots")
    if not np.all(np.isfinite(k)) or not np.all(np.isfinite(v)):
        raise SpecError("knots and values must be finite", "params.values")
    if np.any(np.diff(k) <= 0):
        raise SpecError("knots must be strictly increasing", "params.knots")
    if np.any(np.diff(v) < 0):
        raise SpecError("values must be non-decreasing", "params.values")
    if v[0] < 0:
        raise SpecError("values must be >= 0", "params.values")
    if blowup <= k[-1] and math.isfinite(blowup):
        raise SpecError("blow-up point must lie beyond the last knot", "params.blowup")


# ---------------------------------------------------------------------------
# operations


def evaluate(phi: MonotoneMap, t):
    """Phi(t) for scalar or array ``t`` in [0, inf]."""
    scalar = np.ndim(t) == 0
    arr = np.atleast_1d(np.asarray(t, dtype=float))
    if np.any(arr < 0) or np.any(np.isnan(arr)):
        raise ValueError("Phi is defined on [0, inf] only")
    out = kernels.map_eval(*phi.packed, arr)
    return float(out[0]) if scalar else out


def generalized_inverse(phi: MonotoneMap, tau, method: str = "auto", tol: float = TOL_INV):
    """inf{t : Phi(t) >= tau}, with inf of the empty set equal to +inf.

    ``method="auto"`` uses closed forms for the analytic families and binary
    search on tables; ``method="bisect"`` forces bracketed bisection on
    evaluations of Phi, which is what composed tables use anyway.
    """
    scalar = np.ndim(tau) == 0
    arr = np.atleast_1d(np.asarray(tau, dtype=float))
    if np.any(np.isnan(arr)):
        raise ValueError("tau must not be NaN")
    if method == "auto":
        out = kernels.map_inverse(*phi.packed, arr, tol)
    elif method == "bisect":
        out = kernels.bisect_inverse(*phi.packed, arr, tol)
    else:
        raise ValueError(f"unknown method {method!r}")
    return float(out[0]) if scalar else out


def power_compose(phi: MonotoneMap, p: float) -> MonotoneMap:
    """Phi_p(t) = Phi(t**p)."""
    if not p > 0:
        raise ValueError("p must be positive")
    if phi.normalized:
        raise ValueError("cannot compose an identity-floored map")
    return replace(phi, power=phi.power * p)


@dataclass(frozen=True)
class LogMap:
    """H_p(t) = log Phi_p(t), with H_p = -inf where Phi_p vanishes."""

    base: MonotoneMap

    def __call__(self, t):
        return self.base.log(t)

    def inverse(self, eta):
        """H_p^-1(eta) = Phi_p^-1(e^eta), computed in log space."""
        scalar = np.ndim(eta) == 0
        arr = np.atleast_1d(np.asarray(eta, dtype=float))
        out = kernels.map_inverse_exp(*self.base.packed, arr, TOL_INV)
        return float(out[0]) if scalar else out

    @property
    def at_zero(self) -> float:
        """H_p(+0)."""
        v = self.base.tau0
        return math.log(v) if v > 0 else -INF


def log_transform(phi: MonotoneMap, p: float = 1.0) -> LogMap:
    return LogMap(power_compose(phi, p))


@dataclass(frozen=True)
class ConvexityReport:
    convex: bool
    worst_violation: float
    worst_pair: tuple | None
    inclination_monotone: bool
    worst_inclination_drop: float

    def __bool__(self):
        return self.convex and self.inclination_monotone


def default_grid() -> np.ndarray:
    return np.unique(np.concatenate([np.linspace(0.0, 2.0, 81), np.geomspace(2.0, 200.0, 60)]))


def check_convex(phi: MonotoneMap, grid=None, tol: float = TOL_CONV) -> ConvexityReport:
    """Midpoint convexity on all grid pairs plus monotone inclination.

    The inclination test checks that (Phi(t) - Phi(0)) / t does not decrease
    along the positive grid points.  Slack is ``tol`` plus a few ulps of the
    compared magnitude.
    """
    t = np.unique(np.asarray(default_grid() if grid is None else grid, dtype=float))
    if np.any(t < 0) or not np.all(np.isfinite(t)):
        raise ValueError("grid must lie in [0, inf)")
    v = evaluate(phi, t)
    i, j = np.triu_indices(len(t), k=1)
    mid_vals = evaluate(phi, 0.5 * (t[i] + t[j]))
    rhs = 0.5 * (v[i] + v[j])
    with np.errstate(invalid="ignore"):
        slack = tol + 8 * np.finfo(float).eps * np.abs(rhs)
        viol = np.where(np.isinf(rhs), -INF, mid_vals - rhs - slack)
    viol = np.nan_to_num(viol, nan=-INF)
    worst = int(np.argmax(viol)) if len(viol) else 0
    worst_v = float(viol[worst]) if len(viol) else -INF
    convex = worst_v <= 0
    pair = (float(t[i[worst]]), float(t[j[worst]])) if len(viol) and not convex else None

    pos = t > 0
    incl_ok, drop = True, 0.0
    if np.count_nonzero(pos) > 1:
        with np.errstate(invalid="ignore"):
            incl = (v[pos] - phi.tau0) / t[pos]
        finite = np.isfinite(incl)
        incl = incl[finite]
        if len(incl) > 1:
            d = incl[:-1] - incl[1:] - (tol + 8 * np.finfo(float).eps * np.abs(incl[:-1]))
            drop = float(max(d.max(), 0.0))
            incl_ok = drop == 0.0
    return ConvexityReport(convex, max(worst_v, 0.0), pair, incl_ok, drop)


# ---------------------------------------------------------------------------
# spec parsing


def from_spec(spec: dict) -> MonotoneMap:
    """Build a map from the JSON wire format."""
    if not isinstance(spec, dict):
        raise SpecError("spec must be a JSON object", "")
    fam = spec.get("family")
    if fam not in ("power", "exp_power", "affine", "pwl"):
        raise SpecError(f"family must be one of power, exp_power, affine, pwl (got {fam!r})", "family")
    params = spec.get("params", {})
    if not isinstance(params, dict):
        raise SpecError("params must be an object", "params")

    def get(name, default=None):
        if name in params:
            try:
                return float(params[name])
            except (TypeError, ValueError):
                raise SpecError("must be a number", f"params.{name}") from None
        if default is None:
            raise SpecError("missing", f"params.{name}")
        return default

    blowup = get("blowup", INF)
    if fam == "power":
        phi = MonotoneMap("power", (get("c", 1.0), get("alpha")), blowup=blowup)
    elif fam == "exp_power":
        phi = MonotoneMap("exp_power", (get("alpha"), get("beta"), get("tau0", 1.0)), blowup=blowup)
    elif fam == "affine":
        phi = MonotoneMap("affine", (get("a"), get("b")), blowup=blowup)
    else:
        if "knots" not in params or "values" not in params:
            raise SpecError("pwl needs knots and values", "params.knots")
        try:
            knots = tuple(float(x) for x in params["knots"])
            values = tuple(float(x) for x in params["values"])
        except (TypeError, ValueError):
            raise SpecError("knots/values must be numeric lists", "params.knots") from None
        family = "step" if params.get("step") else "pwl"
        phi = MonotoneMap(family, (), knots, values, blowup)
    try:
        power = float(spec.get("power", 1.0))
    except (TypeError, ValueError):
        raise SpecError("must be a number", "power") from None
    if power != 1.0:
        phi = power_compose(phi, power)
    if spec.get("normalized"):
        phi = replace(phi, normalized=True)
    return phi


def parse_inline(text: str) -> dict:
    """Inline grammar::

        power:c,alpha            exp_power:alpha,beta[,tau0]     affine:a,b
        pwl:t0:v0,t1:v1,...[;blowup=B]       step:t0:v0,t1:v1,...
    """
    if ":" not in text:
        raise SpecError(f"expected family:params, got {text!r}", "family")
    fam, rest = text.split(":", 1)
    fam = fam.strip()
    try:
        if fam in ("pwl", "step"):
            body, _, opt = rest.partition(";")
            pairs = [p.split(":") for p in body.split(",") if p.strip()]
            if any(len(p) != 2 for p in pairs):
                raise SpecError("pwl pairs must look like t:v", "params.knots")
            params = {"knots": [float(a) for a, _ in pairs], "values": [float(b) for _, b in pairs]}
            if fam == "step":
                params["step"] = True
            if opt:
                key, _, val = opt.partition("=")
                if key.strip() != "blowup":
                    raise SpecError(f"unknown option {key!r}", "params")
                params["blowup"] = float(val)
            return {"family": "pwl", "params": params}
        nums = [float(x) for x in rest.split(",") if x.strip()]
    except ValueError:
        raise SpecError(f"non-numeric parameter in {text!r}", "params") from None
    names = {"power": ["c", "alpha"], "exp_power": ["alpha", "beta", "tau0"], "affine": ["a", "b"]}
    if fam not in names:
        raise SpecError(f"unknown family {fam!r}", "family")
    if len(nums) > len(names[fam]) or len(nums) < 2:
        raise SpecError(f"{fam} takes {len(names[fam])} parameters", "params")
    return {"family": fam, "params": dict(zip(names[fam], nums))}


def parse_spec(text: str) -> MonotoneMap:
    """Accepts a JSON file path, a JSON string, or the inline shorthand."""
    text = text.strip()
    if text.startswith("{"):
        try:
            return from_spec(json.loads(text))
        except json.JSONDecodeError as exc:
            raise SpecError(f"invalid JSON: {exc}", "") from None
    if os.path.isfile(text):
        with open(text) as fh:
            try:
                return from_spec(json.load(fh))
            except json.JSONDecodeError as exc:
                raise SpecError(f"invalid JSON in {text}: {exc}", "") from None
    return from_spec(parse_inline(text))
