"""Numerical divergence classification of the integral conditions.

Condition tags (Phi_p(t) = Phi(t**p), H_p = log Phi_p)::

    C24  int_delta^inf  H_p'(t) dt / t
    C25  int_delta^inf  dH_p(t) / t              (Stieltjes)
    C26  int_delta^inf  H_p(t) dt / t^2
    C27  int_0^delta    H_p(1/t) dt
    C28  int_delta^inf  d eta / H_p^-1(eta)
    C29  int_delta^inf  d tau / (tau Phi_p^-1(tau))
    T42  int_delta^inf  d tau / (tau [Phi^-1(tau)]^(1/(n-1)))
    L51  int_delta^inf  d tau / (tau phi^-1(tau))

Integrals in tau are split into dyadic blocks of u = log tau, where their
log-power decay becomes power decay and the block rule can separate
1/(tau log tau) from 1/(tau log^2 tau).
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from . import _pykernels as pk
from ._backend import kernels
from .monotone import MonotoneMap, check_convex, power_compose
from .quadrature import KMAX, RTOL, Verdict, block_verdict

TAGS = ("C24", "C25", "C26", "C27", "C28", "C29", "T42", "L51")
EQUIVALENT_TAGS = ("C24", "C25", "C26", "C27", "C28", "C29")


class ConditionError(ValueError):
    """The lower limit of a condition violates its admissibility bound."""


@dataclass(frozen=True)
class ConditionKind:
    tag: str
    p: float = 1.0
    n: int | None = None
    delta: float | None = None

    def __post_init__(self):
        if self.tag not in TAGS:
            raise ValueError(f"unknown condition tag {self.tag!r}")
        if not self.p > 0:
            raise ValueError("p must be positive")
        if self.tag == "T42" and (self.n is None or self.n < 2):
            raise ValueError("T42 needs a dimension n >= 2")

    @property
    def label(self) -> str:
        if self.tag == "T42":
            return f"T42(n={self.n})"
        if self.tag == "L51":
            return "L51"
        return f"{self.tag}(p={self.p:g})"


@dataclass(frozen=True)
class ConditionReport:
    kind: ConditionKind
    verdict: Verdict
    block_sums: tuple
    tail_estimate: float
    note: str
    lower_limit: float
    head: float = 0.0
    value: float = math.nan
    variable: str = "t"

    def to_dict(self) -> dict:
        return {
            "condition": self.kind.label,
            "verdict": str(self.verdict),
            "lower_limit": self.lower_limit,
            "variable": self.variable,
            "value": self.value,
            "tail_estimate": self.tail_estimate,
            "last_blocks": list(self.block_sums[-5:]),
            "note": self.note,
        }


def report_from_blocks(kind, blocks, lower, head=0.0, variable="t", note_prefix=""):
    dec = block_verdict(blocks)
    if dec.verdict is Verdict.CONVERGENT:
        value = head + float(np.sum(blocks)) + dec.tail_estimate
    elif dec.verdict is Verdict.DIVERGENT:
        value = math.inf
    else:
        value = math.nan
    note = f"{note_prefix}{dec.note}" if note_prefix else dec.note
    return ConditionReport(kind, dec.verdict, tuple(float(b) for b in blocks),
                           dec.tail_estimate, note, lower, head, value, variable)


def tau_integral(phi: MonotoneMap, lower: float, expo: float = 1.0, kmax: int = KMAX,
                 rtol: float = RTOL, kind: ConditionKind | None = None) -> ConditionReport:
    """int_lower^inf d tau / (tau [phi^-1(tau)]^expo), classified and summed.

    The stretch [lower, e] (if any) is integrated directly in tau; beyond it
    the blocks run over u = log tau starting at max(1, log lower).
    """
    kind = kind or ConditionKind("C29")
    packed = phi.packed
    u0 = 1.0
    head = 0.0
    if lower < math.e:
        head = kernels.integrate_kind(pk.KIND_INV_TAU, *packed, lower, math.e, expo, rtol, 1e-300)[0]
    else:
        u0 = math.log(lower)
    blocks = kernels.block_sums(pk.KIND_INV_EXP, *packed, u0, kmax, 1, expo, rtol)
    if not math.isfinite(head):
        blocks = np.append(blocks, math.inf)
    return report_from_blocks(kind, blocks, lower, head, "log tau")


def default_lower(phi: MonotoneMap, kind: ConditionKind) -> float:
    """Lower limits strictly inside the admissible ranges.

    t-type conditions use delta = max(1, 2 t0) (C27 mirrors it to 1/delta);
    tau-type conditions use e * max(1, Phi(+0)); C28 uses max(1, H(+0) + 1).
    """
    if kind.tag in ("C24", "C25", "C26", "C27"):
        t0 = power_compose(phi, kind.p).t0
        delta = max(1.0, 2.0 * t0)
        return 1.0 / delta if kind.tag == "C27" else delta
    tau0 = phi.tau0
    if kind.tag == "C28":
        h0 = math.log(tau0) if tau0 > 0 else -math.inf
        return max(1.0, h0 + 1.0)
    return math.e * max(1.0, tau0)


def _validate(phi, kind, lower):
    if not lower > 0 and kind.tag != "C28":
        raise ConditionError(f"{kind.label}: lower limit must be positive")
    if kind.tag in ("C24", "C25", "C26"):
        t0 = power_compose(phi, kind.p).t0
        if not lower > t0:
            raise ConditionError(f"{kind.label}: delta={lower:g} must exceed t0={t0:g}")
    elif kind.tag == "C27":
        t0 = power_compose(phi, kind.p).t0
        if t0 > 0 and not lower < 1.0 / t0:
            raise ConditionError(f"{kind.label}: delta={lower:g} must be below 1/t0={1 / t0:g}")
    elif kind.tag == "C28":
        tau0 = phi.tau0
        h0 = math.log(tau0) if tau0 > 0 else -math.inf
        if not lower > h0:
            raise ConditionError(f"{kind.label}: delta*={lower:g} must exceed H(+0)={h0:g}")
    else:
        tau0 = phi.tau0
        if not lower > tau0:
            raise ConditionError(f"{kind.label}: lower limit {lower:g} must exceed Phi(0)={tau0:g}")


def classify(phi: MonotoneMap, kind: ConditionKind, kmax: int = KMAX, rtol: float = RTOL) -> ConditionReport:
    """Divergent / Convergent / Inconclusive verdict for one condition."""
    lower = kind.delta if kind.delta is not None else default_lower(phi, kind)
    _validate(phi, kind, lower)
    tag = kind.tag
    if tag == "T42":
        return tau_integral(phi, lower, 1.0 / (kind.n - 1), kmax, rtol, kind)
    if tag == "L51":
        return tau_integral(phi, lower, 1.0, kmax, rtol, kind)
    phi_p = power_compose(phi, kind.p)
    if tag == "C29":
        return tau_integral(phi_p, lower, 1.0, kmax, rtol, kind)
    packed = phi_p.packed
    if tag == "C28":
        head = 0.0
        start = lower
        if lower < 1.0:
            head = kernels.integrate_kind(pk.KIND_INV_EXP, *packed, lower, 1.0, 1.0, rtol, 1e-300)[0]
            start = 1.0
        blocks = kernels.block_sums(pk.KIND_INV_EXP, *packed, start, kmax, 1, 1.0, rtol)
        return report_from_blocks(kind, blocks, lower, head, "eta")
    code = {"C24": pk.KIND_DLOG_T, "C25": pk.KIND_STIELTJES,
            "C26": pk.KIND_LOG_T2, "C27": pk.KIND_LOG_RECIP}[tag]
    direction = -1 if tag == "C27" else 1
    blocks = kernels.block_sums(code, *packed, lower, kmax, direction, 1.0, rtol)
    return report_from_blocks(kind, blocks, lower, 0.0, "t")


@dataclass(frozen=True)
class EquivalenceResult:
    reports: dict
    consistent: bool
    convex: bool
    verdicts: dict = field(default_factory=dict)


def classify_all_equivalent(phi: MonotoneMap, p: float = 1.0, kmax: int = KMAX,
                            tags=EQUIVALENT_TAGS) -> EquivalenceResult:
    """Classify the equivalent conditions at compatible limits.

    Warns, without failing, when phi is not convex: the equivalences are
    then only partially guaranteed.
    """
    conv = check_convex(phi)
    if not conv:
        warnings.warn("Phi failed the convexity check; the conditions need not be equivalent",
                      RuntimeWarning, stacklevel=2)
    reports = {tag: classify(phi, ConditionKind(tag, p=p), kmax) for tag in tags}
    decided = {r.verdict for r in reports.values() if r.verdict is not Verdict.INCONCLUSIVE}
    return EquivalenceResult(reports, len(decided) <= 1, bool(conv),
                             {t: r.verdict for t, r in reports.items()})


def effective_power(phi: MonotoneMap, kind: ConditionKind) -> float:
    """Exponent q such that the condition is the C29 integral of Phi_q."""
    if kind.tag == "T42":
        return phi.power * (kind.n - 1)
    if kind.tag == "L51":
        return phi.power
    return phi.power * kind.p


def analytic_oracle(phi: MonotoneMap, kind: ConditionKind) -> Verdict:
    """Closed-form verdict for the analytic families.

    power / affine: the inverse grows like a power of tau, so every
    condition converges.  exp_power(alpha, beta): Phi_q^-1(tau) behaves like
    (log tau)^(1/(q beta)); with u = log tau the integral is
    int du / u^(1/(q beta)), divergent iff q * beta >= 1.
    """
    if phi.normalized or math.isfinite(phi.blowup):
        raise ValueError("oracle covers unmodified analytic families only")
    if phi.family in ("power", "affine"):
        return Verdict.CONVERGENT
    if phi.family == "exp_power":
        q = effective_power(phi, kind)
        return Verdict.DIVERGENT if q * phi.params[1] >= 1.0 else Verdict.CONVERGENT
    raise ValueError(f"no analytic oracle for family {phi.family!r}")


def check_phi(phi: MonotoneMap, n: int, p: float | None = None, kmax: int = KMAX) -> list:
    """Rows for the ``check-phi`` command: C24..C29 at p (default n-1), T42, L51."""
    p = float(n - 1) if p is None else p
    rows = [classify(phi, ConditionKind(tag, p=p), kmax) for tag in EQUIVALENT_TAGS]
    rows.append(classify(phi, ConditionKind("T42", n=n), kmax))
    rows.append(classify(phi, ConditionKind("L51"), kmax))
    return rows
