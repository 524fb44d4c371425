"""Dyadic-block integration and the convergence rule shared by all modules.

An improper integral is cut into blocks [s 2^k, s 2^(k+1)] (or the mirrored
blocks toward 0) and the trailing block sums decide the verdict:

* Divergent   - the last ``window`` blocks all exceed ``floor`` and no block
                falls below ``1 - growth_tol`` times its predecessor, or some
                block is infinite;
* Convergent  - every trailing ratio b[k+1]/b[k] is at most ``ratio`` and the
                geometric tail bound b[-1] r / (1 - r) is below ``tail_tol``;
* Inconclusive otherwise.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from ._pykernels import adaptive_gk

KMAX = 40
FLOOR = 1e-4
GROWTH_TOL = 0.1
RATIO = 0.9
TAIL_TOL = 1e-6
WINDOW = 5
RTOL = 1e-8


class Verdict(str, enum.Enum):
    DIVERGENT = "Divergent"
    CONVERGENT = "Convergent"
    INCONCLUSIVE = "Inconclusive"

    def __str__(self):
        return self.value


@dataclass(frozen=True)
class BlockDecision:
    verdict: Verdict
    tail_estimate: float
    note: str


def block_verdict(blocks, floor=FLOOR, growth_tol=GROWTH_TOL, ratio=RATIO,
                  tail_tol=TAIL_TOL, window=WINDOW) -> BlockDecision:
    b = np.asarray(blocks, dtype=float)
    if len(b) < window:
        raise ValueError(f"need at least {window} blocks")
    if np.any(np.isposinf(b)):
        return BlockDecision(Verdict.DIVERGENT, math.inf, "infinite block (integrand is +inf)")
    if np.any(np.isnan(b)):
        return BlockDecision(Verdict.INCONCLUSIVE, math.nan, "NaN block sum")
    tail = b[-window:]
    if np.all(tail > floor) and np.all(tail[1:] >= (1.0 - growth_tol) * tail[:-1]):
        return BlockDecision(Verdict.DIVERGENT, math.inf,
                             f"trailing blocks stay above {floor:g} without decay")
    mag = np.abs(tail)
    with np.errstate(divide="ignore", invalid="ignore"):
        r = np.where(mag[:-1] > 0, mag[1:] / mag[:-1], np.where(mag[1:] > 0, math.inf, 0.0))
    rmax = float(r.max())
    if rmax <= ratio:
        est = float(mag[-1] * rmax / (1.0 - rmax))
        if est < tail_tol:
            return BlockDecision(Verdict.CONVERGENT, est, f"block ratios <= {rmax:.3g}")
        return BlockDecision(Verdict.INCONCLUSIVE, est, f"ratios decay but tail bound {est:.3g} too large")
    return BlockDecision(Verdict.INCONCLUSIVE, math.nan, f"trailing block ratio {rmax:.3g} not decisive")


def block_edges(start, kmax=KMAX, direction=1):
    k = np.arange(kmax + 1, dtype=float)
    if direction > 0:
        return start * 2.0 ** k, start * 2.0 ** (k + 1)
    return start * 2.0 ** -(k + 1), start * 2.0 ** -k


def dyadic_blocks(f, start, kmax=KMAX, direction=1, rtol=RTOL):
    """Block integrals of a vectorised callable ``f``."""
    lo, hi = block_edges(start, kmax, direction)
    out = np.empty(len(lo))
    for i, (a, b) in enumerate(zip(lo, hi)):
        out[i] = adaptive_gk(f, a, b, rtol=rtol)[0]
    return out


def integrate(f, a, b, rtol=RTOL):
    """Finite-interval adaptive Gauss-Kronrod; returns (value, error)."""
    return adaptive_gk(f, a, b, rtol=rtol)
