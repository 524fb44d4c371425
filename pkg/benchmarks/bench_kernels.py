"""Timing of the compiled kernels against the numpy fallback.

    python3 benchmarks/bench_kernels.py [--repeat 5]

Each case runs the same packed map through both backends, checks that the
results agree, and prints the best-of-N wall time.
"""

import argparse
import math
import time

import numpy as np

from qlab import _pykernels
from qlab.monotone import MonotoneMap, power_compose

try:
    from qlab import _ckernels
except ImportError:  # extension not built
    _ckernels = None


def cases():
    pwl2 = power_compose(MonotoneMap.pwl([0, 1, 3, 6], [0, 1, 5, 20]), 2.0).packed
    expp = MonotoneMap.exp_power(1.0, 0.5).packed
    sq = MonotoneMap.power_law(1.0, 2.0)
    norm = MonotoneMap("power", (1.0, 2.0), normalized=True).packed
    tau = np.geomspace(1.0, 1e12, 20000)
    r = np.geomspace(1e-6, 1.0, 16384)
    tg = (1.0 / r) ** 2
    lo = np.asarray(sq.inverse(1.0 / r))
    return [
        ("inverse by bisection, composed table, 2e4 pts",
         lambda k: k.map_inverse(*pwl2, tau)),
        ("dyadic blocks in log tau, exp family, k=0..40",
         lambda k: k.block_sums(_pykernels.KIND_INV_EXP, *expp, 1.0, 40, 1, 1.0, 1e-8)),
        ("blocks of H(t)/t^2, composed table, k=0..40",
         lambda k: k.block_sums(_pykernels.KIND_LOG_T2, *pwl2, 7.0, 40, 1, 1.0, 1e-8)),
        ("K phi(K) = target, 16384 radii",
         lambda k: k.solve_psi(*norm, tg, lo, 1.0 / r, 1e-13, 200)[0]),
    ]


def best_time(fn, repeat):
    best = math.inf
    out = None
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t0)
    return best, out


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args(argv)
    if _ckernels is None:
        print("compiled kernels are not built; only the numpy backend is available")
    print(f"{'case':50s} {'numpy [s]':>10s} {'cython [s]':>11s} {'speed-up':>9s}")
    for name, fn in cases():
        tp, outp = best_time(lambda: fn(_pykernels), args.repeat)
        if _ckernels is None:
            print(f"{name:50s} {tp:10.4f} {'-':>11s} {'-':>9s}")
            continue
        tc, outc = best_time(lambda: fn(_ckernels), args.repeat)
        np.testing.assert_allclose(outc, outp, rtol=1e-9)
        print(f"{name:50s} {tp:10.4f} {tc:11.4f} {tp / tc:8.1f}x")


if __name__ == "__main__":
    main()
