"""Command-line front end: ``qlab <command> [options]``.

Exit status is 0 on success, 1 when a verified inequality or bound fails
and 2 on invalid input.  ``--json`` switches any command to machine output;
the ``QLAB_SEED`` environment variable overrides the seed of randomized runs.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
import warnings

import numpy as np

from . import __version__
from ._backend import backend_name
from .classifier import ConditionError, EQUIVALENT_TAGS, check_phi
from .extremal import ExtremalError, ExtremalMap
from .fields import parse_field
from .mean_inequality import sweep, verify_lemma31
from .modulus import norm_divergence, norm_profile, ring_modulus
from .monotone import SpecError, check_convex, parse_spec
from .quadrature import Verdict

EXIT_OK, EXIT_FAIL, EXIT_INPUT = 0, 1, 2


class InputError(Exception):
    def __init__(self, field, message):
        super().__init__(f"{field}: {message}" if field else message)
        self.field = field


def _clean(obj):
    """JSON-safe copy: numpy scalars to Python, non-finite floats to strings."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_clean(v) for v in obj.tolist()]
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer, int)):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        x = float(obj)
        if math.isnan(x):
            return "nan"
        if math.isinf(x):
            return "inf" if x > 0 else "-inf"
        return x
    if isinstance(obj, Verdict):
        return str(obj)
    return obj


def dumps(obj) -> str:
    return json.dumps(_clean(obj), indent=2, ensure_ascii=True) + "\n"


def fmt(x) -> str:
    """17 significant digits, '.' decimal point, no grouping."""
    return format(float(x), ".17g")


def envelope(command, config, result):
    return {"tool": "qlab", "version": __version__, "backend": backend_name(),
            "command": command, "config": config, "result": result}


def write_csv(path, header, rows, config):
    with open(path, "w", newline="") as fh:
        fh.write(f"# qlab {__version__} config={json.dumps(_clean(config), sort_keys=True)}\n")
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(fmt(v) for v in row) + "\n")


def _seed(args):
    env = os.environ.get("QLAB_SEED")
    if env is not None and env != "":
        try:
            return int(env)
        except ValueError:
            raise InputError("QLAB_SEED", f"not an integer: {env!r}") from None
    return args.seed


def _phi(text, field="--phi"):
    try:
        return parse_spec(text)
    except SpecError as exc:
        raise InputError(f"{field} {exc.field}".strip(), exc.message) from None


def _field(text, n, field="--K"):
    try:
        return parse_field(text, n)
    except SpecError as exc:
        raise InputError(f"{field} {exc.field}".strip(), exc.message) from None
    except ValueError as exc:
        raise InputError(field, str(exc)) from None


def _positive(name, value):
    if not value > 0:
        raise InputError(name, "must be positive")


# ---------------------------------------------------------------------------
# commands


def cmd_check_phi(args, out):
    phi = _phi(args.phi)
    if args.n < 2:
        raise InputError("--n", "dimension must be >= 2")
    if args.p is not None:
        _positive("--p", args.p)
    try:
        rows = check_phi(phi, args.n, args.p, args.kmax)
    except ConditionError as exc:
        raise InputError("--phi", str(exc)) from None
    conv = check_convex(phi)
    decided = {r.verdict for r in rows if r.kind.tag in EQUIVALENT_TAGS and r.verdict is not Verdict.INCONCLUSIVE}
    consistent = len(decided) <= 1
    config = {"phi": phi.to_spec(), "n": args.n, "p": args.p if args.p is not None else args.n - 1,
              "kmax": args.kmax}
    result = {"convex": bool(conv), "consistent": consistent, "rows": [r.to_dict() for r in rows]}
    if args.json:
        out.write(dumps(envelope("check-phi", config, result)))
    else:
        out.write(f"phi = {args.phi}   n = {args.n}   p = {config['p']:g}   convex = {bool(conv)}\n")
        out.write(f"{'condition':14s} {'verdict':13s} {'lower':>12s} {'value':>14s}  note\n")
        for r in rows:
            out.write(f"{r.kind.label:14s} {str(r.verdict):13s} {r.lower_limit:12.6g} {r.value:14.8g}  {r.note}\n")
    # the equivalent conditions may only disagree when phi is not convex
    return EXIT_FAIL if (conv and not consistent) else EXIT_OK


def cmd_verify(args, out):
    if args.sweep:
        seed = _seed(args)
        records, desc = sweep(args.sweep, seed)
        config = {"sweep": args.sweep, "seed": seed}
        result = {"trials": len(records), "violations": sum(not r.passed for r in records),
                  "records": [dict(d, **r.to_dict()) for r, d in zip(records, desc)]}
        ok = result["violations"] == 0
        if args.json:
            out.write(dumps(envelope("verify-lemma31", config, result)))
        else:
            out.write(f"{len(records)} trials, seed {seed}: {result['violations']} violations\n")
        return EXIT_OK if ok else EXIT_FAIL
    if args.K is None or args.phi is None:
        raise InputError("--K/--phi", "both are required unless --sweep is given")
    if args.n < 2:
        raise InputError("--n", "dimension must be >= 2")
    _positive("--p", args.p)
    K = _field(args.K, args.n)
    phi = _phi(args.phi)
    rec = verify_lemma31(K, phi, args.p)
    config = {"K": K.spec, "phi": phi.to_spec(), "n": args.n, "p": args.p}
    if args.json:
        out.write(dumps(envelope("verify-lemma31", config, rec.to_dict())))
    else:
        out.write(f"lhs = {fmt(rec.lhs)}\nrhs = {fmt(rec.rhs)}\nM   = {fmt(rec.M)}\n")
        out.write(f"{'PASS' if rec.passed else 'FAIL'}: lhs >= rhs - tol*min(lhs, rhs)\n")
        for note in rec.notes:
            out.write(f"note: {note}\n")
    return EXIT_OK if rec.passed else EXIT_FAIL


def cmd_build_extremal(args, out):
    phi = _phi(args.phi)
    if args.n < 2:
        raise InputError("--n", "dimension must be >= 2")
    if args.grid < 2:
        raise InputError("--grid", "need at least 2 points")
    if not 0 < args.rmin < 1:
        raise InputError("--rmin", "must lie in (0, 1)")
    try:
        m = ExtremalMap.build(phi, args.n, args.grid, args.rmin)
    except ExtremalError as exc:
        raise InputError("--phi", str(exc)) from None
    config = {"phi": phi.to_spec(), "n": args.n, "grid": args.grid, "rmin": args.rmin}
    try:
        summary = m.summary()
        ok = True
    except ArithmeticError as exc:
        summary = {"error": str(exc)}
        ok = False
    inv = m.profile.invariants
    ok &= all(v for k, v in inv.items() if k.endswith("_ok") or k in ("I_nondecreasing", "I_finite"))
    summary["invariants"] = inv
    if args.out:
        write_csv(args.out, ["r", "K", "I", "rho", "phi_of_K"], m.table(), config)
        summary_path = args.summary or args.out + ".summary.json"
        with open(summary_path, "w") as fh:
            fh.write(dumps(envelope("build-extremal", config, summary)))
    if args.json:
        out.write(dumps(envelope("build-extremal", config, summary)))
    else:
        for key in ("gamma", "R", "I1", "energy", "bound"):
            if key in summary:
                out.write(f"{key:7s}= {fmt(summary[key])}\n")
        if args.out:
            out.write(f"table  -> {args.out}\n")
    return EXIT_OK if ok else EXIT_FAIL


def cmd_norm_profile(args, out):
    if args.n < 2:
        raise InputError("--n", "dimension must be >= 2")
    if not 0 < args.delta < 1:
        raise InputError("--delta", "must lie in (0, 1)")
    Q = _field(args.Q, args.n, "--Q")
    prof = norm_profile(Q, args.delta, args.points)
    rep = norm_divergence(Q, args.delta)
    config = {"Q": Q.spec, "n": args.n, "delta": args.delta, "points": args.points}
    if args.out:
        write_csv(args.out, ["r", "norm"], np.column_stack([prof.radii, prof.norms]), config)
    result = {"verdict": str(rep.verdict), "note": rep.note, "value": rep.value,
              "last_blocks": list(rep.block_sums[-5:])}
    if args.json:
        result["r"] = prof.radii
        result["norm"] = prof.norms
        out.write(dumps(envelope("norm-profile", config, result)))
    else:
        out.write("r,norm\n")
        for r, v in zip(prof.radii, prof.norms):
            out.write(f"{fmt(r)},{fmt(v)}\n")
        out.write(f"# int_0^delta dr/||Q||: {rep.verdict} ({rep.note})\n")
    return EXIT_OK


def cmd_ring_modulus(args, out):
    if args.n < 2:
        raise InputError("--n", "dimension must be >= 2")
    if not 0 < args.r < args.R:
        raise InputError("--r/--R", "need 0 < r < R")
    value = ring_modulus(args.r, args.R, args.n)
    config = {"r": args.r, "R": args.R, "n": args.n}
    if args.json:
        out.write(dumps(envelope("ring-modulus", config, {"modulus": value})))
    else:
        out.write(fmt(value) + "\n")
    return EXIT_OK


def cmd_suite(args, out):
    from .suite import run_suite

    seed = _seed(args)
    if args.trials < 1:
        raise InputError("--trials", "must be at least 1")
    records = run_suite(seed, args.trials)
    config = {"seed": seed, "trials": args.trials}
    doc = envelope("suite", config, {"passed": all(r["passed"] for r in records), "checks": records})
    text = dumps(doc)
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text)
    if args.json:
        out.write(text)
    else:
        for r in records:
            out.write(f"[{'PASS' if r['passed'] else 'FAIL'}] {r['id']:2d}  {r['name']}\n")
    return EXIT_OK if doc["result"]["passed"] else EXIT_FAIL


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--json", action="store_true", help="machine-readable output")

    ap = argparse.ArgumentParser(prog="qlab", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=f"qlab {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("check-phi", parents=[common], help="classify the integral conditions for Phi")
    p.add_argument("--phi", required=True, help="JSON spec, spec file or family:params")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--p", type=float, default=None, help="power for C24..C29 (default n-1)")
    p.add_argument("--kmax", type=int, default=40)
    p.set_defaults(func=cmd_check_phi)

    p = sub.add_parser("verify-lemma31", parents=[common], help="evaluate both sides of the mean inequality")
    p.add_argument("--K", help="field spec, e.g. inv_power:1,1")
    p.add_argument("--phi")
    p.add_argument("--n", type=int, default=2)
    p.add_argument("--p", type=float, default=1.0)
    p.add_argument("--sweep", type=int, default=0, metavar="TRIALS", help="run randomized trials instead")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("build-extremal", parents=[common], help="solve the extremal radial map")
    p.add_argument("--phi", required=True)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--grid", type=int, default=4096)
    p.add_argument("--rmin", type=float, default=1e-6)
    p.add_argument("--out", help="CSV path for r, K, I, rho, phi_of_K")
    p.add_argument("--summary", help="JSON summary path (default <out>.summary.json)")
    p.set_defaults(func=cmd_build_extremal)

    p = sub.add_parser("norm-profile", parents=[common], help="spherical norms and their divergence")
    p.add_argument("--Q", required=True)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--delta", type=float, required=True)
    p.add_argument("--points", type=int, default=64)
    p.add_argument("--out")
    p.set_defaults(func=cmd_norm_profile)

    p = sub.add_parser("ring-modulus", parents=[common], help="modulus of a spherical ring")
    p.add_argument("--r", type=float, required=True)
    p.add_argument("--R", type=float, required=True)
    p.add_argument("--n", type=int, required=True)
    p.set_defaults(func=cmd_ring_modulus)

    p = sub.add_parser("suite", parents=[common], help="run the full check battery")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--trials", type=int, default=100)
    p.add_argument("--out", help="also write the JSON report here")
    p.set_defaults(func=cmd_suite)
    return ap


def main(argv=None, out=None) -> int:
    out = out or sys.stdout
    args = build_parser().parse_args(argv)
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", RuntimeWarning)
            return args.func(args, out)
    except InputError as exc:
        print(f"qlab: invalid input: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except OSError as exc:
        print(f"qlab: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
