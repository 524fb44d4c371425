"""The closed-form and randomized checks behind ``qlab suite``.

Each check returns a plain dict with an ``id``, a ``passed`` flag and the
numbers it looked at.  Nothing time-dependent goes into the records, so two
runs with the same seed serialize identically.
"""

from __future__ import annotations

import math
import warnings

import numpy as np

from .classifier import ConditionKind, analytic_oracle, classify
from .extremal import ExtremalError, ExtremalMap, normalize_phi
from .fields import make_field
from .mean_inequality import random_convex_pwl, sweep, verify_lemma31
from .modulus import dimension_constants, norm_divergence, spherical_norm
from .monotone import MonotoneMap, power_compose
from .quadrature import Verdict

ORACLE_MAPS = (
    ("power:1,1", MonotoneMap.power_law(1, 1)),
    ("power:1,2", MonotoneMap.power_law(1, 2)),
    ("power:1,3", MonotoneMap.power_law(1, 3)),
    ("exp_power:1,0.5", MonotoneMap.exp_power(1, 0.5)),
    ("exp_power:1,1", MonotoneMap.exp_power(1, 1)),
    ("exp_power:1,2", MonotoneMap.exp_power(1, 2)),
    ("affine:1,1", MonotoneMap.affine(1, 1)),
)
ORACLE_KINDS = (
    ConditionKind("T42", n=2),
    ConditionKind("T42", n=3),
    ConditionKind("C29", p=1.0),
    ConditionKind("C29", p=2.0),
)


def _rel(a, b):
    return abs(a - b) / abs(b)


def check_extremal_plane():
    m = ExtremalMap.build(MonotoneMap.power_law(1, 2), 2)
    p = m.profile
    k_err = float(np.max(np.abs(p.K_values * p.r_grid ** (2.0 / 3.0) - 1.0)))
    energy, bound = m.phi_energy()
    three_pi = 3.0 * math.pi
    passed = (p.gamma == 1.0 and p.residual <= 1e-10 and k_err <= 1e-10
              and abs(p.I_table[-1] - 1.5) <= 1e-8 and abs(m.R - math.exp(1.5)) <= 1e-7
              and _rel(energy, three_pi) <= 1e-3 and _rel(bound, three_pi) <= 1e-3)
    return {"id": 1, "name": "extremal map, phi = t^2, n = 2", "passed": bool(passed),
            "gamma": p.gamma, "residual": p.residual, "K_rel_err": k_err,
            "I1": float(p.I_table[-1]), "R": m.R, "energy": energy, "bound": bound}


def check_extremal_space():
    m = ExtremalMap.build(MonotoneMap.power_law(1, 2), 3)
    energy, bound = m.phi_energy()
    passed = _rel(energy, 12 * math.pi / 5) <= 1e-3 and energy <= 6 * math.pi * (1 + 1e-9)
    return {"id": 2, "name": "extremal map, phi = t^2, n = 3", "passed": bool(passed),
            "energy": energy, "bound": bound}


def fd_dilatation(m: ExtremalMap, r: float, step: float = 1e-6, angle: float = 1e-4) -> float:
    """K_O from finite differences of f: tangential over radial stretching."""
    e1 = np.zeros(m.n)
    e1[0] = 1.0
    e2 = np.zeros(m.n)
    e2[1] = 1.0
    h = step * r
    radial = (np.linalg.norm(m.eval_map((r + h) * e1)) - np.linalg.norm(m.eval_map((r - h) * e1))) / (2 * h)
    chord = np.linalg.norm(m.eval_map(r * (math.cos(angle) * e1 + math.sin(angle) * e2)) - m.eval_map(r * e1))
    tangential = chord / (2 * r * math.sin(angle / 2))
    return tangential / radial


def check_fd_dilatation():
    m = ExtremalMap.build(MonotoneMap.power_law(1, 2), 2)
    radii = np.geomspace(1e-3, 0.9, 50)
    errs = [abs(fd_dilatation(m, r) / m.profile.K(r) - 1.0) for r in radii]
    worst = float(max(errs))
    return {"id": 3, "name": "finite-difference outer dilatation", "passed": worst <= 1e-5,
            "max_rel_err": worst}


def check_boundary():
    m = ExtremalMap.build(MonotoneMap.power_law(1, 2), 2)
    probes = np.array([1e-6, 1e-7, 1e-8, 1e-10, 1e-12])
    rep = m.boundary_report(probes)
    rho_ok = bool(np.all((rep.rho > 1.0) & (rep.rho < 1.0 + 1e-3)))
    passed = rho_ok and rep.oscillation_ok and rep.rho_monotone
    return {"id": 4, "name": "no limit at the puncture", "passed": passed,
            "t": probes.tolist(), "rho": rep.rho.tolist(), "diameter": rep.oscillation.tolist()}


def check_mean_inequality(seed: int, trials: int = 100):
    K = make_field("inv_power", {"c": 1.0, "a": 1.0}, 2)
    hand = verify_lemma31(K, MonotoneMap.affine(1, 0), 1.0)
    hand_ok = abs(hand.lhs - 1.0) <= 1e-8 and abs(hand.rhs - 1.0 / (4 * math.e)) <= 1e-8
    records, desc = sweep(trials, seed)
    failures = [dict(d, lhs=r.lhs, rhs=r.rhs) for r, d in zip(records, desc) if not r.passed]
    return {"id": 5, "name": "mean inequality, randomized", "passed": bool(hand_ok and not failures),
            "hand_lhs": hand.lhs, "hand_rhs": hand.rhs, "trials": trials, "violations": failures,
            "infinite_M": sum(math.isinf(r.M) for r in records)}


def check_oracle_table():
    rows = []
    for label, phi in ORACLE_MAPS:
        for kind in ORACLE_KINDS:
            got = classify(phi, kind).verdict
            want = analytic_oracle(phi, kind)
            rows.append({"phi": label, "condition": kind.label, "verdict": str(got),
                         "oracle": str(want), "agree": got is want})
    passed = all(r["agree"] for r in rows) and not any(r["verdict"] == "Inconclusive" for r in rows)
    return {"id": 6, "name": "classifier against the analytic oracle", "passed": passed, "rows": rows}


def check_equivalence(seed: int, count: int = 20):
    rng = np.random.default_rng(seed)
    inconclusive = 0
    disagreements = []
    for _ in range(count):
        phi = random_convex_pwl(rng, blowup_prob=0.5)
        verdicts = [classify(phi, ConditionKind(tag, p=1.0)).verdict for tag in ("C26", "C27", "C29")]
        if Verdict.INCONCLUSIVE in verdicts:
            inconclusive += 1
        elif len(set(verdicts)) > 1:
            disagreements.append({"phi": phi.to_spec(), "verdicts": [str(v) for v in verdicts]})
    rate = inconclusive / count
    return {"id": 7, "name": "C26 / C27 / C29 agree on convex tables",
            "passed": not disagreements and rate <= 0.2,
            "inconclusive_rate": rate, "disagreements": disagreements}


_RANK = {Verdict.CONVERGENT: 0, Verdict.INCONCLUSIVE: 1, Verdict.DIVERGENT: 2}


def check_p_monotone():
    phi = MonotoneMap.exp_power(1, 1)
    ps = (0.5, 1.0, 2.0, 4.0)
    verdicts = [classify(phi, ConditionKind("C29", p=p)).verdict for p in ps]
    ranks = [_RANK[v] for v in verdicts]
    return {"id": 8, "name": "C29 more divergent as p grows", "passed": ranks == sorted(ranks),
            "p": list(ps), "verdicts": [str(v) for v in verdicts]}


def check_mutual_exclusion():
    rows = []
    ok = True
    for label, phi in ORACLE_MAPS:
        for n in (2, 3):
            t42 = classify(phi, ConditionKind("T42", n=n)).verdict
            try:
                normalize_phi(power_compose(phi, n - 1))
                accepted = True
            except ExtremalError:
                accepted = False
            l51 = classify(power_compose(phi, n - 1), ConditionKind("L51")).verdict
            row_ok = (not accepted or l51 is Verdict.CONVERGENT) and not (t42 is Verdict.DIVERGENT and accepted)
            ok &= row_ok
            rows.append({"phi": label, "n": n, "T42": str(t42), "L51_of_phi_n-1": str(l51),
                         "accepted": accepted, "ok": row_ok})
    return {"id": 9, "name": "construction excludes divergent T42", "passed": ok, "rows": rows}


def check_modulus():
    omega_ok = all(dimension_constants(n).omega == n * dimension_constants(n).Omega for n in range(2, 11))
    one = make_field("const", {"c": 1.0}, 2)
    sn = float(spherical_norm(one, 0.5))
    d_one = norm_divergence(one, 0.5).verdict
    d_inv = norm_divergence(make_field("inv_power", {"c": 1.0, "a": 1.0}, 2), 0.5).verdict
    passed = (omega_ok and abs(sn - math.pi) <= 1e-12 and d_one is Verdict.DIVERGENT
              and d_inv is Verdict.CONVERGENT)
    return {"id": 10, "name": "modulus utilities", "passed": bool(passed), "omega_identity": omega_ok,
            "norm_const_half": sn, "divergence_const": str(d_one), "divergence_inverse": str(d_inv)}


def run_suite(seed: int = 0, trials: int = 100) -> list:
    """All checks in a fixed order."""
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        return [
            check_extremal_plane(),
            check_extremal_space(),
            check_fd_dilatation(),
            check_boundary(),
            check_mean_inequality(seed, trials),
            check_oracle_table(),
            check_equivalence(seed),
            check_p_monotone(),
            check_mutual_exclusion(),
            check_modulus(),
        ]
