import math
import warnings

import numpy as np
import pytest

from qlab.classifier import (EQUIVALENT_TAGS, TAGS, ConditionError, ConditionKind, analytic_oracle,
                             check_phi, classify, classify_all_equivalent, default_lower,
                             tau_integral)
from qlab.mean_inequality import random_convex_pwl
from qlab.monotone import MonotoneMap, power_compose
from qlab.quadrature import Verdict
from reference import brute_force_verdict, effective_q

D, C, I = Verdict.DIVERGENT, Verdict.CONVERGENT, Verdict.INCONCLUSIVE

ORACLE_MAPS = {
    "power1": MonotoneMap.power_law(1, 1),
    "power2": MonotoneMap.power_law(1, 2),
    "power3": MonotoneMap.power_law(1, 3),
    "exp0.5": MonotoneMap.exp_power(1, 0.5),
    "exp1": MonotoneMap.exp_power(1, 1),
    "exp2": MonotoneMap.exp_power(1, 2),
    "affine": MonotoneMap.affine(1, 1),
}
ORACLE_KINDS = [ConditionKind("T42", n=2), ConditionKind("T42", n=3),
                ConditionKind("C29", p=1.0), ConditionKind("C29", p=2.0)]


@pytest.mark.parametrize("name", ORACLE_MAPS)
@pytest.mark.parametrize("kind", ORACLE_KINDS, ids=lambda k: k.label)
def test_oracle_matches_brute_force(name, kind):
    phi = ORACLE_MAPS[name]
    assert brute_force_verdict(phi, effective_q(kind)) is analytic_oracle(phi, kind)


@pytest.mark.parametrize("name", ORACLE_MAPS)
@pytest.mark.parametrize("kind", ORACLE_KINDS, ids=lambda k: k.label)
def test_classifier_matches_oracle(name, kind):
    phi = ORACLE_MAPS[name]
    assert classify(phi, kind).verdict is analytic_oracle(phi, kind)


def test_quadratic_exponential_diverges_for_p_one():
    # Phi_1^-1(e^u) ~ u^(1/2) and int du / u^(1/2) diverges: the q beta >= 1 rule
    assert analytic_oracle(MonotoneMap.exp_power(1, 2), ConditionKind("C29", p=1.0)) is D
    assert analytic_oracle(MonotoneMap.exp_power(1, 2), ConditionKind("C29", p=0.25)) is C


class TestExamples:
    def test_exponential_t42(self):
        assert classify(MonotoneMap.exp_power(1, 1), ConditionKind("T42", n=2)).verdict is D

    def test_square_t42_and_l51(self):
        phi = MonotoneMap.power_law(1, 2)
        assert classify(phi, ConditionKind("T42", n=2)).verdict is C
        assert classify(phi, ConditionKind("L51")).verdict is C

    def test_square_t42_value(self):
        # int_(e)^inf d tau / tau^(3/2) = 2 / sqrt(e)
        rep = classify(MonotoneMap.power_law(1, 2), ConditionKind("T42", n=2))
        assert rep.value == pytest.approx(2 / math.sqrt(math.e), rel=1e-7)

    def test_log_form_of_exponential(self):
        # int log(e^t) dt / t^2 = int dt / t diverges
        assert classify(MonotoneMap.exp_power(1, 1), ConditionKind("C26", p=1.0)).verdict is D

    @pytest.mark.parametrize("phi, verdict", [
        (MonotoneMap.exp_power(1, 1), D),
        (MonotoneMap.power_law(1, 2), C),
    ])
    def test_equivalent_group(self, phi, verdict):
        res = classify_all_equivalent(phi, 1.0)
        assert res.consistent and res.convex
        assert set(res.verdicts.values()) == {verdict}

    def test_constant_map(self):
        phi = MonotoneMap.affine(0, 2)
        assert classify(phi, ConditionKind("C29")).verdict is C
        assert classify_all_equivalent(phi, 1.0).consistent

    def test_non_convex_warns(self):
        with pytest.warns(RuntimeWarning):
            classify_all_equivalent(MonotoneMap.power_law(1, 0.5), 1.0, tags=("C29",))

    def test_affine_composed_with_square(self):
        assert classify(MonotoneMap.affine(1, 1), ConditionKind("C29", p=2.0)).verdict is C


class TestLimits:
    def test_default_lower_respects_t0(self):
        phi = MonotoneMap.pwl([0, 3, 4], [0, 0, 1])
        assert default_lower(phi, ConditionKind("C26")) == 6.0
        assert default_lower(phi, ConditionKind("C27")) == pytest.approx(1 / 6)
        assert default_lower(phi, ConditionKind("C29")) == math.e

    @pytest.mark.parametrize("tag, delta", [("C26", 2.0), ("C27", 0.5), ("C29", 0.5), ("T42", 1.0)])
    def test_inadmissible_limits(self, tag, delta):
        phi = MonotoneMap.pwl([0, 3, 4], [1, 1, 2])
        if tag in ("C26", "C27"):
            phi = MonotoneMap.pwl([0, 3, 4], [0, 0, 1])
        with pytest.raises(ConditionError):
            classify(phi, ConditionKind(tag, n=2, delta=delta))

    @pytest.mark.parametrize("delta", [3.0, 10.0, 100.0])
    def test_lower_limit_does_not_change_verdict(self, delta):
        for phi in (MonotoneMap.exp_power(1, 1), MonotoneMap.power_law(1, 2)):
            base = classify(phi, ConditionKind("C29")).verdict
            assert classify(phi, ConditionKind("C29", delta=delta)).verdict is base

    def test_tau_integral_head_below_e(self):
        # int_(1.5)^inf d tau / tau^2 = 2/3
        rep = tau_integral(MonotoneMap.affine(1, 0), 1.5)
        assert rep.value == pytest.approx(2 / 3, rel=1e-8)

    def test_bad_kind(self):
        with pytest.raises(ValueError):
            ConditionKind("C30")
        with pytest.raises(ValueError):
            ConditionKind("T42")
        with pytest.raises(ValueError):
            ConditionKind("C29", p=0.0)


def test_monotone_in_p():
    rank = {C: 0, I: 1, D: 2}
    verdicts = [classify(MonotoneMap.exp_power(1, 1), ConditionKind("C29", p=p)).verdict
                for p in (0.5, 1.0, 2.0, 4.0)]
    ranks = [rank[v] for v in verdicts]
    assert ranks == sorted(ranks)


def test_random_convex_tables_agree():
    rng = np.random.default_rng(7)
    for _ in range(10):
        phi = random_convex_pwl(rng, blowup_prob=0.5)
        verdicts = {classify(phi, ConditionKind(t)).verdict for t in ("C26", "C27", "C29")}
        assert len(verdicts - {I}) <= 1


def test_blowup_makes_everything_diverge():
    phi = MonotoneMap.pwl([0, 1, 2], [0, 1, 3], blowup=5.0)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        res = classify_all_equivalent(phi, 1.0)
    assert set(res.verdicts.values()) == {D}


def test_check_phi_rows():
    rows = check_phi(MonotoneMap.exp_power(1, 1), 2)
    assert [r.kind.tag for r in rows] == list(EQUIVALENT_TAGS) + ["T42", "L51"]
    assert all(r.verdict is D for r in rows)
    d = rows[-2].to_dict()
    assert d["condition"] == "T42(n=2)" and d["verdict"] == "Divergent"
    assert set(TAGS) >= {r.kind.tag for r in rows}


def test_composed_power_matches_direct_t42():
    phi = MonotoneMap.exp_power(1, 0.5)
    direct = classify(phi, ConditionKind("T42", n=3))
    via_l51 = classify(power_compose(phi, 2.0), ConditionKind("L51"))
    assert direct.verdict is via_l51.verdict is D
