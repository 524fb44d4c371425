import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qlab.monotone import (LogMap, MonotoneMap, SpecError, check_convex, evaluate, from_spec,
                           generalized_inverse, log_transform, parse_inline, parse_spec,
                           power_compose)

INF = math.inf


def step01():
    return MonotoneMap.step([0.0, 1.0], [0.0, 5.0])


class TestEvaluate:
    def test_power(self):
        assert MonotoneMap.power_law(1, 2)(3.0) == 9.0

    def test_constant_affine(self):
        assert MonotoneMap.affine(0, 5)(7.0) == 5.0

    @pytest.mark.parametrize("phi, sup", [
        (MonotoneMap.power_law(1, 2), INF),
        (MonotoneMap.affine(0, 5), 5.0),
        (MonotoneMap.exp_power(1, 1), INF),
        (MonotoneMap.pwl([0, 1], [0, 1]), INF),
        (MonotoneMap.pwl([0, 1, 2], [0, 3, 3]), 3.0),
        (MonotoneMap.pwl([0, 1], [0, 1], blowup=4.0), INF),
    ])
    def test_value_at_infinity_is_sup(self, phi, sup):
        assert phi(INF) == sup
        assert phi.sup == sup

    def test_pwl_extends_with_last_slope(self):
        phi = MonotoneMap.pwl([0, 1, 2], [0, 1, 3])
        np.testing.assert_allclose(phi(np.array([0.5, 1.5, 4.0])), [0.5, 2.0, 7.0])

    def test_blowup(self):
        phi = MonotoneMap.pwl([0, 1], [0, 1], blowup=3.0)
        assert phi(2.999) == pytest.approx(2.999)
        assert phi(3.0) == INF

    def test_step_right_continuous(self):
        phi = step01()
        assert phi(0.999) == 0.0
        assert phi(1.0) == 5.0

    def test_exp_power_offset(self):
        np.testing.assert_allclose(MonotoneMap.exp_power(1, 1)(np.array([0.0, 1.0, 2.0])),
                                   np.exp([0.0, 1.0, 2.0]), rtol=1e-15)
        assert MonotoneMap.exp_power(1, 1, 0.0)(0.0) == 0.0

    def test_negative_argument_rejected(self):
        with pytest.raises(ValueError):
            evaluate(MonotoneMap.power_law(1, 2), -1.0)

    def test_derived_attributes(self):
        assert MonotoneMap.exp_power(1, 1).tau0 == 1.0
        assert MonotoneMap.power_law(1, 2).t0 == 0.0
        assert MonotoneMap.pwl([0, 2, 3], [0, 0, 1]).t0 == 2.0
        assert power_compose(MonotoneMap.pwl([0, 4, 5], [0, 0, 1]), 2.0).t0 == pytest.approx(2.0)
        assert MonotoneMap.affine(0, 0).t0 == INF


class TestConstruction:
    @pytest.mark.parametrize("kwargs", [
        dict(family="power", params=(0.0, 2.0)),
        dict(family="power", params=(1.0, -1.0)),
        dict(family="exp_power", params=(1.0, 1.0, -1.0)),
        dict(family="affine", params=(-1.0, 0.0)),
        dict(family="pwl", knots=(0.0, 1.0, 1.0), values=(0.0, 1.0, 2.0)),
        dict(family="pwl", knots=(0.0, 1.0), values=(2.0, 1.0)),
        dict(family="pwl", knots=(1.0, 2.0), values=(0.0, 1.0)),
        dict(family="nope"),
    ])
    def test_malformed_rejected(self, kwargs):
        with pytest.raises(SpecError):
            MonotoneMap(**kwargs)


class TestInverse:
    def test_power(self):
        assert generalized_inverse(MonotoneMap.power_law(1, 2), 4.0) == pytest.approx(2.0, rel=1e-15)

    def test_constant(self):
        phi = MonotoneMap.affine(0, 5)
        assert generalized_inverse(phi, 3.0) == 0.0
        assert generalized_inverse(phi, 6.0) == INF

    def test_step(self):
        assert generalized_inverse(step01(), 3.0) == 1.0

    def test_table_binary_search(self):
        phi = MonotoneMap.pwl([0, 1, 3], [0, 2, 2])
        np.testing.assert_allclose(generalized_inverse(phi, np.array([0.0, 1.0, 2.0, 2.5])),
                                   [0.0, 0.5, 1.0, INF])

    def test_flat_segment_takes_left_end(self):
        phi = MonotoneMap.pwl([0, 1, 2, 3], [0, 1, 1, 2])
        assert generalized_inverse(phi, 1.0) == 1.0

    def test_blowup_inverse_is_bounded(self):
        phi = MonotoneMap.pwl([0, 1], [0, 1], blowup=3.0)
        assert generalized_inverse(phi, 1e9) == 3.0
        assert generalized_inverse(phi, INF) == 3.0

    @pytest.mark.parametrize("phi", [
        MonotoneMap.power_law(2, 1.5), MonotoneMap.exp_power(1, 0.5),
        MonotoneMap.affine(3, 1), MonotoneMap.pwl([0, 1, 4], [0, 1, 10]), step01(),
    ])
    def test_bisection_agrees_with_auto(self, phi):
        tau = np.geomspace(1e-3, 1e8, 60)
        np.testing.assert_allclose(generalized_inverse(phi, tau, method="bisect"),
                                   generalized_inverse(phi, tau), rtol=1e-9)

    def test_unknown_method(self):
        with pytest.raises(ValueError):
            generalized_inverse(step01(), 1.0, method="newton")


class TestCompose:
    def test_power_of_power(self):
        assert power_compose(MonotoneMap.power_law(1, 2), 3)(2.0) == pytest.approx(64.0, rel=1e-15)

    def test_identity_power(self):
        phi = MonotoneMap.pwl([0, 1, 2], [0.5, 1, 4])
        t = np.linspace(0, 5, 41)
        np.testing.assert_array_equal(power_compose(phi, 1.0)(t), phi(t))

    def test_inverse_root(self):
        assert generalized_inverse(power_compose(MonotoneMap.power_law(1, 2), 2), 16.0) == pytest.approx(2.0)

    @pytest.mark.parametrize("p", [0.5, 2.0, 3.0])
    def test_composed_table_inverse_is_root_of_inverse(self, p):
        phi = MonotoneMap.pwl([0, 1, 3], [0, 1, 7])
        tau = np.geomspace(0.01, 1e6, 50)
        np.testing.assert_allclose(generalized_inverse(power_compose(phi, p), tau),
                                   generalized_inverse(phi, tau) ** (1 / p), rtol=1e-9)

    def test_normalized_map_cannot_be_composed(self):
        phi = MonotoneMap("power", (1.0, 2.0), normalized=True)
        with pytest.raises(ValueError):
            power_compose(phi, 2.0)


class TestLog:
    def test_exponential_gives_identity(self):
        t = np.linspace(0, 800, 101)
        np.testing.assert_allclose(log_transform(MonotoneMap.exp_power(1, 1)).__call__(t), t,
                                   rtol=1e-14, atol=1e-15)

    def test_log_of_zero(self):
        H = log_transform(MonotoneMap.pwl([0, 1, 2], [0, 0, 1]))
        assert np.all(np.isneginf(H(np.array([0.0, 0.5]))))
        assert H.at_zero == -INF

    def test_inverse_is_inverse_of_exp(self):
        H = log_transform(MonotoneMap.power_law(1, 2), 2.0)
        eta = np.linspace(-3, 40, 20)
        np.testing.assert_allclose(H.inverse(eta), np.exp(eta / 4), rtol=1e-12)

    def test_inverse_stays_finite_past_overflow(self):
        H = LogMap(MonotoneMap.exp_power(1, 1))
        assert H.inverse(2000.0) == pytest.approx(2000.0, rel=1e-14)


class TestConvexity:
    @pytest.mark.parametrize("phi", [MonotoneMap.power_law(1, 2), MonotoneMap.affine(2, 1),
                                     MonotoneMap.exp_power(1, 1), MonotoneMap.pwl([0, 1, 2], [0, 1, 3])])
    def test_convex(self, phi):
        assert check_convex(phi)

    def test_sqrt_not_convex(self):
        rep = check_convex(MonotoneMap.power_law(1, 0.5))
        assert not rep
        assert rep.worst_pair is not None and rep.worst_violation > 0

    def test_concave_table(self):
        assert not check_convex(MonotoneMap.pwl([0, 1, 2], [0, 2, 3]))


class TestSpecs:
    def test_inline_forms(self):
        assert parse_inline("power:1,2") == {"family": "power", "params": {"c": 1.0, "alpha": 2.0}}
        assert parse_spec("exp_power:1,1")(1.0) == pytest.approx(math.e)
        assert parse_spec("pwl:0:0,1:1;blowup=5")(5.0) == INF
        assert parse_spec("step:0:0,1:5")(1.0) == 5.0

    def test_json_roundtrip(self, tmp_path):
        phi = power_compose(MonotoneMap.pwl([0, 1, 2], [0, 1, 4], blowup=7), 2.0)
        spec = phi.to_spec()
        path = tmp_path / "phi.json"
        path.write_text(json.dumps(spec))
        again = parse_spec(str(path))
        t = np.linspace(0, 3, 31)
        np.testing.assert_array_equal(again(t), phi(t))
        assert from_spec(json.loads(json.dumps(spec))) == phi

    @pytest.mark.parametrize("text, field", [
        ("power:1", "params"),
        ("cubic:1,2", "family"),
        ('{"family": "power", "params": {"c": 1}}', "params.alpha"),
        ('{"family": "power", "params": {"c": "x", "alpha": 1}}', "params.c"),
        ('{"family": "pwl", "params": {"knots": [0, 1]}}', "params.knots"),
        ('{"family": "power"', ""),
    ])
    def test_errors_point_at_field(self, text, field):
        with pytest.raises(SpecError) as info:
            parse_spec(text)
        assert info.value.field == field


# ---------------------------------------------------------------------------
# properties

@st.composite
def tables(draw):
    m = draw(st.integers(2, 6))
    widths = draw(st.lists(st.floats(0.05, 3.0), min_size=m - 1, max_size=m - 1))
    incs = draw(st.lists(st.floats(0.0, 5.0), min_size=m - 1, max_size=m - 1))
    v0 = draw(st.floats(0.0, 2.0))
    knots = np.concatenate([[0.0], np.cumsum(widths)])
    values = np.concatenate([[v0], v0 + np.cumsum(incs)])
    step = draw(st.booleans())
    return MonotoneMap.step(knots, values) if step else MonotoneMap.pwl(knots, values)


analytic = st.one_of(
    st.builds(MonotoneMap.power_law, st.floats(0.1, 5), st.floats(0.2, 4)),
    st.builds(MonotoneMap.exp_power, st.floats(0.1, 2), st.floats(0.2, 2), st.floats(0, 3)),
    st.builds(MonotoneMap.affine, st.one_of(st.just(0.0), st.floats(0.01, 5)), st.floats(0, 5)),
)
maps = st.one_of(analytic, tables())
points = st.lists(st.floats(0.0, 50.0), min_size=2, max_size=20)


@settings(max_examples=60, deadline=None)
@given(maps, points)
def test_inverse_monotone(phi, taus):
    tau = np.sort(np.asarray(taus))
    inv = generalized_inverse(phi, tau)
    assert np.all(inv[1:] >= inv[:-1])


@settings(max_examples=60, deadline=None)
@given(maps, points)
def test_inverse_of_value_does_not_exceed_argument(phi, ts):
    t = np.asarray(ts)
    v = phi(t)
    # a value that overflowed to inf no longer identifies its argument
    t, v = t[np.isfinite(v)], v[np.isfinite(v)]
    back = generalized_inverse(phi, v)
    # on a nearly flat piece one ulp of the value moves the inverse a lot in
    # t, so fall back to comparing values there
    in_t = back <= t * (1 + 1e-9) + 1e-12
    in_value = phi(back) <= v * (1 + 4 * np.finfo(float).eps) + 1e-300
    assert np.all(in_t | in_value)


@settings(max_examples=60, deadline=None)
@given(maps, points, points)
def test_half_galois(phi, ts, taus):
    t = np.asarray(ts)[:, None]
    tau = np.asarray(taus)[None, :]
    above = phi(t) >= tau
    inv = np.broadcast_to(generalized_inverse(phi, tau), above.shape)
    assert np.all(inv[above] <= np.broadcast_to(t, above.shape)[above] * (1 + 1e-9) + 1e-12)


@settings(max_examples=40, deadline=None)
@given(st.builds(MonotoneMap.power_law, st.floats(0.1, 5), st.floats(0.2, 4)), points)
def test_strictly_increasing_roundtrip(phi, ts):
    t = np.asarray(ts)
    np.testing.assert_allclose(generalized_inverse(phi, phi(t)), t, rtol=1e-10, atol=1e-12)


@settings(max_examples=40, deadline=None)
@given(maps, st.sampled_from([0.5, 2.0, 3.0]))
def test_compose_inverse_property(phi, p):
    tau = np.geomspace(1e-2, 1e4, 30)
    np.testing.assert_allclose(generalized_inverse(power_compose(phi, p), tau),
                               generalized_inverse(phi, tau) ** (1 / p), rtol=1e-9, atol=1e-12)


@settings(max_examples=40, deadline=None)
@given(maps)
def test_values_non_decreasing(phi):
    t = np.concatenate([np.linspace(0, 20, 200), [INF]])
    v = phi(t)
    assert np.all(v[1:] >= v[:-1])
