import math

import numpy as np
import pytest

from qlab.extremal import (ExtremalError, ExtremalMap, growth_witness, normalize_phi, solve_k,
                           solve_profile)
from qlab.monotone import MonotoneMap, evaluate


@pytest.fixture(scope="module")
def square_plane():
    return ExtremalMap.build(MonotoneMap.power_law(1, 2), 2)


@pytest.fixture(scope="module")
def square_space():
    return ExtremalMap.build(MonotoneMap.power_law(1, 2), 3)


class TestSquare:
    """phi = t^2: K = r^(-2/3), I(t) = 1.5 t^(2/3), gamma = 1."""

    def test_point_values(self, square_plane):
        p = square_plane.profile
        assert p.gamma == 1.0
        assert p.K(0.125) == pytest.approx(4.0, rel=1e-12)
        assert p.I(0.125) == pytest.approx(0.375, rel=1e-9)
        np.testing.assert_allclose(square_plane.eval_map([0.125, 0.0]), [math.exp(0.375), 0.0], rtol=1e-9)

    def test_grid_values(self, square_plane):
        p = square_plane.profile
        np.testing.assert_allclose(p.K_values, p.r_grid ** (-2 / 3), rtol=1e-12)
        np.testing.assert_allclose(p.I_table, 1.5 * p.r_grid ** (2 / 3), rtol=1e-9)
        assert square_plane.R == pytest.approx(math.exp(1.5), rel=1e-9)

    @pytest.mark.parametrize("t", [1e-10, 1e-8, 3e-7, 1e-3, 0.3, 0.77, 1.0])
    def test_I_between_and_below_nodes(self, square_plane, t):
        assert square_plane.profile.I(t) == pytest.approx(1.5 * t ** (2 / 3), rel=1e-8)

    def test_tail_below_grid(self, square_plane):
        p = square_plane.profile
        assert p.tail_model == "by parts"
        assert p.tail_I == pytest.approx(1.5e-4, rel=1e-10)
        assert p.tail_I <= p.tail_bound
        assert p.tail_exponent == pytest.approx(2 / 3, rel=1e-9)

    def test_slope_of_I(self, square_plane):
        # dI/dr = 1/(r K): C^1 check by central differences
        p = square_plane.profile
        for r in (1e-4, 0.01, 0.5):
            h = 1e-5 * r
            slope = (p.I(r + h) - p.I(r - h)) / (2 * h)
            assert slope == pytest.approx(1 / (r * p.K(r)), rel=1e-6)

    def test_distortions(self, square_plane):
        d = square_plane.distortions(0.125)
        assert d.K_O == pytest.approx(4.0, rel=1e-12)
        assert d.tangential / d.radial == pytest.approx(4.0, rel=1e-12)
        assert d.tangential == pytest.approx(8 * math.exp(0.375), rel=1e-9)

    def test_energy_plane(self, square_plane):
        energy, bound = square_plane.phi_energy()
        assert energy == pytest.approx(3 * math.pi, rel=1e-6)
        assert bound == pytest.approx(3 * math.pi, rel=1e-9)

    def test_energy_space(self, square_space):
        energy, bound = square_space.phi_energy()
        assert energy == pytest.approx(12 * math.pi / 5, rel=1e-6)
        assert bound == pytest.approx(6 * math.pi, rel=1e-9)
        assert energy <= bound

    def test_eval_map_is_radial_stretch(self, square_space):
        x = np.array([[0.1, 0.2, -0.3], [0.0, 0.0, 0.5]])
        y = square_space.eval_map(x)
        r = np.linalg.norm(x, axis=-1)
        np.testing.assert_allclose(np.linalg.norm(y, axis=-1), np.exp(1.5 * r ** (2 / 3)), rtol=1e-9)
        np.testing.assert_allclose(y / np.linalg.norm(y, axis=-1)[:, None], x / r[:, None], rtol=1e-12)

    def test_invariants(self, square_plane):
        inv = square_plane.profile.invariants
        assert inv["K_at_1"] == pytest.approx(1.0)
        assert all(v for k, v in inv.items() if isinstance(v, bool))

    def test_table_and_summary(self, square_plane):
        tab = square_plane.table()
        assert tab.shape == (4096, 5)
        np.testing.assert_allclose(tab[:, 4], tab[:, 1] ** 2, rtol=1e-12)
        np.testing.assert_allclose(tab[:, 3], np.exp(tab[:, 2]))
        s = square_plane.summary()
        assert s["R"] == pytest.approx(math.exp(1.5)) and s["grid"] == 4096


def test_radial_limit(square_plane):
    rep = square_plane.boundary_report([1e-8, 1e-10, 1e-12])
    np.testing.assert_allclose(rep.rho - 1, np.expm1(1.5 * rep.t ** (2 / 3)), rtol=1e-6)
    assert np.all(rep.rho - 1 < 1e-3)
    assert rep.rho_monotone and rep.oscillation_ok
    # the image of a small circle still has diameter about 2
    np.testing.assert_allclose(rep.oscillation, 2.0, rtol=1e-4)


def test_direction_is_kept_near_the_puncture(square_plane):
    eta = np.array([0.6, 0.8])
    # |f(t eta) - eta| = rho(t) - 1 = expm1(1.5 t^(2/3))
    assert np.linalg.norm(square_plane.eval_map(1e-8 * eta) - eta) < 1e-4
    dev = np.linalg.norm(square_plane.eval_map(1e-6 * eta) - eta)
    assert dev == pytest.approx(math.expm1(1.5e-4), rel=1e-6)


def test_unit_sphere_limits(square_space):
    assert square_space.distortions(1 - 1e-9).K_O == pytest.approx(1.0, abs=1e-8)
    x = np.array([1 - 1e-9, 0.0, 0.0])
    assert np.linalg.norm(square_space.eval_map(x)) == pytest.approx(square_space.R, rel=1e-8)


@pytest.mark.parametrize("phi", [MonotoneMap.power_law(1, 2), MonotoneMap.exp_power(1, 0.5),
                                 MonotoneMap.pwl([0, 1, 2, 4], [0, 1, 4, 16])])
def test_interpolated_I_is_monotone(phi):
    p = solve_profile(phi, grid_size=256)
    t = np.geomspace(1e-9, 1, 4001)
    assert np.all(np.diff(p.I(t)) >= 0)


def test_linear_map():
    # phi = 2t: gamma = sqrt 2, K = 1/r, I(t) = t
    m = ExtremalMap.build(MonotoneMap.affine(2, 0), 2)
    assert m.gamma == pytest.approx(math.sqrt(2))
    np.testing.assert_allclose(m.profile.K_values, 1 / m.profile.r_grid, rtol=1e-12)
    assert m.profile.I(0.5) == pytest.approx(0.5, rel=1e-9)
    assert m.R == pytest.approx(math.e, rel=1e-9)


def test_identity_map():
    # phi = t is accepted (int d tau / tau^2 converges): K = 1/r, I(t) = t
    m = ExtremalMap.build(MonotoneMap.affine(1, 0), 3)
    assert m.gamma == 1.0
    assert m.profile.I(0.25) == pytest.approx(0.25, rel=1e-9)


@pytest.mark.parametrize("grid", [512, 4096])
def test_sub_exponential_closed_form(grid):
    # phi = exp(sqrt t): K(1) = 1 and, parametrizing by K,
    # I(1) = int_1^inf (1/(2K^2) + 1/(4K^(3/2))) dK = 1
    p = solve_profile(MonotoneMap.exp_power(1, 0.5), grid_size=grid)
    assert p.K_values[-1] == pytest.approx(1.0, rel=1e-12)
    assert p.I_table[-1] == pytest.approx(1.0, rel=1e-10)
    # the same formula from any K0: I = 1/(2 K0) + 1/(2 sqrt K0)
    K0 = p.K_values[0]
    assert p.tail_I == pytest.approx(0.5 / K0 + 0.5 / math.sqrt(K0), rel=1e-9)
    t = 1e-9
    k = p.K(t)
    assert p.I(t) == pytest.approx(0.5 / k + 0.5 / math.sqrt(k), rel=1e-9)


def test_sub_exponential_map_builds():
    m = ExtremalMap.build(MonotoneMap.exp_power(1, 0.5), 2)
    inv = m.profile.invariants
    assert inv["residual_ok"] and inv["K_decreasing"] and inv["upper_bound_ok"] and inv["lower_bound_ok"]
    energy, bound = m.phi_energy()
    # in the plane the energy is gamma^2 omega I(1), the bound itself
    assert energy == pytest.approx(bound, rel=1e-12)
    assert ExtremalMap(3, m.profile).phi_energy()[0] < bound


class TestNormalization:
    def test_identity_below_one(self):
        phi = normalize_phi(MonotoneMap.power_law(1, 2))
        np.testing.assert_allclose(evaluate(phi, [0.0, 0.25, 0.5]), [0.0, 0.25, 0.5])
        np.testing.assert_allclose(evaluate(phi, [2.0, 3.0]), [4.0, 9.0])

    def test_max_with_identity(self):
        # 0.5 t^2 is below t on [1, 2]
        phi = normalize_phi(MonotoneMap.power_law(0.5, 2))
        np.testing.assert_allclose(evaluate(phi, [1.5, 4.0]), [1.5, 8.0])

    def test_idempotent(self):
        phi = normalize_phi(MonotoneMap.power_law(1, 2))
        assert normalize_phi(phi) is phi

    @pytest.mark.parametrize("phi, reason", [
        (MonotoneMap.exp_power(1, 1), "diverges"),
        (MonotoneMap.power_law(1, 0.5), "growth"),
        (MonotoneMap.affine(0, 3), "growth"),
        (MonotoneMap.exp_power(1, 2), "diverges"),
    ])
    def test_rejections(self, phi, reason):
        with pytest.raises(ExtremalError, match=reason):
            ExtremalMap.build(phi, 2)


@pytest.mark.parametrize("phi, C", [
    (MonotoneMap.affine(3, 0), 3.0),
    (MonotoneMap.power_law(1, 2), 1.0),
])
def test_growth_witness(phi, C):
    w = growth_witness(phi)
    assert w.C == pytest.approx(C)
    assert np.all(evaluate(phi, 2.0 ** np.arange(int(math.log2(w.T)), 60)) >= w.C * 2.0 ** np.arange(
        int(math.log2(w.T)), 60) * (1 - 1e-12))


def test_growth_witness_skips_flat_start():
    phi = MonotoneMap.pwl([0, 4, 5], [0, 0, 10])
    w = growth_witness(phi)
    assert w.T == 8.0 and w.C > 0


def test_solve_k_residual():
    phi = normalize_phi(MonotoneMap.exp_power(1, 0.5))
    gamma = math.sqrt(float(evaluate(phi, 1.0)))
    r = np.geomspace(1e-6, 1, 20)
    K, res = solve_k(phi, gamma, r)
    np.testing.assert_allclose(K * evaluate(phi, K), (gamma / r) ** 2, rtol=1e-10)
    assert np.all(res <= 1e-10)


@pytest.mark.parametrize("bad", [
    lambda m: m.eval_map([0.0, 0.0]),
    lambda m: m.eval_map([1.0, 0.0]),
    lambda m: m.eval_map([0.1, 0.1, 0.1]),
    lambda m: m.distortions(1.0),
    lambda m: m.boundary_report([0.0]),
    lambda m: m.profile.I(1.5),
])
def test_domain_errors(square_plane, bad):
    with pytest.raises(ValueError):
        bad(square_plane)


def test_profile_arguments():
    with pytest.raises(ValueError):
        solve_profile(MonotoneMap.power_law(1, 2), grid_size=1)
    with pytest.raises(ValueError):
        solve_profile(MonotoneMap.power_law(1, 2), r_min=2.0)
    with pytest.raises(ValueError):
        ExtremalMap(1, solve_profile(MonotoneMap.power_law(1, 2), grid_size=16))
