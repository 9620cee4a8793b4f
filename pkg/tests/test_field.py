import numpy as np
import pytest

from umbilic.errors import DomainError, UnderResolved
from umbilic.field import (ChartGrid, PeriodicField, TorusLattice,
                           chart_derivative, periodic_derivative,
                           pointwise_map, trig_resample)

from _oracles import random_band_limited

LAT = TorusLattice(1j)
LAT_GEN = TorusLattice(0.3 + 1.1j)


def grid_st(n):
    s = np.arange(n) / n
    return np.meshgrid(s, s, indexing="ij")


class TestTorusLattice:
    def test_rejects_real_omega(self):
        with pytest.raises(ValueError):
            TorusLattice(2.0)

    def test_coordinate_roundtrip(self):
        z = 0.3 + 0.45 * LAT_GEN.omega
        s, t = LAT_GEN.z_to_st(z)
        assert abs(LAT_GEN.st_to_z(s, t) - z) < 1e-14

    def test_torus_distance_wraps(self):
        assert LAT.torus_distance(0.05, 0.95) == pytest.approx(0.1)


class TestPeriodicFieldValidation:
    def test_odd_resolution_rejected(self):
        with pytest.raises(ValueError):
            PeriodicField(LAT, np.zeros((9, 9)))

    def test_small_resolution_rejected(self):
        with pytest.raises(ValueError):
            PeriodicField(LAT, np.zeros((6, 6)))

    def test_real_tag_rejects_complex(self):
        vals = np.full((8, 8), 1.0 + 1e-6j)
        with pytest.raises(ValueError):
            PeriodicField(LAT, vals, real_tag=True)


class TestPeriodicDerivative:
    def test_d_of_sin_s(self):
        n = 64
        f = PeriodicField.from_function(LAT, n, lambda S, T: np.sin(2 * np.pi * S),
                                        real_tag=True)
        S, _ = grid_st(n)
        df = periodic_derivative(f, "D")
        assert np.max(np.abs(df.values - np.pi * np.cos(2 * np.pi * S))) < 1e-10

    def test_constant_derivative_is_exactly_zero(self):
        f = PeriodicField.constant(LAT, 32, 3.7)
        for direction in ("D", "Dbar"):
            assert periodic_derivative(f, direction).sup_norm() == 0.0

    def test_laplacian_eigenfunction(self):
        n = 64
        f = PeriodicField.from_function(
            LAT, n, lambda S, T: np.sin(2 * np.pi * S) * np.sin(2 * np.pi * T),
            real_tag=True)
        ddb = f.derivative("D").derivative("Dbar")
        assert np.max(np.abs(ddb.values + 2 * np.pi ** 2 * f.values)) < 1e-9

    @pytest.mark.parametrize("lattice", [LAT, LAT_GEN])
    @pytest.mark.parametrize("mode", [(1, 0), (0, 1), (3, -2), (-5, 7)])
    def test_single_mode_exactness(self, lattice, mode):
        n = 32
        j, k = mode
        f = PeriodicField.from_modes(lattice, n, {(j, k): 1.0})
        om = lattice.omega
        mult = (np.conj(om) * 2j * np.pi * j - 2j * np.pi * k) / (np.conj(om) - om)
        df = f.derivative("D")
        assert np.max(np.abs(df.values - mult * f.values)) < 1e-11 * max(1.0, abs(mult))

    @pytest.mark.parametrize("lattice", [LAT, LAT_GEN])
    def test_mixed_partials_commute(self, lattice):
        f = random_band_limited(11, lattice, n=64)
        a = f.derivative("D").derivative("Dbar")
        b = f.derivative("Dbar").derivative("D")
        scale = 1.0 + a.sup_norm()
        assert np.max(np.abs(a.values - b.values)) / scale < 1e-10

    @pytest.mark.parametrize("lattice", [LAT, LAT_GEN])
    def test_conjugation_duality(self, lattice):
        f = random_band_limited(7, lattice, n=64)
        df = f.derivative("D")
        dbf = f.derivative("Dbar")
        assert np.max(np.abs(dbf.values - np.conj(df.values))) < 1e-12 * (1 + df.sup_norm())

    def test_leibniz_with_dealiasing(self):
        f = random_band_limited(3, LAT, n=128, budget=4)
        g = random_band_limited(4, LAT, n=128, budget=4)
        lhs = f.mul(g).derivative("D")
        rhs = f.mul(g.derivative("D")).add(g.mul(f.derivative("D")))
        assert np.max(np.abs(lhs.values - rhs.values)) < 1e-9

    def test_tail_rejection(self):
        n = 64
        f = PeriodicField.from_modes(LAT, n, {(30, 0): 1.0, (-30, 0): 1.0})
        with pytest.raises(UnderResolved):
            f.derivative("D")
        # disabling the check allows the (still exact) derivative
        f.derivative("D", tail_tol=None)

    def test_invalid_direction(self):
        f = PeriodicField.constant(LAT, 16, 1.0)
        with pytest.raises(ValueError):
            f.derivative("Dz")


class TestDealiasedProducts:
    def test_resample_roundtrip(self):
        rng = np.random.default_rng(0)
        v = rng.normal(size=(32, 32)) + 1j * rng.normal(size=(32, 32))
        back = trig_resample(trig_resample(v, 64), 32)
        assert np.max(np.abs(back - v)) < 1e-13

    def test_band_limited_product_is_plain_product(self):
        a = PeriodicField.from_modes(LAT, 64, {(3, 0): 1.0, (-3, 0): 1.0})
        b = PeriodicField.from_modes(LAT, 64, {(2, 1): 0.5, (-2, -1): 0.5})
        prod = a.mul(b)
        assert np.max(np.abs(prod.values - a.values * b.values)) < 1e-13

    def test_aliasing_mode_is_projected_out(self):
        n = 16
        a = PeriodicField.from_modes(LAT, n, {(5, 0): 1.0})
        b = PeriodicField.from_modes(LAT, n, {(6, 0): 1.0})
        prod = a.mul(b)  # true mode 11 does not fit: projected away
        assert prod.sup_norm() < 1e-12


class TestPointwiseMaps:
    def test_exp_of_zero(self):
        f = PeriodicField.constant(LAT, 16, 0.0)
        out = pointwise_map([f], "exp")
        assert np.max(np.abs(out.values - 1.0)) == 0.0
        assert out.real_tag

    def test_reciprocal_of_two(self):
        f = PeriodicField.constant(LAT, 16, 2.0)
        out = pointwise_map([f], "reciprocal")
        assert np.max(np.abs(out.values - 0.5)) == 0.0

    def test_log_exp_roundtrip(self):
        f = random_band_limited(5, LAT, n=64, amplitude=0.8)
        out = f.exp().log()
        assert np.max(np.abs(out.values - f.values)) < 1e-12

    def test_log_domain_violation(self):
        f = PeriodicField.from_function(LAT, 32, lambda S, T: np.sin(2 * np.pi * S),
                                        real_tag=True)
        with pytest.raises(DomainError):
            pointwise_map([f], "log")

    def test_scale_and_add(self):
        f = PeriodicField.constant(LAT, 16, 1.0)
        g = PeriodicField.constant(LAT, 16, 2.0)
        out = pointwise_map([f, g], "add")
        assert np.max(np.abs(out.values - 3.0)) == 0.0
        out = pointwise_map([f], "scale", factor=-2.0)
        assert np.max(np.abs(out.values + 2.0)) == 0.0

    def test_modulus_is_real(self):
        f = PeriodicField.constant(LAT, 16, 3 - 4j)
        out = pointwise_map([f], "modulus")
        assert out.real_tag and np.max(np.abs(out.values - 5.0)) < 1e-14

    def test_mismatched_grids_rejected(self):
        f = PeriodicField.constant(LAT, 16, 1.0)
        g = PeriodicField.constant(LAT, 32, 1.0)
        with pytest.raises(ValueError):
            pointwise_map([f, g], "add")


class TestEvaluation:
    def test_matches_samples(self):
        f = random_band_limited(9, LAT_GEN, n=64)
        s = np.array([0.0, 0.25, 0.5])
        t = np.array([0.125, 0.5, 0.75])
        vals = f.evaluate_st(s, t)
        idx = (s * 64).astype(int), (t * 64).astype(int)
        assert np.max(np.abs(vals - f.values[idx])) < 1e-12

    def test_off_grid_closed_form(self):
        n = 64
        f = PeriodicField.from_function(
            LAT, n, lambda S, T: np.sin(2 * np.pi * S) * np.cos(2 * np.pi * T),
            real_tag=True)
        v = f.evaluate_st([0.123], [0.456])[0]
        assert abs(v - np.sin(2 * np.pi * 0.123) * np.cos(2 * np.pi * 0.456)) < 1e-13

    def test_evaluate_at_is_periodic(self):
        f = random_band_limited(2, LAT_GEN, n=64)
        z = 0.3 + 0.2j
        z_shift = z + 1.0 + LAT_GEN.omega
        assert abs(f.evaluate_at(z)[0] - f.evaluate_at(z_shift)[0]) < 1e-12


class TestChartGrid:
    def test_spacing(self):
        ch = ChartGrid("c1", 1.5, np.zeros((61, 61)), real_tag=True)
        assert ch.spacing == pytest.approx(3.0 / 60)

    def test_polynomial_derivatives_exact(self):
        ch = ChartGrid.from_function("c1", 1.2, 64, lambda Z: Z ** 2)
        dz = chart_derivative(ch, "D")
        dzb = chart_derivative(ch, "Dbar")
        Z = ch.z_grid()
        assert np.max(np.abs(dz.values - 2 * Z)) < 1e-11
        assert np.max(np.abs(dzb.values)) < 1e-11

    def test_smooth_function_accuracy(self):
        ch = ChartGrid.from_function("c1", 1.5, 192,
                                     lambda Z: -2 * np.log1p(np.abs(Z) ** 2),
                                     real_tag=True)
        ddb = ch.derivative("D").derivative("Dbar")
        Z = ch.z_grid()
        exact = -2.0 / (1 + np.abs(Z) ** 2) ** 2
        assert np.max(np.abs(ddb.values - exact)[ch.mask(1.0)]) < 1e-10

    def test_mask_region(self):
        ch = ChartGrid.from_function("c1", 1.0, 33, lambda Z: np.abs(Z) ** 2,
                                     real_tag=True)
        assert ch.sup_norm(0.5) == pytest.approx(0.25, abs=0.01)
        assert ch.sup_norm() == pytest.approx(1.0, abs=0.01)

    def test_clamped_sampling(self):
        # singular just outside the disk; clamped samples keep the interior clean
        ch = ChartGrid.from_function("c1", 0.95, 256,
                                     lambda Z: -2 * np.log(1 - np.abs(Z) ** 2),
                                     real_tag=True, clamp_radius=0.949)
        assert np.all(np.isfinite(ch.values))

    def test_spline_evaluation(self):
        ch = ChartGrid.from_function("c1", 1.0, 128, lambda Z: np.exp(Z))
        pts = np.array([0.1 + 0.2j, -0.3 + 0.05j])
        vals = ch.evaluate_at(pts)
        assert np.max(np.abs(vals - np.exp(pts))) < 1e-7
