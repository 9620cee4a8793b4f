import numpy as np
import pytest

from umbilic.cartan import (FORMS, MetricInput, cartan_r, cartan_r_all_forms,
                            covariant_hessian_zz, gauss_curvature,
                            kzz_identity_residual, potential_from_metric,
                            rigid_r_from_F, spherical_test)
from umbilic.errors import NotPseudoconvex
from umbilic.field import ChartGrid, PeriodicField, TorusLattice
from umbilic.series import PowerSeries2

from _oracles import fd_cartan_r, fd_covariant_hessian, random_band_limited

LAT = TorusLattice(1j)


def fs_chart(d=1, radius=1.5, n=192):
    return ChartGrid.from_function(
        "c1", radius, n, lambda Z: np.log(d) - 2 * np.log1p(np.abs(Z) ** 2),
        real_tag=True)


class TestPotentialFromMetric:
    def test_gaussian_metric_gives_zero_potential(self):
        h = ChartGrid.from_function("c1", 1.5, 128,
                                    lambda Z: np.exp(-np.abs(Z) ** 2), real_tag=True)
        u = potential_from_metric(h)
        assert u.sup_norm(1.0) < 1e-8

    def test_fubini_study_metric(self):
        h = ChartGrid.from_function("c1", 1.5, 192,
                                    lambda Z: 1.0 / (1 + np.abs(Z) ** 2), real_tag=True)
        u = potential_from_metric(h)
        Z = h.z_grid()
        expect = -2 * np.log1p(np.abs(Z) ** 2)
        assert np.max(np.abs(u.values - expect)[h.mask(1.0)]) < 1e-9

    def test_concave_metric_rejected(self):
        h = ChartGrid.from_function("c1", 1.0, 64,
                                    lambda Z: np.exp(+np.abs(Z) ** 2), real_tag=True)
        with pytest.raises(NotPseudoconvex):
            potential_from_metric(h)

    def test_metric_input_wrapper(self):
        h = ChartGrid.from_function("c1", 1.0, 64,
                                    lambda Z: np.exp(-np.abs(Z) ** 2), real_tag=True)
        mi = MetricInput("metric_h", h)
        assert mi.potential().sup_norm(0.5) < 1e-8
        with pytest.raises(ValueError):
            MetricInput("potential_u", h.derivative("D"))  # not real-tagged


class TestCartanR:
    def test_constant_potential_killed(self):
        u = PeriodicField.constant(LAT, 64, 1.3)
        for form in FORMS:
            assert cartan_r(u, form).r.sup_norm() <= 1e-10

    @pytest.mark.parametrize("d", [1, 2, 3])
    def test_fubini_study_killed_on_chart(self, d):
        r = cartan_r(fs_chart(d), "p_form").r
        assert r.sup_norm(1.0) <= 1e-8

    def test_three_forms_agree_and_match_fd_oracle(self):
        u = PeriodicField.from_function(
            LAT, 128,
            lambda S, T: 0.3 * np.cos(2 * np.pi * S) + 0.2 * np.sin(2 * np.pi * T),
            real_tag=True)
        forms = cartan_r_all_forms(u, tol=1e-7)
        rs = [forms[f].r for f in FORMS]
        scale = 1.0 + max(r.sup_norm() for r in rs)
        for i in range(3):
            for j in range(i + 1, 3):
                assert np.max(np.abs(rs[i].values - rs[j].values)) / scale < 1e-7
        oracle = fd_cartan_r(u.values, LAT.omega)
        assert np.max(np.abs(rs[1].values - oracle)) / scale < 1e-5

    def test_invalid_form(self):
        u = PeriodicField.constant(LAT, 16, 0.0)
        with pytest.raises(ValueError):
            cartan_r(u, "divergence")

    def test_requires_real_potential(self):
        f = PeriodicField.constant(LAT, 16, 1j)
        with pytest.raises(ValueError):
            cartan_r(f, "p_form")

    @pytest.mark.parametrize("form", FORMS)
    @pytest.mark.parametrize("shift", [-3.0, 1.0, 10.0])
    def test_constant_shift_invariance(self, form, shift):
        u = random_band_limited(21, LAT, n=128)
        rA = cartan_r(u, form).r
        rB = cartan_r(u + shift, form).r
        scale = 1.0 + rA.sup_norm()
        assert np.max(np.abs(rA.values - rB.values)) / scale <= 1e-10


class TestGaussCurvature:
    def test_flat(self):
        u = PeriodicField.constant(LAT, 32, 0.0)
        assert gauss_curvature(u).sup_norm() == 0.0

    @pytest.mark.parametrize("d", [1, 2, 3])
    def test_round_sphere(self, d):
        K = gauss_curvature(fs_chart(d))
        err = np.abs(K.values - 4.0 / d)
        assert np.max(err[K.mask(1.0)]) < 1e-8

    def test_hyperbolic(self):
        ch = ChartGrid.from_function("c1", 0.95, 384,
                                     lambda Z: -2 * np.log(1 - np.abs(Z) ** 2),
                                     real_tag=True, clamp_radius=0.949)
        K = gauss_curvature(ch)
        assert np.max(np.abs(K.values + 4.0)[K.mask(0.8)]) < 1e-8


class TestCovariantHessian:
    def test_flat_hessian_of_re_z2(self):
        ch = ChartGrid.from_function("c1", 1.0, 64, lambda Z: (Z ** 2).real,
                                     real_tag=True)
        phi = ChartGrid.from_function("c1", 1.0, 64, lambda Z: np.zeros(Z.shape),
                                      real_tag=True)
        h = covariant_hessian_zz(ch, phi)
        assert np.max(np.abs(h.values - 1.0)) < 1e-9

    def test_flat_hessian_of_abs2(self):
        ch = ChartGrid.from_function("c1", 1.0, 64, lambda Z: np.abs(Z) ** 2,
                                     real_tag=True)
        phi = ChartGrid.from_function("c1", 1.0, 64, lambda Z: np.zeros(Z.shape),
                                      real_tag=True)
        assert np.max(np.abs(covariant_hessian_zz(ch, phi).values)) < 1e-9

    def test_against_fd_oracle(self):
        # n and the band are chosen so the oracle's own 4th-order error
        # sits below the stated tolerance
        f = random_band_limited(31, LAT, n=256, budget=2, amplitude=0.4)
        phi = random_band_limited(32, LAT, n=256, budget=2, amplitude=0.3)
        got = covariant_hessian_zz(f, phi)
        oracle = fd_covariant_hessian(f.values, phi.values.real, LAT.omega)
        scale = 1.0 + got.sup_norm()
        assert np.max(np.abs(got.values - oracle)) / scale < 1e-6


class TestKzzIdentity:
    def test_constant(self):
        u = PeriodicField.constant(LAT, 32, 0.5)
        assert kzz_identity_residual(u) == 0.0

    def test_trig_potential(self):
        u = PeriodicField.from_function(
            LAT, 128,
            lambda S, T: 0.25 * np.cos(2 * np.pi * S) + 0.15 * np.cos(2 * np.pi * T),
            real_tag=True)
        P = cartan_r(u, "p_form").r
        assert kzz_identity_residual(u) / (1.0 + P.sup_norm()) <= 1e-7

    def test_fubini_study(self):
        assert kzz_identity_residual(fs_chart(1), region_radius=1.0) <= 1e-8


class TestSphericalTest:
    def test_fubini_study_is_spherical(self):
        assert spherical_test(fs_chart(2), 1e-6, region_radius=1.0)

    def test_constant_torus_is_spherical(self):
        assert spherical_test(PeriodicField.constant(LAT, 64, 0.2), 1e-6)

    def test_generic_potential_is_not(self):
        u = PeriodicField.from_function(
            LAT, 128, lambda S, T: 0.1 + 0.3 * np.cos(2 * np.pi * S), real_tag=True)
        assert not spherical_test(u, 1e-6)


class TestRigidFrontEnd:
    def test_quadric_is_spherical(self):
        F = PowerSeries2(6, {(1, 1): 1.0}, real_tag=True)
        r = rigid_r_from_F(F)
        assert r.max_degree == 2 and r.max_coeff() == 0.0

    def test_rotational_quartic_vanishes_at_origin(self):
        F = PowerSeries2(8, {(1, 1): 1.0, (2, 2): 1.0}, real_tag=True)
        r = rigid_r_from_F(F)
        assert abs(r.eval(0.0)) < 1e-12

    def test_sextic_coefficient_is_48_eps(self):
        # the degree-4 part of log F_{z zbar} is 8 eps (z^3 zbar + z zbar^3)
        # and D^3 Dbar(z^3 zbar) = 6, so r(0) = 48 eps exactly; the
        # correspondence test below confirms it through the field pipeline
        for eps in (1e-3, 0.01, 0.1):
            F = PowerSeries2(10, {(1, 1): 1.0, (4, 2): eps, (2, 4): eps},
                             real_tag=True)
            r = rigid_r_from_F(F)
            assert abs(r.eval(0.0) - 48.0 * eps) < 1e-10 * max(1.0, 48 * eps)

    def test_normal_form_violations_rejected(self):
        with pytest.raises(ValueError):
            rigid_r_from_F(PowerSeries2(6, {(1, 1): 2.0}, real_tag=True))
        with pytest.raises(ValueError):
            rigid_r_from_F(PowerSeries2(6, {(1, 1): 1.0, (2, 1): 0.5, (1, 2): 0.5},
                                        real_tag=True))
        with pytest.raises(ValueError):
            rigid_r_from_F(PowerSeries2(6, {(1, 1): 1.0}))  # no reality tag

    def test_bundle_correspondence(self):
        # rigid invariant of F = -log h against the field pipeline of h;
        # the evaluation points stay where the degree-12 truncation of r
        # is converged
        eps = 0.05
        F = PowerSeries2(16, {(1, 1): 1.0, (4, 2): eps, (2, 4): eps}, real_tag=True)
        r_series = rigid_r_from_F(F)

        def h_fn(Z):
            W = np.abs(Z) ** 2
            Fval = W + eps * (Z ** 4 * np.conj(Z) ** 2 + Z ** 2 * np.conj(Z) ** 4).real
            return np.exp(-Fval)

        # six nested finite-difference levels amplify roundoff like h^-6,
        # so a moderate h beats a fine one here
        h = ChartGrid.from_function("c1", 1.0, 96, h_fn, real_tag=True)
        u = potential_from_metric(h)
        r_chart = cartan_r(u, "p_form").r
        pts = np.array([0.0, 0.08, 0.05 + 0.06j, -0.09j, 0.07 - 0.02j])
        got = r_chart.evaluate_at(pts)
        want = np.array([r_series.eval(z) for z in pts])
        assert np.max(np.abs(got - want)) < 1e-6


class TestConstantCurvatureKill:
    def test_curvature_constant_implies_r_zero(self):
        u = fs_chart(3)
        K = gauss_curvature(u)
        km = K.values[K.mask(1.0)]
        assert np.max(np.abs(km - km.mean())) < 1e-9
        assert cartan_r(u, "p_form").r.sup_norm(1.0) <= 1e-8
