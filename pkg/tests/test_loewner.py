import numpy as np
import pytest

from umbilic.loewner import (LoewnerNormalization, curved_hessian_residual,
                             loewner_solve, real_basis, tm_matrix,
                             tm_rank_report)
from umbilic.series import PowerSeries2


def random_g(seed, degree=10):
    rng = np.random.default_rng(seed)
    coeffs = {(k, l): rng.normal() + 1j * rng.normal()
              for k in range(degree + 1) for l in range(degree + 1 - k)}
    return PowerSeries2(degree, coeffs)


class TestRealBasis:
    @pytest.mark.parametrize("d", range(1, 8))
    def test_dimension(self, d):
        assert len(real_basis(d)) == d + 1

    @pytest.mark.parametrize("d", range(1, 6))
    def test_elements_are_real(self, d):
        for b in real_basis(d):
            assert b.real_tag
            z = 0.3 + 0.7j
            assert abs(b.eval(z).imag) < 1e-14


class TestTmMatrix:
    def test_shapes(self):
        assert tm_matrix(1).shape == (4, 7)
        assert tm_matrix(2).shape == (6, 9)

    def test_rejects_nonpositive_m(self):
        with pytest.raises(ValueError):
            tm_matrix(0)

    @pytest.mark.parametrize("m", [1, 2, 3, 5])
    def test_matrix_matches_formal_differentiation(self, m):
        # apply T_m through the series ops to a random domain vector and
        # compare with the matrix action
        rng = np.random.default_rng(m)
        M = tm_matrix(m)
        x = rng.normal(size=M.shape[1])
        fb = real_basis(m + 2)
        pb = real_basis(m + 1)
        f = PowerSeries2.zero(m + 2)
        for i, b in enumerate(fb):
            f = f.add(b.scale(x[i]))
        phi = PowerSeries2.zero(m + 1)
        for i, b in enumerate(pb):
            phi = phi.add(b.scale(x[len(fb) + i]))
        img = f.derivative("D").derivative("D").add(phi.derivative("D").scale(-2.0))
        want = np.zeros(2 * (m + 1))
        for j in range(m + 1):
            c = img.coeff(j, m - j)
            want[2 * j] = c.real
            want[2 * j + 1] = c.imag
        assert np.max(np.abs(M @ x - want)) < 1e-12

    @pytest.mark.parametrize("m", range(1, 13))
    def test_rank_and_nullity(self, m):
        assert tm_rank_report(m) == (2 * m + 2, 3)


class TestLoewnerSolve:
    def test_zero_data(self):
        sol = loewner_solve(PowerSeries2.zero(10), 12)
        assert sol.f.coeffs == {(1, 0): 1.0, (0, 1): 1.0}
        assert sol.phi.coeffs == {}
        assert sol.residual_norm == 0.0

    def test_constant_data(self):
        g0 = 2.0 + 1.0j
        sol = loewner_solve(PowerSeries2.constant(g0, 4), 6)
        assert abs(sol.f.coeff(2, 0) - g0 / 2) < 1e-14
        assert abs(sol.f.coeff(0, 2) - np.conj(g0) / 2) < 1e-14
        assert abs(sol.f.coeff(1, 1)) == 0.0
        assert sol.phi.coeffs == {}

    def test_zbar_data(self):
        sol = loewner_solve(PowerSeries2(6, {(0, 1): 1.0}), 8)
        assert sol.residual_norm <= 1e-12
        for k in range(2, 8):
            assert abs(sol.phi.coeff(k, 0)) == 0.0
            assert abs(sol.phi.coeff(0, k)) == 0.0

    def test_degree_one_part_is_exact(self):
        sol = loewner_solve(random_g(5), 12)
        assert sol.f.coeff(1, 0) == 1.0 and sol.f.coeff(0, 1) == 1.0
        assert sol.phi.coeff(0, 0) == 0.0
        assert sol.phi.coeff(1, 0) == 0.0 and sol.phi.coeff(0, 1) == 0.0

    @pytest.mark.parametrize("seed", [0, 1, 2])
    def test_random_data_residual(self, seed):
        sol = loewner_solve(random_g(seed), 12)
        assert sol.residual_norm <= 1e-9

    def test_reality_is_structural(self):
        sol = loewner_solve(random_g(9), 10)
        for series in (sol.f, sol.phi):
            for (k, l), c in series.coeffs.items():
                assert abs(np.conj(series.coeff(l, k)) - c) < 1e-13

    def test_deterministic_reruns(self):
        g = random_g(33)
        a = loewner_solve(g, 12)
        b = loewner_solve(g, 12)
        assert a.f.coeffs == b.f.coeffs
        assert a.phi.coeffs == b.phi.coeffs

    def test_diagonal_prescription_honored(self):
        norm = LoewnerNormalization(f_diag=[0.7, -0.3], phi_diag=[0.2])
        sol = loewner_solve(random_g(4), 8, norm)
        assert abs(sol.f.coeff(1, 1) - 0.7) < 1e-12
        assert abs(sol.f.coeff(2, 2) - (-0.3)) < 1e-12
        assert abs(sol.phi.coeff(1, 1) - 0.2) < 1e-12
        assert sol.residual_norm <= 1e-9

    def test_input_validation(self):
        with pytest.raises(ValueError):
            loewner_solve(PowerSeries2.zero(10), 1)
        with pytest.raises(ValueError):
            loewner_solve(PowerSeries2.zero(3), 12)


class TestCurvedHessianResidual:
    def test_solution_residual_is_tiny(self):
        g = random_g(12)
        sol = loewner_solve(g, 12)
        resid = curved_hessian_residual(sol.f, sol.phi, g, 12)
        assert resid <= 1e-9 * (1.0 + g.max_coeff())

    def test_detects_wrong_candidate(self):
        f = PowerSeries2(4, {(1, 0): 1.0, (0, 1): 1.0, (2, 0): 1.0, (0, 2): 1.0},
                         real_tag=True)
        phi = PowerSeries2.zero(3)
        g = PowerSeries2.zero(2)
        assert curved_hessian_residual(f, phi, g, 4) == pytest.approx(2.0)

    def test_requires_enough_degrees(self):
        with pytest.raises(ValueError):
            curved_hessian_residual(PowerSeries2.zero(3), PowerSeries2.zero(3),
                                    PowerSeries2.zero(3), 8)
