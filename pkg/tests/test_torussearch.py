import numpy as np
import pytest

from umbilic.cartan import cartan_r
from umbilic.errors import SymmetryViolated, TotallyDegenerate
from umbilic.field import TorusLattice
from umbilic.torussearch import (SearchConfig, SymmetryDirection, TrigPotential,
                                 chern_normalize, chern_number,
                                 min_modulus_objective,
                                 symmetric_obstruction_check, torus_search)

from _oracles import one_directional, random_half_modes

LAT = TorusLattice(1j)
LAT_GEN = TorusLattice(0.3 + 1.1j)


class TestTrigPotential:
    def test_reality_enforced(self):
        with pytest.raises(ValueError):
            TrigPotential(LAT, {(1, 0): 1.0 + 0.5j})
        with pytest.raises(ValueError):
            TrigPotential(LAT, {(0, 0): 1j})

    def test_half_mode_construction(self):
        pot = TrigPotential.from_half_modes(LAT, {(1, 0): 0.5 + 0.25j})
        assert pot.modes[(-1, 0)] == 0.5 - 0.25j

    def test_field_matches_direct_evaluation(self):
        pot = TrigPotential.from_half_modes(LAT, {(1, 0): 0.2, (1, 1): 0.1j})
        n = 32
        f = pot.to_field(n)
        s = np.arange(n) / n
        S, T = np.meshgrid(s, s, indexing="ij")
        direct = np.zeros((n, n), dtype=complex)
        for (j, k), c in pot.modes.items():
            direct += c * np.exp(2j * np.pi * (j * S + k * T))
        assert np.max(np.abs(f.values - direct)) < 1e-12
        assert f.real_tag

    def test_mode_budget(self):
        pot = TrigPotential.from_half_modes(LAT, {(2, 1): 0.1, (0, 3): 0.05})
        assert pot.mode_budget == 3


class TestObjective:
    def test_constant_is_degenerate_zero(self):
        assert min_modulus_objective(TrigPotential(LAT, {(0, 0): 0.7}), 64) == 0.0

    def test_one_directional_forced_to_zero(self):
        # 0.4 cos(2 pi s): the symmetry obstruction forces zeros of the
        # invariant, which the refined minimum then pins to exactly 0
        pot = TrigPotential.from_half_modes(LAT, {(1, 0): 0.2})
        assert min_modulus_objective(pot, 128) == 0.0

    def test_mixed_potential_in_range_and_shift_invariant(self):
        pot = TrigPotential.from_half_modes(
            LAT, {(1, 0): 0.15, (0, 1): -0.1j, (1, 1): 0.05})
        v = min_modulus_objective(pot, 128)
        assert 0.0 <= v < 1.0
        v5 = min_modulus_objective(pot.shifted(5.0), 128)
        assert abs(v - v5) <= 1e-10

    def test_rejects_tiny_grid(self):
        with pytest.raises(ValueError):
            min_modulus_objective(TrigPotential(LAT, {(0, 0): 0.0}), 32)

    @pytest.mark.parametrize("seed", [0, 2, 5])
    def test_resolution_stability(self, seed):
        # band-limited potentials evaluate consistently across a grid doubling
        pot = TrigPotential.from_half_modes(LAT, random_half_modes(seed, scale=0.12))
        o1 = min_modulus_objective(pot, 96)
        o2 = min_modulus_objective(pot, 192)
        top = max(o1, o2)
        assert top == 0.0 or abs(o1 - o2) <= 0.1 * top


class TestObstruction:
    def test_cosine_potential_has_zero_curves(self):
        pot = TrigPotential.from_half_modes(LAT, {(1, 0): 0.2})
        rep = symmetric_obstruction_check(pot, SymmetryDirection(0.0, 1.0))
        assert rep.zeros_found and rep.zero_clusters
        assert max(rep.residuals) <= 1e-6
        assert rep.dpsi_sign_change
        assert rep.proof_identity_residual <= 1e-7

    def test_constant_is_degenerate(self):
        with pytest.raises(TotallyDegenerate):
            symmetric_obstruction_check(TrigPotential(LAT, {(0, 0): 0.4}),
                                        SymmetryDirection(0.0, 1.0))

    def test_wrong_direction_rejected(self):
        pot = TrigPotential.from_half_modes(LAT, {(1, 0): 0.2})
        with pytest.raises(SymmetryViolated):
            symmetric_obstruction_check(pot, SymmetryDirection(1.0, 0.0))

    def test_diagonal_direction_and_1d_oracle(self):
        pot, Y = one_directional(LAT, (1, 1), {1: 0.15, 2: 0.04})
        rep = symmetric_obstruction_check(pot, Y)
        assert rep.zeros_found and max(rep.residuals) <= 1e-6

        # 1-d reduction oracle: r = const * profile(xi) with
        # profile = U'''' - 3 U' U''' + 2 (U')^2 U'' - (U'')^2; zero
        # crossings of the reduced profile must match the cluster count
        m = 4096
        xi = np.arange(m) / m
        U = np.zeros(m)
        for k, c in {1: 0.15, 2: 0.04}.items():
            U += 2 * (c * np.exp(2j * np.pi * k * xi)).real
        freq = np.fft.fftfreq(m, 1 / m)
        der = lambda v, p: np.fft.ifft(np.fft.fft(v) * (2j * np.pi * freq) ** p).real
        prof = (der(U, 4) - 3 * der(U, 1) * der(U, 3)
                + 2 * der(U, 1) ** 2 * der(U, 2) - der(U, 2) ** 2)
        crossings = int(np.sum(np.sign(prof) != np.sign(np.roll(prof, -1))))
        assert crossings == len(rep.zero_clusters)

    def test_general_lattice(self):
        pot, Y = one_directional(LAT_GEN, (0, 1), {1: 0.18})
        rep = symmetric_obstruction_check(pot, Y)
        assert rep.zeros_found and max(rep.residuals) <= 1e-6


class TestChern:
    def test_flat_potential_closed_form(self):
        u0 = TrigPotential(LAT, {})
        out = chern_normalize(u0, 1)
        assert abs(out.modes[(0, 0)] - np.log(np.pi)) < 1e-12
        assert abs(chern_number(out) - 1.0) <= 1e-10

    def test_idempotent(self):
        pot = TrigPotential.from_half_modes(LAT, random_half_modes(8, scale=0.1))
        once = chern_normalize(pot, 2)
        twice = chern_normalize(once, 2)
        assert abs(once.modes[(0, 0)] - twice.modes[(0, 0)]) < 1e-12

    def test_quadrature_and_invariance(self):
        pot = TrigPotential.from_half_modes(LAT_GEN, random_half_modes(5, scale=0.08))
        out = chern_normalize(pot, 2)
        assert abs(chern_number(out) - 2.0) <= 1e-10 * 2.0
        rA = cartan_r(pot.to_field(128), "p_form").r
        rB = cartan_r(out.to_field(128), "p_form").r
        assert np.max(np.abs(rA.values - rB.values)) <= 1e-10 * (1 + rA.sup_norm())

    def test_rejects_nonpositive_chern(self):
        with pytest.raises(ValueError):
            chern_normalize(TrigPotential(LAT, {}), 0)


class TestSearch:
    def test_deterministic_and_budgeted(self):
        cfg = SearchConfig(lattice=LAT, mode_budget=1, trials=2, evaluations=15,
                           seed=42, grid_n=64)
        a = torus_search(cfg)
        b = torus_search(cfg)
        assert a.results_payload() == b.results_payload()
        assert 0.0 <= a.objective <= 1.0

    def test_s_only_restriction_reports_zero(self):
        cfg = SearchConfig(lattice=LAT, mode_budget=2, trials=1, evaluations=12,
                           seed=7, grid_n=64, mode_filter="s_only")
        rep = torus_search(cfg)
        assert rep.objective == 0.0

    def test_payload_excludes_wall_time(self):
        cfg = SearchConfig(lattice=LAT, mode_budget=1, trials=1, evaluations=5,
                           seed=0, grid_n=64)
        rep = torus_search(cfg)
        assert "wall_time" not in rep.results_payload()
        assert rep.wall_time >= 0.0
