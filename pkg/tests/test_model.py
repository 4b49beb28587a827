"""Parameter types, measures, and closed-form effective quantities."""

import dataclasses

import numpy as np
import pytest

import partkin as pk


def gaussian_m2() -> pk.Gaussian:
    return pk.Gaussian(mean=-2.0, var=1.0)


class TestModelParams:
    def test_table1_construction(self, p_ref):
        assert p_ref.n_r == 1 and p_ref.n_q == 1
        assert p_ref.M_r[0, 0] == 20.0
        assert p_ref.M_q[0, 0] == pytest.approx(0.04)
        assert p_ref.gamma_q[0, 0] == pytest.approx(0.004)
        assert p_ref.G_r[0, 0] == -1.0
        assert p_ref.N_real == 250.0 and p_ref.N == 250

    def test_mass_matrices_must_be_spd(self):
        with pytest.raises(ValueError, match="M_r"):
            pk.ModelParams(M_r=-1.0, M_q=0.04, gamma_r=1.0, gamma_q=0.004, G_r=-1.0, N_real=250, N=250)
        with pytest.raises(ValueError, match="M_q"):
            pk.ModelParams(M_r=20.0, M_q=0.0, gamma_r=1.0, gamma_q=0.004, G_r=-1.0, N_real=250, N=250)

    def test_shape_checks(self):
        with pytest.raises(ValueError, match="G_r"):
            pk.ModelParams(
                M_r=np.eye(2), M_q=1.0, gamma_r=np.eye(2), gamma_q=1.0,
                G_r=np.ones((3, 2)), N_real=10, N=10, n_r=2, n_q=1,
            )

    def test_counts_validated(self):
        with pytest.raises(ValueError, match="N_real"):
            pk.ModelParams(M_r=20.0, M_q=0.04, gamma_r=1.0, gamma_q=0.004, G_r=-1.0, N_real=-1, N=250)
        with pytest.raises(ValueError, match="N "):
            pk.ModelParams(M_r=20.0, M_q=0.04, gamma_r=1.0, gamma_q=0.004, G_r=-1.0, N_real=250, N=0)

    def test_n_real_may_be_non_integer(self):
        p = pk.ModelParams(M_r=20.0, M_q=0.04, gamma_r=1.0, gamma_q=0.004, G_r=-1.0, N_real=250.5, N=250)
        assert p.N_real == 250.5

    def test_immutable(self, p_ref):
        with pytest.raises(dataclasses.FrozenInstanceError):
            p_ref.N = 10


class TestMeasures:
    def test_gaussian_variance_positive(self):
        with pytest.raises(ValueError):
            pk.Gaussian(mean=0.0, var=0.0)
        with pytest.raises(ValueError):
            pk.Gaussian(mean=0.0, var=-1.0)

    def test_empirical_default_uniform_weights(self):
        mu = pk.EmpiricalMeasure(atoms=np.array([0.0, 1.0, 2.0]))
        assert mu.uniform
        np.testing.assert_allclose(mu.weights, 1.0 / 3.0)

    def test_empirical_weights_must_sum_to_one(self):
        with pytest.raises(ValueError):
            pk.EmpiricalMeasure(atoms=np.array([0.0, 1.0]), weights=np.array([0.7, 0.7]))
        with pytest.raises(ValueError):
            pk.EmpiricalMeasure(atoms=np.array([0.0, 1.0]), weights=np.array([1.5, -0.5]))

    def test_grid_density_invariants(self):
        with pytest.raises(ValueError):
            pk.GridDensity(lo=1.0, hi=0.0, values=np.zeros(5))
        with pytest.raises(ValueError):
            pk.GridDensity(lo=0.0, hi=1.0, values=np.zeros(1))
        g = pk.GridDensity(lo=-5.0, hi=7.0, values=np.zeros(101))
        assert g.dx == pytest.approx(0.12)
        assert len(g.grid) == 101


class TestScaleParticles:
    def test_identity_at_n_real(self, p_ref):
        q = pk.scale_particles(p_ref, 250)
        assert q.M_q_particle[0, 0] == pytest.approx(0.04)
        assert q.gamma_q_particle[0, 0] == pytest.approx(0.004)

    def test_half_mass_at_double_count(self, p_ref):
        q = pk.scale_particles(p_ref, 500)
        assert q.M_q_particle[0, 0] == pytest.approx(0.02)
        assert q.gamma_q_particle[0, 0] == pytest.approx(0.002)
        assert pk.effective_mass(q)[0, 0] == pytest.approx(30.0)

    def test_rejects_zero(self, p_ref):
        with pytest.raises(ValueError):
            pk.scale_particles(p_ref, 0)

    def test_effective_quantities_invariant(self, p_ref):
        m0 = pk.effective_mass(p_ref)
        g0 = pk.effective_stiffness(p_ref)
        for n in (1, 2, 3, 7, 64, 250, 500, 4096):
            q = pk.scale_particles(p_ref, n)
            np.testing.assert_allclose(pk.effective_mass(q), m0, rtol=1e-14)
            np.testing.assert_allclose(pk.effective_stiffness(q), g0, rtol=1e-14)


class TestEffectiveQuantities:
    def test_effective_mass_table1(self, p_ref):
        assert pk.effective_mass(p_ref)[0, 0] == pytest.approx(30.0, abs=1e-12)

    def test_effective_mass_degenerate_cases(self, p_ref):
        no_particles = dataclasses.replace(p_ref, N_real=0.0)
        assert pk.effective_mass(no_particles)[0, 0] == pytest.approx(20.0)
        decoupled = dataclasses.replace(p_ref, G_r=0.0)
        assert pk.effective_mass(decoupled)[0, 0] == pytest.approx(20.0)

    def test_effective_stiffness_table1(self, p_ref):
        assert pk.effective_stiffness(p_ref)[0, 0] == pytest.approx(2.0, abs=1e-12)

    def test_effective_stiffness_degenerate_cases(self, p_ref):
        no_particles = dataclasses.replace(p_ref, N_real=0.0)
        assert pk.effective_stiffness(no_particles)[0, 0] == pytest.approx(1.0)
        decoupled = dataclasses.replace(p_ref, G_r=0.0)
        assert pk.effective_stiffness(decoupled)[0, 0] == pytest.approx(1.0)

    def test_symmetry(self):
        rng = np.random.default_rng(3)
        a = rng.normal(size=(2, 2))
        m_r = a @ a.T + 2 * np.eye(2)
        b = rng.normal(size=(3, 3))
        m_q = b @ b.T + 2 * np.eye(3)
        g_r = np.diag([1.0, 2.0])
        c = rng.normal(size=(3, 3))
        g_q = c @ c.T
        p = pk.ModelParams(
            M_r=m_r, M_q=m_q, gamma_r=g_r, gamma_q=g_q,
            G_r=rng.normal(size=(3, 2)), N_real=17.0, N=5, n_r=2, n_q=3,
        )
        np.testing.assert_allclose(pk.effective_mass(p), pk.effective_mass(p).T, atol=1e-12)
        np.testing.assert_allclose(pk.effective_stiffness(p), pk.effective_stiffness(p).T, atol=1e-12)


class TestEquilibrium:
    def test_table1_value(self, p_ref):
        r0 = pk.equilibrium(p_ref, [1.0], gaussian_m2())
        assert abs(r0[0] - 1.5) <= 1e-9

    def test_no_particle_force(self, p_ref):
        p = dataclasses.replace(p_ref, gamma_q=0.0)
        assert pk.equilibrium(p, [1.0], gaussian_m2())[0] == pytest.approx(0.0)

    def test_symmetric_case(self, p_ref):
        r0 = pk.equilibrium(p_ref, [0.0], pk.Gaussian(mean=0.0, var=1.0))
        assert r0[0] == pytest.approx(0.0, abs=1e-15)

    def test_fixed_point_balance(self, p_ref, mu_ref):
        r0 = pk.equilibrium(p_ref, [1.0], mu_ref)
        pushed = pk.pushforward(p_ref, mu_ref, r0, [1.0])
        residual = -(p_ref.gamma_r @ r0) + pk.mean_field_force(p_ref, pushed)
        assert np.abs(residual).max() <= 1e-10


class TestMeanFieldForce:
    def test_gaussian(self, p_ref):
        force = pk.mean_field_force(p_ref, gaussian_m2())
        assert force[0] == pytest.approx(2.0, abs=1e-12)

    def test_dirac_at_zero(self, p_ref):
        force = pk.mean_field_force(p_ref, pk.EmpiricalMeasure(atoms=np.array([0.0])))
        assert force[0] == 0.0

    def test_two_atoms(self, p_ref):
        mu = pk.EmpiricalMeasure(atoms=np.array([1.0, 3.0]))
        assert pk.mean_field_force(p_ref, mu)[0] == pytest.approx(-2.0, abs=1e-12)

    def test_linear_in_shift_gaussian_and_empirical(self, p_ref):
        rng = np.random.default_rng(11)
        for _ in range(50):
            w = float(rng.normal())
            mu = pk.Gaussian(mean=float(rng.normal()), var=1.0 + float(rng.random()))
            gap = pk.mean_field_force(p_ref, pk.shift_measure(mu, w)) - pk.mean_field_force(p_ref, mu)
            expected = p_ref.N_real * (p_ref.G_r.T @ p_ref.gamma_q @ np.array([w]))
            np.testing.assert_allclose(gap, expected, atol=1e-12)
            emp = pk.EmpiricalMeasure(atoms=rng.normal(size=7))
            gap = pk.mean_field_force(p_ref, pk.shift_measure(emp, w)) - pk.mean_field_force(p_ref, emp)
            np.testing.assert_allclose(gap, expected, atol=1e-12)

    def test_linear_in_shift_grid_at_node_multiples(self, p_ref):
        # Exactness needs a unit-mass density, interior support, and a shift
        # that is a whole number of grid cells (interpolation is then exact).
        g = pk.from_gaussian_on_grid(pk.Gaussian(-1.0, 0.2), -8.0, 8.0, 161)
        values = g.values / pk.measure_mass(g)
        g = pk.GridDensity(lo=-8.0, hi=8.0, values=values)
        w = 5 * g.dx
        gap = pk.mean_field_force(p_ref, pk.shift_measure(g, w)) - pk.mean_field_force(p_ref, g)
        expected = p_ref.N_real * (p_ref.G_r.T @ p_ref.gamma_q @ np.array([w]))
        np.testing.assert_allclose(gap, expected, atol=1e-12)


class TestMoments:
    def test_gaussian_first_moment(self):
        np.testing.assert_allclose(pk.first_moment(gaussian_m2()), [-2.0])

    def test_empirical_first_moment(self):
        mu = pk.EmpiricalMeasure(atoms=np.array([0.0, 1.0, 2.0]))
        np.testing.assert_allclose(pk.first_moment(mu), [1.0])

    def test_grid_first_moment_frozen(self, cfg):
        # The raw trapezoid moment of the truncated Gaussian on [-5, 7] with
        # 101 points; truncation shifts it ~7e-3 from the exact mean -2.
        g = cfg.initial_grid_density()
        assert pk.first_moment(g)[0] == pytest.approx(-1.992793984738106, abs=1e-12)

    def test_grid_mass_frozen(self, cfg):
        assert pk.measure_mass(cfg.initial_grid_density()) == pytest.approx(
            0.9986341702808497, abs=1e-12
        )

    def test_second_moment_gaussian(self):
        assert pk.second_moment(gaussian_m2()) == pytest.approx(5.0)

    def test_non_finite_rejected_at_construction(self):
        with pytest.raises(ValueError):
            pk.EmpiricalMeasure(atoms=np.array([np.inf]))
        with pytest.raises(ValueError):
            pk.GridDensity(lo=0.0, hi=1.0, values=np.array([0.0, np.nan, 0.0]))


class TestShiftMeasure:
    def test_gaussian_shift(self):
        mu = pk.shift_measure(gaussian_m2(), 0.5)
        assert mu.mean == pytest.approx(-1.5) and mu.var == 1.0

    def test_empirical_shift(self):
        mu = pk.shift_measure(pk.EmpiricalMeasure(atoms=np.array([0.0, 1.0])), 2.0)
        np.testing.assert_allclose(np.ravel(mu.atoms), [2.0, 3.0])

    def test_grid_shift_zero_fill(self):
        vals = np.zeros(11)
        vals[5] = 1.0
        g = pk.GridDensity(lo=0.0, hi=10.0, values=vals)
        shifted = pk.shift_measure(g, 2.0)
        np.testing.assert_allclose(shifted.values[7], 1.0)
        assert shifted.values[5] == 0.0


class TestSampling:
    def test_streams_are_reproducible(self):
        a = pk.stream(7, 16, 3).random(5)
        b = pk.stream(7, 16, 3).random(5)
        np.testing.assert_array_equal(a, b)
        c = pk.stream(7, 16, 4).random(5)
        assert not np.array_equal(a, c)

    def test_gaussian_sampling_moments(self):
        draws = pk.sample_measure(gaussian_m2(), 200_000, pk.stream(0, 0, 0))
        assert draws.mean() == pytest.approx(-2.0, abs=0.02)
        assert draws.var() == pytest.approx(1.0, abs=0.02)

    def test_empirical_sampling(self):
        mu = pk.EmpiricalMeasure(atoms=np.array([1.0, 5.0]), weights=np.array([0.25, 0.75]))
        draws = pk.sample_measure(mu, 40_000, pk.stream(1, 0, 0))
        assert np.isin(draws, [1.0, 5.0]).all()
        assert (draws == 5.0).mean() == pytest.approx(0.75, abs=0.02)

    def test_single_atom_is_deterministic(self):
        mu = pk.EmpiricalMeasure(atoms=np.array([-2.0]))
        draws = pk.sample_measure(mu, 10, pk.stream(3, 0, 0))
        np.testing.assert_array_equal(draws, -2.0)

    def test_sample_count_validated(self):
        with pytest.raises(ValueError):
            pk.sample_measure(gaussian_m2(), 0, pk.stream(0, 0, 0))
