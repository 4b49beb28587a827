"""Constrained particle system: integrator, oracle, multipliers, energies."""

import dataclasses
import math

import numpy as np
import pytest

import partkin as pk


def two_atom_params(p_ref):
    """Table 1 system simulated with the 2-particle ensemble {-1, -3}.

    The ensemble has empirical mean -2 and empirical second moment 5, i.e.
    the exact Gaussian moments.
    """
    return pk.scale_particles(p_ref, 2), np.array([-1.0, -3.0])


class TestOdeRhs:
    def test_plugin_arithmetic(self, p_ref):
        _, sdot, _ = pk.ode_rhs(p_ref, [1.0], [0.0], np.full((250, 1), -2.0))
        assert sdot[0] == pytest.approx(1.0 / 30.0, abs=1e-15)

    def test_velocity_constraint(self, p_ref):
        _, _, qdot = pk.ode_rhs(p_ref, [1.2], [0.0], np.zeros((250, 1)))
        np.testing.assert_array_equal(qdot, 0.0)

    def test_stationary_at_equilibrium(self, p_ref):
        p2, q_in = two_atom_params(p_ref)
        mu = pk.EmpiricalMeasure(atoms=q_in)
        r0 = pk.equilibrium(p2, [1.0], mu)
        offsets = -(p2.G_r @ (r0 - np.array([1.0])))
        ensemble = (q_in[:, None] + offsets[None, :])
        rdot, sdot, qdot = pk.ode_rhs(p2, r0, [0.0], ensemble)
        assert np.abs(sdot).max() <= 1e-10
        np.testing.assert_array_equal(rdot, 0.0)
        np.testing.assert_array_equal(qdot, 0.0)

    def test_shape_mismatch(self, p_ref):
        with pytest.raises(ValueError):
            pk.ode_rhs(p_ref, [1.0, 2.0], [0.0], np.zeros((250, 1)))
        with pytest.raises(ValueError):
            pk.ode_rhs(p_ref, [1.0], [0.0], np.zeros((13, 1)))


class TestExplicitSolution:
    def test_table1_form(self, p_ref):
        sol = pk.explicit_solution(p_ref, [1.0], [0.0], -2.0)
        assert sol.omega == pytest.approx(math.sqrt(2.0 / 30.0), abs=1e-15)
        assert sol.r0 == pytest.approx(1.5, abs=1e-12)
        t = np.linspace(0.0, 60.0, 601)
        r, s = sol(t)
        np.testing.assert_allclose(r, 1.5 - 0.5 * np.cos(sol.omega * t), atol=1e-12)

    def test_equilibrium_start_is_constant(self, p_ref):
        # r0 depends on r_in; r_in = 2 is the self-consistent rest point for
        # mean -2 (r0 = (r_in - mean)/2 = r_in).
        sol = pk.explicit_solution(p_ref, [2.0], [0.0], -2.0)
        r, s = sol(np.linspace(0.0, 60.0, 61))
        np.testing.assert_allclose(r, 2.0, atol=1e-12)
        np.testing.assert_allclose(s, 0.0, atol=1e-12)

    def test_initial_condition(self, p_ref):
        sol = pk.explicit_solution(p_ref, [1.3], [-0.2], -2.0)
        r, s = sol(0.0)
        assert float(r) == pytest.approx(1.3) and float(s) == pytest.approx(-0.2)

    def test_rejects_nonpositive_stiffness(self, p_ref):
        soft = dataclasses.replace(p_ref, gamma_r=-2.0)
        with pytest.raises(ValueError):
            pk.explicit_solution(soft, [1.0], [0.0], -2.0)


class TestIntegrateMicro:
    def test_matches_oracle_on_table1(self, cfg, p_ref, micro_ref):
        q_in = micro_ref.q_in[:, 0]
        sol = pk.explicit_solution(p_ref, [1.0], [0.0], float(q_in.mean()))
        r_exact, _ = sol(micro_ref.times)
        assert np.abs(micro_ref.r[:, 0] - r_exact).max() <= 1e-6

    def test_decoupled_harmonic_oscillator(self):
        p = pk.ModelParams(M_r=1.0, M_q=1.0, gamma_r=1.0, gamma_q=0.0, G_r=0.0, N_real=5, N=5)
        traj = pk.integrate_micro(p, [1.0], [0.0], np.zeros(5), 10.0)
        np.testing.assert_allclose(traj.r[:, 0], np.cos(traj.times), atol=1e-6)

    def test_zero_time_returns_initial_state(self, p_ref):
        q_in = np.linspace(-3.0, -1.0, 250)
        traj = pk.integrate_micro(p_ref, [1.0], [0.5], q_in, 0.0)
        assert len(traj.times) == 1 and traj.times[0] == 0.0
        assert traj.r[0, 0] == 1.0 and traj.s[0, 0] == 0.5
        np.testing.assert_array_equal(traj.Q[0, :, 0], q_in)

    def test_linearity_in_initial_deviation(self, p_ref):
        p2, q_in = two_atom_params(p_ref)
        mu = pk.EmpiricalMeasure(atoms=q_in)
        # (r_in, s_in) = (1, 0.3) doubled about the equilibrium point:
        # r_in' = 2 r_in + mean so that r_in' - r0(r_in') = 2 (r_in - r0(r_in)).
        a = pk.integrate_micro(p2, [1.0], [0.3], q_in, 20.0, tol=1e-12)
        b = pk.integrate_micro(p2, [0.0], [0.6], q_in, 20.0, tol=1e-12)
        r0_a = pk.equilibrium(p2, [1.0], mu)[0]
        r0_b = pk.equilibrium(p2, [0.0], mu)[0]
        np.testing.assert_allclose(b.r[:, 0] - r0_b, 2.0 * (a.r[:, 0] - r0_a), atol=1e-9)
        np.testing.assert_allclose(b.s[:, 0], 2.0 * a.s[:, 0], atol=1e-9)

    def test_integration_failure_reports_time(self, p_ref):
        diverging = dataclasses.replace(p_ref, gamma_r=-1e8)
        with pytest.raises(pk.IntegrationFailure) as err:
            pk.integrate_micro(diverging, [1.0], [0.0], np.full(250, -2.0), 1.0)
        assert err.value.time is not None and err.value.time > 0.0

    def test_input_validation(self, p_ref):
        q = np.zeros(250)
        with pytest.raises(ValueError):
            pk.integrate_micro(p_ref, [1.0], [0.0], q, -1.0)
        with pytest.raises(ValueError):
            pk.integrate_micro(p_ref, [1.0], [0.0], q, 1.0, tol=0.0)


class TestMultipliers:
    def test_plugin_value(self, p_ref):
        lam = pk.recover_multipliers(p_ref, np.array([[-2.0]]), np.array([1.0 / 30.0]))
        assert lam[0, 0] == pytest.approx(0.008 - 0.04 / 30.0, abs=1e-15)

    def test_equilibrium_reduces_to_spring_force(self, p_ref):
        lam = pk.recover_multipliers(p_ref, np.array([[-2.0]]), np.array([0.0]))
        assert lam[0, 0] == pytest.approx(0.008, abs=1e-15)

    def test_balance_laws_reproduced(self, p_ref, micro_ref):
        """Substituting the multipliers back must reproduce both balance laws."""
        p = p_ref
        scale = p.N_real / p.N
        for i in range(0, len(micro_ref.times), 60):
            r = micro_ref.r[i]
            s = micro_ref.s[i]
            Q = micro_ref.Q[i]
            _, sdot, qdot = pk.ode_rhs(p, r, s, Q)
            lam = micro_ref.multipliers[i]
            macro = p.M_r @ sdot + p.gamma_r @ r + scale * (lam @ p.G_r).sum(axis=0)
            assert np.abs(macro).max() <= 1e-10
            qddot = -(p.G_r @ sdot)
            particle = (p.M_q @ qddot)[None, :] + Q @ p.gamma_q.T + lam
            assert np.abs(particle).max() <= 1e-10


class TestConstraintResiduals:
    def test_exact_state_gives_zero(self, p_ref, micro_ref):
        res3, res2 = pk.constraint_residuals(p_ref, micro_ref)
        np.testing.assert_array_equal(res2, 0.0)
        assert res3[0] == 0.0

    def test_residuals_stay_small(self, micro_ref):
        assert micro_ref.res_ind3.max() <= 1e-6
        assert micro_ref.res_ind2.max() <= 1e-6
        # exact flow preserves the constraint: bound is far below 100 x tol
        assert micro_ref.res_ind3.max() <= 100 * 1e-8

    def test_perturbation_detected(self, p_ref, micro_ref):
        Q = micro_ref.Q.copy()
        Q[5, 17, 0] += 0.1
        bumped = dataclasses.replace(micro_ref, Q=Q)
        res3, _ = pk.constraint_residuals(p_ref, bumped)
        assert res3[5] == pytest.approx(0.1, abs=1e-9)


class TestEnergyMicro:
    def test_plugin_initial_energies(self, p_ref):
        p2, q_in = two_atom_params(p_ref)
        traj = pk.integrate_micro(p2, [1.0], [0.0], q_in, 0.0)
        report = pk.energy_micro(p2, traj)
        assert report.T_r[0] == 0.0 and report.T_q[0] == 0.0
        assert report.U_r[0] == pytest.approx(0.5, abs=1e-15)
        assert report.U_q[0] == pytest.approx(2.5, abs=1e-15)
        assert report.E_total[0] == pytest.approx(3.0, abs=1e-15)

    def test_zero_velocity_zero_kinetic(self, p_ref):
        traj = pk.integrate_micro(p_ref, [1.0], [0.0], np.full(250, -2.0), 0.0)
        report = pk.energy_micro(p_ref, traj)
        assert report.T_r[0] == 0.0 and report.T_q[0] == 0.0

    def test_total_is_sum(self, p_ref, micro_ref):
        report = pk.energy_micro(p_ref, micro_ref)
        np.testing.assert_allclose(
            report.E_total, report.T_r + report.T_q + report.U_r + report.U_q, rtol=1e-15
        )

    def test_drift_bound(self, p_ref, micro_ref):
        report = pk.energy_micro(p_ref, micro_ref)
        assert report.relative_drift <= 1e-6


class TestMomentTransportOnEnsemble:
    def test_empirical_mean_follows_shift_relation(self, p_ref, micro_ref):
        """Ensemble mean at time t must equal mean_in - G_r (r - r_in)."""
        mean_t = micro_ref.Q[:, :, 0].mean(axis=1)
        predicted = micro_ref.q_in[:, 0].mean() - (
            (micro_ref.r - micro_ref.r_in[None, :]) @ p_ref.G_r.T
        )[:, 0]
        np.testing.assert_allclose(mean_t, predicted, atol=1e-7)
