"""Discrete N-particle simulation in the reduced ODE formulation.

The constrained system is integrated after index reduction: the particle
velocities are slaved to the macro velocity (``Qdot_j = -G_r s``), the
constraint forces are recovered in closed form afterwards, and the original
algebraic constraints are monitored as residuals.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.integrate import solve_ivp

from .errors import IntegrationFailure
from .model import (
    ModelParams,
    effective_mass,
    effective_stiffness,
    equilibrium,
    EmpiricalMeasure,
    _as_vector,
)

__all__ = [
    "MicroTrajectory",
    "EnergyReport",
    "ode_rhs",
    "integrate_micro",
    "explicit_solution",
    "recover_multipliers",
    "constraint_residuals",
    "energy_micro",
]

DEFAULT_TOL = 1e-8
DEFAULT_N_OUT = 601


@dataclass(frozen=True, eq=False)
class EnergyReport:
    """Per-sample energy split; E_total = T_r + T_q + U_r + U_q."""

    times: np.ndarray
    T_r: np.ndarray
    T_q: np.ndarray
    U_r: np.ndarray
    U_q: np.ndarray

    @property
    def E_total(self) -> np.ndarray:
        return self.T_r + self.T_q + self.U_r + self.U_q

    @property
    def relative_drift(self) -> float:
        """max_t |E(t) - E(0)| / |E(0)|."""
        E = self.E_total
        return float(np.abs(E - E[0]).max() / abs(E[0]))


@dataclass(frozen=True, eq=False)
class MicroTrajectory:
    """Time-sampled discrete trajectory with residual and multiplier data.

    Shapes: times (T,), r/s (T, n_r), Q (T, N, n_q),
    multipliers (T, N, n_q) or None, res_ind3/res_ind2 (T,).
    """

    times: np.ndarray
    r: np.ndarray
    s: np.ndarray
    Q: np.ndarray
    q_in: np.ndarray
    r_in: np.ndarray
    s_in: np.ndarray
    multipliers: np.ndarray | None
    res_ind3: np.ndarray
    res_ind2: np.ndarray

    def __post_init__(self):
        if not np.all(np.diff(self.times) >= 0.0):
            raise ValueError("times must be non-decreasing")
        n = len(self.times)
        for name in ("r", "s", "Q", "res_ind3", "res_ind2"):
            if len(getattr(self, name)) != n:
                raise ValueError(f"{name} must have one entry per sample")


def _coerce_ensemble(p: ModelParams, q) -> np.ndarray:
    Q = np.asarray(q, dtype=float)
    if Q.ndim == 1:
        Q = Q[:, None]
    if Q.shape != (p.N, p.n_q):
        raise ValueError(f"ensemble must have shape ({p.N}, {p.n_q}), got {Q.shape}")
    if not np.all(np.isfinite(Q)):
        raise ValueError("ensemble entries must be finite")
    return Q


def ode_rhs(p: ModelParams, r, s, Q) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Right-hand side of the reduced system.

    rdot = s;
    sdot = m_eff^-1 (-gamma_r r + (N_real / N) * sum_j G_r^T gamma_q Q_j);
    Qdot_j = -G_r s.
    """
    r = _as_vector(r, p.n_r, "r")
    s = _as_vector(s, p.n_r, "s")
    Q = _coerce_ensemble(p, Q)
    coupling = (p.N_real / p.N) * (p.G_r.T @ p.gamma_q @ Q.sum(axis=0))
    sdot = np.linalg.solve(effective_mass(p), -p.gamma_r @ r + coupling)
    Qdot = np.broadcast_to(-(p.G_r @ s), (p.N, p.n_q))
    return s, sdot, Qdot


def _flat_rhs(p: ModelParams):
    n_r, N, n_q = p.n_r, p.N, p.n_q
    m_eff = effective_mass(p)
    gamma_r = p.gamma_r
    G = p.G_r
    coupling_op = (p.N_real / p.N) * (G.T @ p.gamma_q)

    def rhs(t, y):
        # Overflow on a diverging trajectory is the integrator's stop signal,
        # reported as IntegrationFailure; keep the console clean here.
        with np.errstate(over="ignore", invalid="ignore"):
            r = y[:n_r]
            s = y[n_r : 2 * n_r]
            Q = y[2 * n_r :].reshape(N, n_q)
            sdot = np.linalg.solve(m_eff, -gamma_r @ r + coupling_op @ Q.sum(axis=0))
            Qdot = np.broadcast_to(-(G @ s), (N, n_q))
            return np.concatenate([s, sdot, Qdot.ravel()])

    return rhs


def integrate_micro(
    p: ModelParams,
    r_in,
    s_in,
    q_in,
    t_end: float,
    tol: float = DEFAULT_TOL,
    n_out: int = DEFAULT_N_OUT,
    max_step: float = math.inf,
    with_multipliers: bool = True,
) -> MicroTrajectory:
    """Integrate the reduced system on [0, t_end] at local tolerance ``tol``.

    Initial particle velocities are implied by the velocity-level constraint
    (``Qdot_j(0) = -G_r s_in``). Output is sampled on ``n_out`` equidistant
    times via the integrator's dense interpolant.
    """
    r_in = _as_vector(r_in, p.n_r, "r_in")
    s_in = _as_vector(s_in, p.n_r, "s_in")
    Q_in = _coerce_ensemble(p, q_in)
    if t_end < 0.0:
        raise ValueError("t_end must be nonnegative")
    if tol <= 0.0:
        raise ValueError("tol must be positive")

    if t_end == 0.0:
        times = np.zeros(1)
        r = r_in[None, :]
        s = s_in[None, :]
        Q = Q_in[None, :, :]
    else:
        times = np.linspace(0.0, t_end, n_out)
        y0 = np.concatenate([r_in, s_in, Q_in.ravel()])
        sol = solve_ivp(
            _flat_rhs(p),
            (0.0, t_end),
            y0,
            method="RK45",
            t_eval=times,
            rtol=tol,
            atol=tol,
            max_step=max_step,
        )
        if not sol.success:
            raise IntegrationFailure(
                f"integration stopped near t = {sol.t[-1] if len(sol.t) else 0.0:.6g}: {sol.message}",
                time=float(sol.t[-1]) if len(sol.t) else 0.0,
            )
        r = sol.y[: p.n_r].T
        s = sol.y[p.n_r : 2 * p.n_r].T
        Q = sol.y[2 * p.n_r :].T.reshape(len(times), p.N, p.n_q)

    res3, res2 = _residual_series(p, times, r, s, Q, Q_in, r_in)
    lam = None
    if with_multipliers:
        sdot = _sdot_series(p, r, Q)
        lam = -(Q @ p.gamma_q.T) + (sdot @ (p.M_q @ p.G_r).T)[:, None, :]
    return MicroTrajectory(
        times=times,
        r=r,
        s=s,
        Q=Q,
        q_in=Q_in,
        r_in=r_in,
        s_in=s_in,
        multipliers=lam,
        res_ind3=res3,
        res_ind2=res2,
    )


def explicit_solution(p: ModelParams, r_in, s_in, mu_in_mean: float):
    """Closed-form macro solution for the scalar (n_r = n_q = 1) system.

    r(t) = r0 + (r_in - r0) cos(wt) + (s_in / w) sin(wt),
    w = sqrt(gamma_eff / m_eff); returns a callable t -> (r, s).
    For a discrete run, ``mu_in_mean`` is the empirical mean of the sampled
    initial extensions.
    """
    if p.n_r != 1 or p.n_q != 1:
        raise ValueError("explicit_solution supports the scalar case n_r = n_q = 1 only")
    gamma_eff = float(effective_stiffness(p)[0, 0])
    m_eff = float(effective_mass(p)[0, 0])
    if gamma_eff <= 0.0:
        raise ValueError("gamma_eff <= 0: non-oscillatory regime not supported")
    r_in = float(_as_vector(r_in, 1, "r_in")[0])
    s_in = float(_as_vector(s_in, 1, "s_in")[0])
    mu = EmpiricalMeasure(atoms=np.array([float(mu_in_mean)]))
    r0 = float(equilibrium(p, [r_in], mu)[0])
    omega = math.sqrt(gamma_eff / m_eff)

    def solution(t):
        t = np.asarray(t, dtype=float)
        r = r0 + (r_in - r0) * np.cos(omega * t) + (s_in / omega) * np.sin(omega * t)
        s = -(r_in - r0) * omega * np.sin(omega * t) + s_in * np.cos(omega * t)
        return r, s

    solution.r0 = r0
    solution.omega = omega
    return solution


def recover_multipliers(p: ModelParams, Q, s_dot) -> np.ndarray:
    """Constraint forces lambda_j = -gamma_q Q_j + M_q G_r sdot.

    Uses the physical single-particle matrices (the unscaled-multiplier
    convention; the scaled multipliers are (N_real / N) times these).
    ``Q`` may hold any number of particles, one per row.
    """
    Q = np.asarray(Q, dtype=float)
    if Q.ndim == 1:
        Q = Q[:, None]
    if Q.ndim != 2 or Q.shape[1] != p.n_q:
        raise ValueError(f"particle rows must have length {p.n_q}, got shape {Q.shape}")
    s_dot = _as_vector(s_dot, p.n_r, "s_dot")
    return -(Q @ p.gamma_q.T) + (p.M_q @ p.G_r @ s_dot)


def _sdot_series(p, r, Q):
    """Accelerations from ode_rhs at every sample, vectorized over time."""
    coupling_op = (p.N_real / p.N) * (p.G_r.T @ p.gamma_q)
    rhs = -(r @ p.gamma_r.T) + Q.sum(axis=1) @ coupling_op.T
    return np.linalg.solve(effective_mass(p), rhs.T).T


def _residual_series(p, times, r, s, Q, q_in, r_in):
    offset = q_in + (p.G_r @ r_in)
    drift = Q + (r @ p.G_r.T)[:, None, :] - offset[None, :, :]
    res3 = np.abs(drift).reshape(len(times), -1).max(axis=1)
    Gs = s @ p.G_r.T
    Qdot = np.broadcast_to(-Gs[:, None, :], Q.shape)
    vel = Qdot + Gs[:, None, :]
    res2 = np.abs(vel).reshape(len(times), -1).max(axis=1)
    return res3, res2


def constraint_residuals(p: ModelParams, traj: MicroTrajectory) -> tuple[np.ndarray, np.ndarray]:
    """Per-sample max-norm residuals of the position- and velocity-level constraints.

    index3 = max_j |Q_j + G_r r - q_in_j - G_r r_in|;
    index2 = max_j |Qdot_j + G_r s| with Qdot_j from ``ode_rhs``.
    """
    return _residual_series(p, traj.times, traj.r, traj.s, traj.Q, traj.q_in, traj.r_in)


def energy_micro(p: ModelParams, traj: MicroTrajectory) -> EnergyReport:
    """Discrete energies along the trajectory.

    T_r = s^T M_r s / 2; U_r = r^T gamma_r r / 2;
    T_q = (N_real / N) sum_j (G_r s)^T M_q (G_r s) / 2;
    U_q = (N_real / N) sum_j Q_j^T gamma_q Q_j / 2.
    """
    scale = p.N_real / p.N
    T_r = 0.5 * np.einsum("ti,ij,tj->t", traj.s, p.M_r, traj.s)
    U_r = 0.5 * np.einsum("ti,ij,tj->t", traj.r, p.gamma_r, traj.r)
    Gs = traj.s @ p.G_r.T
    T_q = 0.5 * scale * p.N * np.einsum("ti,ij,tj->t", Gs, p.M_q, Gs)
    U_q = 0.5 * scale * np.einsum("tni,ij,tnj->t", traj.Q, p.gamma_q, traj.Q)
    return EnergyReport(times=traj.times, T_r=T_r, T_q=T_q, U_r=U_r, U_q=U_q)
