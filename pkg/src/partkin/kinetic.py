"""Mean-field kinetic description of the coupled system.

Three equivalent views of the particle law are implemented: the explicit
characteristic flow (a pure shift in the linear setting), the closed
first-moment ODE (the exact kinetic solution), and a first-order upwind
discretisation of the transport PDE coupled to the macro oscillator
(method of lines). The upwind route reproduces the numerical-diffusion
energy growth; the moment route is the canonical kinetic trajectory.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np
from scipy.integrate import solve_ivp

from .errors import IntegrationFailure
from .micro import DEFAULT_N_OUT, DEFAULT_TOL, EnergyReport
from .model import (
    GridDensity,
    Measure1D,
    ModelParams,
    _as_vector,
    effective_mass,
    first_moment,
    measure_mass,
    second_moment,
    shift_measure,
)

__all__ = [
    "KineticTrajectory",
    "characteristic_flow",
    "pushforward",
    "integrate_moment_ode",
    "upwind_rhs",
    "integrate_pde_coupled",
    "mean_field_multiplier",
    "commutation_check",
    "energy_kinetic",
]

MASS_LOSS_TOL = 1e-6


@dataclass(frozen=True, eq=False)
class KineticTrajectory:
    """Time-sampled kinetic run.

    Shapes: times (T,), r/s (T, n_r), m1 (T, n_q), m2/mass (T,).
    ``snapshots`` holds one GridDensity per sample for PDE runs, else None.
    ``warnings`` collects non-fatal diagnostics (boundary mass loss etc.).
    """

    times: np.ndarray
    r: np.ndarray
    s: np.ndarray
    m1: np.ndarray
    m2: np.ndarray
    mass: np.ndarray
    mu_in: Measure1D
    r_in: np.ndarray
    s_in: np.ndarray
    snapshots: list[GridDensity] | None = None
    energies: EnergyReport | None = None
    warnings: tuple[str, ...] = ()
    kind: str = "moment"

    def __post_init__(self):
        if not np.all(np.diff(self.times) >= 0.0):
            raise ValueError("times must be non-decreasing")


def characteristic_flow(p: ModelParams, r, r_in, q_in):
    """Particle position Q(t, q_in) = -G_r (r - r_in) + q_in."""
    r = _as_vector(r, p.n_r, "r")
    r_in = _as_vector(r_in, p.n_r, "r_in")
    q_in = np.asarray(q_in, dtype=float)
    return q_in - (p.G_r @ (r - r_in))


def pushforward(p: ModelParams, mu_in: Measure1D, r, r_in) -> Measure1D:
    """Image of the initial law under the characteristic flow (a shift)."""
    r = _as_vector(r, p.n_r, "r")
    r_in = _as_vector(r_in, p.n_r, "r_in")
    w = -(p.G_r @ (r - r_in))
    if p.n_q == 1:
        return shift_measure(mu_in, float(w[0]))
    return shift_measure(mu_in, w)


def integrate_moment_ode(
    p: ModelParams,
    r_in,
    s_in,
    mu_in: Measure1D,
    t_end: float,
    tol: float = DEFAULT_TOL,
    n_out: int = DEFAULT_N_OUT,
) -> KineticTrajectory:
    """Exact kinetic solution via the closed macro ODE.

    The first moment obeys m1(t) = m1_in - G_r (r(t) - r_in), which closes the
    macro equation: m_eff rddot = -gamma_r r + N_real G_r^T gamma_q m1(t).
    """
    r_in = _as_vector(r_in, p.n_r, "r_in")
    s_in = _as_vector(s_in, p.n_r, "s_in")
    if t_end < 0.0:
        raise ValueError("t_end must be nonnegative")
    m1_in = first_moment(mu_in)
    mass_in = measure_mass(mu_in)
    m_eff = effective_mass(p)
    coupling = p.N_real * (p.G_r.T @ p.gamma_q)
    n_r = p.n_r

    def rhs(t, y):
        r = y[:n_r]
        s = y[n_r:]
        m1 = m1_in - (p.G_r @ (r - r_in))
        sdot = np.linalg.solve(m_eff, -p.gamma_r @ r + coupling @ m1)
        return np.concatenate([s, sdot])

    if t_end == 0.0:
        times = np.zeros(1)
        r = r_in[None, :]
        s = s_in[None, :]
    else:
        times = np.linspace(0.0, t_end, n_out)
        sol = solve_ivp(
            rhs,
            (0.0, t_end),
            np.concatenate([r_in, s_in]),
            method="RK45",
            t_eval=times,
            rtol=tol,
            atol=tol,
        )
        if not sol.success:
            raise IntegrationFailure(
                f"integration stopped near t = {sol.t[-1] if len(sol.t) else 0.0:.6g}: {sol.message}",
                time=float(sol.t[-1]) if len(sol.t) else 0.0,
            )
        r = sol.y[:n_r].T
        s = sol.y[n_r:].T

    m1 = m1_in[None, :] - (r - r_in[None, :]) @ p.G_r.T
    mass = np.full(len(times), mass_in)
    if p.n_q == 1:
        m2_in = second_moment(mu_in)
        w = m1[:, 0] - m1_in[0]
        m2 = m2_in + 2.0 * w * m1_in[0] + w**2 * mass_in
    else:
        m2 = np.full(len(times), np.nan)
    traj = KineticTrajectory(
        times=times,
        r=r,
        s=s,
        m1=m1,
        m2=m2,
        mass=mass,
        mu_in=mu_in,
        r_in=r_in,
        s_in=s_in,
        kind="moment",
    )
    if p.n_q == 1:
        traj = replace(traj, energies=energy_kinetic(p, traj))
    return traj


def upwind_rhs(p: ModelParams, u: GridDensity, v_eff: float) -> np.ndarray:
    """Semi-discrete first-order upwind derivative of the grid values.

    Transport at speed ``v_eff`` with zero ghost values at both ends:
    for v >= 0, udot_i = -v (u_i - u_{i-1}) / dx;
    for v < 0, udot_i = -v (u_{i+1} - u_i) / dx.
    """
    if u.n_pts < 3:
        raise ValueError("upwind stencil needs n_pts >= 3")
    return _upwind(u.values, u.dx, float(v_eff))


def _upwind(values: np.ndarray, dx: float, v: float) -> np.ndarray:
    du = np.empty_like(values)
    if v >= 0.0:
        du[0] = -v * values[0] / dx
        du[1:] = -v * (values[1:] - values[:-1]) / dx
    else:
        du[-1] = v * values[-1] / dx
        du[:-1] = -v * (values[1:] - values[:-1]) / dx
    return du


def integrate_pde_coupled(
    p: ModelParams,
    r_in,
    s_in,
    u_in: GridDensity,
    t_end: float,
    tol: float = DEFAULT_TOL,
    n_out: int = DEFAULT_N_OUT,
) -> KineticTrajectory:
    """Macro oscillator coupled to the upwind-discretised transport PDE.

    Method of lines: the macro state and all grid values form one ODE system
    integrated by the shared adaptive stepper. The macro force uses the
    trapezoid first moment of the current grid values; the transport speed is
    v_eff(t) = -G_r s(t). Boundary mass loss beyond ``MASS_LOSS_TOL`` is
    surfaced as a warning, never an error.
    """
    if p.n_r != 1 or p.n_q != 1:
        raise ValueError("the coupled PDE route supports n_r = n_q = 1 only")
    r_in = _as_vector(r_in, 1, "r_in")
    s_in = _as_vector(s_in, 1, "s_in")
    if t_end <= 0.0:
        raise ValueError("t_end must be positive")
    if np.any(u_in.values < 0.0):
        raise ValueError("u_in must be nonnegative")

    warnings: list[str] = []
    y_grid = u_in.grid
    dx = u_in.dx
    edge_mass = max(u_in.values[0], u_in.values[-1]) * dx
    if edge_mass > MASS_LOSS_TOL:
        warnings.append(
            f"initial support touches the domain boundary (edge mass {edge_mass:.3g}); "
            "expect truncation-driven mass loss"
        )

    G = float(p.G_r[0, 0])
    gamma_r = float(p.gamma_r[0, 0])
    coupling = p.N_real * G * float(p.gamma_q[0, 0])
    m_eff = float(effective_mass(p)[0, 0])

    def rhs(t, y):
        r, s, u = y[0], y[1], y[2:]
        m1 = np.trapezoid(y_grid * u, dx=dx)
        sdot = (-gamma_r * r + coupling * m1) / m_eff
        du = _upwind(u, dx, -G * s)
        return np.concatenate(([s, sdot], du))

    times = np.linspace(0.0, t_end, n_out)
    y0 = np.concatenate([r_in, s_in, u_in.values])
    sol = solve_ivp(rhs, (0.0, t_end), y0, method="RK45", t_eval=times, rtol=tol, atol=tol)
    if not sol.success:
        raise IntegrationFailure(
            f"integration stopped near t = {sol.t[-1] if len(sol.t) else 0.0:.6g}: {sol.message}",
            time=float(sol.t[-1]) if len(sol.t) else 0.0,
        )

    r = sol.y[0][:, None]
    s = sol.y[1][:, None]
    u_series = sol.y[2:].T
    snapshots = [GridDensity(lo=u_in.lo, hi=u_in.hi, values=u_series[i]) for i in range(len(times))]
    mass = np.trapezoid(u_series, dx=dx, axis=1)
    m1 = np.trapezoid(u_series * y_grid, dx=dx, axis=1)[:, None]
    m2 = np.trapezoid(u_series * y_grid**2, dx=dx, axis=1)

    max_loss = float(np.abs(mass - mass[0]).max())
    if max_loss > MASS_LOSS_TOL:
        warnings.append(f"cumulative boundary mass loss {max_loss:.3g} exceeds {MASS_LOSS_TOL:g}")
    min_value = float(u_series.min())
    if min_value < -1e-8:
        warnings.append(f"grid values dipped to {min_value:.3g} (beyond solver tolerance)")

    traj = KineticTrajectory(
        times=times,
        r=r,
        s=s,
        m1=m1,
        m2=m2,
        mass=mass,
        mu_in=u_in,
        r_in=r_in,
        s_in=s_in,
        snapshots=snapshots,
        warnings=tuple(warnings),
        kind="pde",
    )
    return replace(traj, energies=energy_kinetic(p, traj))


def mean_field_multiplier(p: ModelParams, q, s_dot):
    """Kinetic constraint force lambda(q) = -gamma_q q + M_q G_r sdot.

    For n_q = 1, ``q`` may be an array of positions; the result has the same
    shape.
    """
    s_dot = _as_vector(s_dot, p.n_r, "s_dot")
    drive = p.M_q @ p.G_r @ s_dot
    if p.n_q == 1:
        q = np.asarray(q, dtype=float)
        return -float(p.gamma_q[0, 0]) * q + float(drive[0])
    return -(p.gamma_q @ _as_vector(q, p.n_q, "q")) + drive


def commutation_check(p: ModelParams, traj: KineticTrajectory) -> float:
    """Residual of the macro balance law written with the kinetic multipliers.

    At each sample, sdot is recomputed from the mean-field force and the
    integrated multiplier is substituted back:
    residual = || M_r sdot + gamma_r r + N_real G_r^T (-gamma_q m1 + M_q G_r sdot * mass) ||.
    Exact flows give zero; grid runs pick up quadrature plus mass-loss error.
    """
    m_eff = effective_mass(p)
    coupling = p.N_real * (p.G_r.T @ p.gamma_q)
    worst = 0.0
    for i in range(len(traj.times)):
        r = traj.r[i]
        m1 = traj.m1[i]
        sdot = np.linalg.solve(m_eff, -p.gamma_r @ r + coupling @ m1)
        lam_int = -(p.gamma_q @ m1) + (p.M_q @ p.G_r @ sdot) * traj.mass[i]
        res = p.M_r @ sdot + p.gamma_r @ r + p.N_real * (p.G_r.T @ lam_int)
        worst = max(worst, float(np.abs(res).max()))
    return worst


def energy_kinetic(p: ModelParams, traj: KineticTrajectory) -> EnergyReport:
    """Kinetic energies: T_q and U_q carry the full weight N_real.

    T_q = N_real (G_r s)^T M_q (G_r s) / 2; U_q = N_real gamma_q m2 / 2.
    """
    if p.n_q != 1:
        raise ValueError("kinetic energies support n_q = 1 only")
    T_r = 0.5 * np.einsum("ti,ij,tj->t", traj.s, p.M_r, traj.s)
    U_r = 0.5 * np.einsum("ti,ij,tj->t", traj.r, p.gamma_r, traj.r)
    Gs = traj.s @ p.G_r.T
    T_q = 0.5 * p.N_real * np.einsum("ti,ij,tj->t", Gs, p.M_q, Gs)
    U_q = 0.5 * p.N_real * float(p.gamma_q[0, 0]) * traj.m2
    return EnergyReport(times=traj.times, T_r=T_r, T_q=T_q, U_r=U_r, U_q=U_q)
