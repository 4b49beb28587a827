"""Experiment harness: Monte-Carlo scaling, consistency and energy studies.

Each Monte-Carlo work item is keyed by (N, sample) and draws from its own
counter-based random stream, so results are bit-identical no matter how many
worker processes execute them.
"""

from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace

import numpy as np
from scipy.stats import spearmanr

from .errors import IntegrationFailure
from .kinetic import (
    DEFAULT_N_OUT,
    DEFAULT_TOL,
    KineticTrajectory,
    integrate_moment_ode,
    integrate_pde_coupled,
)
from .metrics import dobrushin_constants, w1
from .micro import MicroTrajectory, integrate_micro
from .model import (
    EmpiricalMeasure,
    Gaussian,
    GridDensity,
    Measure1D,
    ModelParams,
    from_gaussian_on_grid,
    sample_measure,
    scale_particles,
    stream,
)

__all__ = [
    "McStudyResult",
    "run_mc_study",
    "MfErrorCurve",
    "mf_error_curve",
    "ConsistencyResult",
    "consistency_experiment",
    "EnergyExperimentResult",
    "energy_experiment",
]


@dataclass(frozen=True, eq=False)
class McStudyResult:
    """Monte-Carlo study of the macro trajectory across particle counts.

    ``r_samples[i]`` has shape (n_samples, n_out, n_r) for ``N_values[i]``; all
    runs share ``times``. ``var_r`` is the unbiased (ddof=1) pointwise sample
    variance per component, ``max_var`` its maximum over time and components.
    """

    params: ModelParams
    N_values: tuple[int, ...]
    n_samples: int
    base_seed: int
    times: np.ndarray
    r_samples: tuple[np.ndarray, ...]
    mean_r: tuple[np.ndarray, ...]
    var_r: tuple[np.ndarray, ...]
    max_var: np.ndarray
    sup_mf_error: np.ndarray
    max_res_ind3: np.ndarray
    max_res_ind2: np.ndarray
    kinetic: KineticTrajectory
    mu_in: Measure1D
    t_end: float

    def __post_init__(self):
        for var in self.var_r:
            if np.any(var < -1e-300):
                raise ValueError("variance estimates must be nonnegative")

    @property
    def slope(self) -> float:
        """Least-squares slope of log(max_var) against log(N)."""
        if len(self.N_values) < 2 or np.any(self.max_var <= 0.0):
            return float("nan")
        return float(np.polyfit(np.log(np.asarray(self.N_values, dtype=float)), np.log(self.max_var), 1)[0])

    @property
    def slope_contrib(self) -> np.ndarray:
        """Per-N finite-difference slope of log(max_var) vs log(N).

        Centered differences at interior points, one-sided at the ends; NaN
        when fewer than two points or any variance is zero.
        """
        n = len(self.N_values)
        out = np.full(n, np.nan)
        if n < 2 or np.any(self.max_var <= 0.0):
            return out
        logn = np.log(np.asarray(self.N_values, dtype=float))
        logv = np.log(self.max_var)
        out[0] = (logv[1] - logv[0]) / (logn[1] - logn[0])
        out[-1] = (logv[-1] - logv[-2]) / (logn[-1] - logn[-2])
        for i in range(1, n - 1):
            out[i] = (logv[i + 1] - logv[i - 1]) / (logn[i + 1] - logn[i - 1])
        return out


def _mc_run_one(args) -> tuple[int, int, np.ndarray, float, float]:
    p, mu_in, r_in, s_in, t_end, tol, n_out, seed, N, k = args
    rng = stream(seed, N, k)
    q_in = sample_measure(mu_in, N, rng)
    p_n = scale_particles(p, N)
    try:
        traj = integrate_micro(
            p_n, r_in, s_in, q_in, t_end, tol=tol, n_out=n_out, with_multipliers=False
        )
    except IntegrationFailure as exc:
        raise IntegrationFailure(f"Monte-Carlo run failed at N={N}, sample={k}: {exc}") from exc
    return N, k, traj.r, float(traj.res_ind3.max()), float(traj.res_ind2.max())


def run_mc_study(
    p: ModelParams,
    mu_in: Measure1D,
    r_in,
    s_in,
    t_end: float,
    N_values,
    n_samples: int,
    seed: int,
    tol: float = DEFAULT_TOL,
    n_out: int = DEFAULT_N_OUT,
    threads: int = 1,
) -> McStudyResult:
    """Sampled micro trajectories across particle counts, vs the kinetic run.

    For each N in ``N_values`` draws ``n_samples`` independent initial
    ensembles from ``mu_in`` (stream keyed by (seed, N, sample)), integrates
    the constrained system, and aggregates the macro series: pointwise mean,
    unbiased pointwise variance, and sup-distance of the mean trajectory to
    the closed kinetic trajectory.
    """
    if n_samples < 2:
        raise ValueError("n_samples must be at least 2 for a variance estimate")
    N_values = tuple(int(N) for N in N_values)
    if any(N < 1 for N in N_values):
        raise ValueError("all particle counts must be >= 1")

    jobs = [
        (p, mu_in, r_in, s_in, t_end, tol, n_out, seed, N, k)
        for N in N_values
        for k in range(n_samples)
    ]
    results: dict[tuple[int, int], tuple[np.ndarray, float, float]] = {}
    if threads > 1:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            for N, k, r, res3, res2 in pool.map(_mc_run_one, jobs, chunksize=4):
                results[(N, k)] = (r, res3, res2)
    else:
        for job in jobs:
            N, k, r, res3, res2 = _mc_run_one(job)
            results[(N, k)] = (r, res3, res2)

    kinetic = integrate_moment_ode(p, r_in, s_in, mu_in, t_end, tol=tol, n_out=n_out)
    times = kinetic.times

    r_samples = []
    mean_r = []
    var_r = []
    max_var = np.empty(len(N_values))
    sup_mf_error = np.empty(len(N_values))
    max_res3 = np.empty(len(N_values))
    max_res2 = np.empty(len(N_values))
    for i, N in enumerate(N_values):
        stacked = np.stack([results[(N, k)][0] for k in range(n_samples)])
        r_samples.append(stacked)
        mean = stacked.mean(axis=0)
        var = stacked.var(axis=0, ddof=1)
        mean_r.append(mean)
        var_r.append(var)
        max_var[i] = float(var.max())
        sup_mf_error[i] = float(np.linalg.norm(mean - kinetic.r, axis=1).max())
        max_res3[i] = max(results[(N, k)][1] for k in range(n_samples))
        max_res2[i] = max(results[(N, k)][2] for k in range(n_samples))

    return McStudyResult(
        params=p,
        N_values=N_values,
        n_samples=int(n_samples),
        base_seed=int(seed),
        times=times,
        r_samples=tuple(r_samples),
        mean_r=tuple(mean_r),
        var_r=tuple(var_r),
        max_var=max_var,
        sup_mf_error=sup_mf_error,
        max_res_ind3=max_res3,
        max_res_ind2=max_res2,
        kinetic=kinetic,
        mu_in=mu_in,
        t_end=float(t_end),
    )


@dataclass(frozen=True, eq=False)
class MfErrorCurve:
    """Sup-distance of the N-sample mean trajectory to the kinetic one."""

    N_values: tuple[int, ...]
    sup_error: np.ndarray
    spearman: float
    soft_bound: np.ndarray
    soft_bound_satisfied: bool
    single_point: bool


def mf_error_curve(study: McStudyResult) -> MfErrorCurve:
    """Error curve with a monotone-trend statistic and a soft stability bound.

    The soft bound scales the exponential stability constant by an estimated
    W1 sampling scale ~ c/sqrt(N) times a safety factor of 10; it is a
    diagnostic, not an assertion.
    """
    n_values = study.N_values
    sup_error = study.sup_mf_error
    single = len(n_values) < 2
    if single:
        rho = float("nan")
    else:
        rho = float(spearmanr(np.asarray(n_values, dtype=float), sup_error).statistic)

    constants = dobrushin_constants(study.params)
    n_min = min(n_values)
    rng = stream(study.base_seed, 0, 0)
    atoms = sample_measure(study.mu_in, n_min, rng)
    w1_scale = w1(EmpiricalMeasure(atoms=atoms), study.mu_in) * np.sqrt(n_min)
    bound = (
        10.0
        * constants.C
        * np.exp(constants.L * study.t_end)
        * w1_scale
        / np.sqrt(np.asarray(n_values, dtype=float))
    )
    return MfErrorCurve(
        N_values=n_values,
        sup_error=np.asarray(sup_error, dtype=float),
        spearman=rho,
        soft_bound=bound,
        soft_bound_satisfied=bool(np.all(sup_error <= bound)),
        single_point=single,
    )


@dataclass(frozen=True, eq=False)
class ConsistencyResult:
    """Micro run vs moment ODE started from the same empirical ensemble."""

    deviation: float
    mismatch: bool
    times: np.ndarray
    r_micro: np.ndarray
    r_kinetic: np.ndarray


def consistency_experiment(
    p: ModelParams,
    mu_in: Measure1D,
    r_in,
    s_in,
    t_end: float,
    seed: int,
    tol: float = 1e-10,
    n_out: int = DEFAULT_N_OUT,
) -> ConsistencyResult:
    """Exactness of the kinetic equations on empirical data.

    Draws one N-particle ensemble, integrates the constrained system, then
    integrates the moment ODE with the empirical initial measure and N_real
    set to N. The two macro trajectories agree up to integrator tolerance
    when ``p.N_real == p.N``; otherwise the deliberate mismatch is flagged
    and the deviation is O(1).
    """
    rng = stream(seed, p.N, 0)
    q_in = sample_measure(mu_in, p.N, rng)
    micro = integrate_micro(p, r_in, s_in, q_in, t_end, tol=tol, n_out=n_out, with_multipliers=False)

    p_match = replace(p, N_real=float(p.N))
    empirical = EmpiricalMeasure(atoms=q_in)
    kinetic = integrate_moment_ode(p_match, r_in, s_in, empirical, t_end, tol=tol, n_out=n_out)

    deviation = float(np.abs(micro.r - kinetic.r).max())
    return ConsistencyResult(
        deviation=deviation,
        mismatch=bool(p.N_real != p.N),
        times=micro.times,
        r_micro=micro.r,
        r_kinetic=kinetic.r,
    )


@dataclass(frozen=True, eq=False)
class EnergyExperimentResult:
    """Energy accounting for the three solvers on a shared setup."""

    micro: MicroTrajectory
    moment: KineticTrajectory
    pde: KineticTrajectory
    initial_density: GridDensity
    final_density: GridDensity


def energy_experiment(
    p: ModelParams,
    mu_in: Measure1D,
    r_in,
    s_in,
    t_end: float,
    seed: int,
    grid_lo: float = -5.0,
    grid_hi: float = 7.0,
    grid_n_pts: int = 101,
    tol: float = DEFAULT_TOL,
    n_out: int = DEFAULT_N_OUT,
) -> EnergyExperimentResult:
    """Run all three solvers and report their energy budgets.

    The micro run draws its ensemble from ``mu_in``; the transport run
    discretizes ``mu_in`` on the given grid (or uses it directly when it is
    already a grid density). Every returned trajectory carries an attached
    EnergyReport; the t = t_end density snapshot is returned alongside.
    """
    rng = stream(seed, p.N, 0)
    q_in = sample_measure(mu_in, p.N, rng)
    micro = integrate_micro(p, r_in, s_in, q_in, t_end, tol=tol, n_out=n_out, with_multipliers=False)
    moment = integrate_moment_ode(p, r_in, s_in, mu_in, t_end, tol=tol, n_out=n_out)

    if isinstance(mu_in, GridDensity):
        u_in = mu_in
    elif isinstance(mu_in, Gaussian):
        u_in = from_gaussian_on_grid(mu_in, grid_lo, grid_hi, grid_n_pts)
    else:
        raise ValueError("transport solver needs a Gaussian or grid initial measure")
    pde = integrate_pde_coupled(p, r_in, s_in, u_in, t_end, tol=tol, n_out=n_out)

    return EnergyExperimentResult(
        micro=micro,
        moment=moment,
        pde=pde,
        initial_density=u_in,
        final_density=pde.snapshots[-1],
    )
