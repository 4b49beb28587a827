"""Simulation of a macroscopic linear oscillator coupled to a particle bath.

A finite-dimensional damped-free oscillator is linked through uniform linear
constraints to N microscopic linear springs. The package integrates the
constrained particle system directly, solves its exact kinetic (mean-field)
counterpart through a closed moment ODE and a transport discretisation,
and provides the optimal-transport metric, stability constants, and
Monte-Carlo tooling used to compare the descriptions.
"""

from .config import RunConfig
from .errors import ConfigError, IntegrationFailure
from .harness import (
    ConsistencyResult,
    EnergyExperimentResult,
    McStudyResult,
    MfErrorCurve,
    consistency_experiment,
    energy_experiment,
    mf_error_curve,
    run_mc_study,
)
from .kinetic import (
    KineticTrajectory,
    characteristic_flow,
    commutation_check,
    energy_kinetic,
    integrate_moment_ode,
    integrate_pde_coupled,
    mean_field_multiplier,
    pushforward,
    upwind_rhs,
)
from .metrics import (
    DobrushinCheck,
    DobrushinConstants,
    dobrushin_check,
    dobrushin_constants,
    w1,
    w1_cdf_integral,
    w1_dual_lower_bound,
    w1_shift_property,
)
from .micro import (
    EnergyReport,
    MicroTrajectory,
    constraint_residuals,
    energy_micro,
    explicit_solution,
    integrate_micro,
    ode_rhs,
    recover_multipliers,
)
from .model import (
    EmpiricalMeasure,
    Gaussian,
    GridDensity,
    MacroState,
    Measure1D,
    ModelParams,
    effective_mass,
    effective_stiffness,
    equilibrium,
    first_moment,
    from_gaussian_on_grid,
    mean_field_force,
    measure_mass,
    sample_measure,
    scale_particles,
    second_moment,
    shift_measure,
    stream,
)

__version__ = "0.1.0"

__all__ = [
    "__version__",
    "ConfigError",
    "IntegrationFailure",
    "ModelParams",
    "MacroState",
    "Gaussian",
    "EmpiricalMeasure",
    "GridDensity",
    "Measure1D",
    "effective_mass",
    "effective_stiffness",
    "equilibrium",
    "mean_field_force",
    "measure_mass",
    "first_moment",
    "second_moment",
    "shift_measure",
    "from_gaussian_on_grid",
    "scale_particles",
    "sample_measure",
    "stream",
    "MicroTrajectory",
    "EnergyReport",
    "ode_rhs",
    "integrate_micro",
    "explicit_solution",
    "recover_multipliers",
    "constraint_residuals",
    "energy_micro",
    "KineticTrajectory",
    "characteristic_flow",
    "pushforward",
    "integrate_moment_ode",
    "upwind_rhs",
    "integrate_pde_coupled",
    "mean_field_multiplier",
    "commutation_check",
    "energy_kinetic",
    "w1",
    "w1_cdf_integral",
    "w1_dual_lower_bound",
    "w1_shift_property",
    "DobrushinConstants",
    "DobrushinCheck",
    "dobrushin_constants",
    "dobrushin_check",
    "McStudyResult",
    "MfErrorCurve",
    "ConsistencyResult",
    "EnergyExperimentResult",
    "run_mc_study",
    "mf_error_curve",
    "consistency_experiment",
    "energy_experiment",
    "RunConfig",
]
