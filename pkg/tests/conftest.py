"""Shared fixtures: reference parameters and cached expensive runs."""

from __future__ import annotations

import numpy as np
import pytest

import partkin as pk


@pytest.fixture(scope="session")
def cfg() -> pk.RunConfig:
    return pk.RunConfig()


@pytest.fixture(scope="session")
def p_ref(cfg) -> pk.ModelParams:
    return cfg.to_model_params()


@pytest.fixture(scope="session")
def mu_ref(cfg) -> pk.Gaussian:
    return cfg.initial_measure()


@pytest.fixture(scope="session")
def micro_ref(cfg, p_ref, mu_ref) -> pk.MicroTrajectory:
    """Reference micro run: N = 250, seed 1234, tol 1e-8, t in [0, 60]."""
    q_in = pk.sample_measure(mu_ref, cfg.N, pk.stream(cfg.seed, cfg.N, 0))
    return pk.integrate_micro(p_ref, cfg.r_in, cfg.s_in, q_in, cfg.t_end)


@pytest.fixture(scope="session")
def moment_ref(cfg, p_ref, mu_ref) -> pk.KineticTrajectory:
    return pk.integrate_moment_ode(p_ref, cfg.r_in, cfg.s_in, mu_ref, cfg.t_end)


@pytest.fixture(scope="session")
def pde_ref(cfg, p_ref) -> pk.KineticTrajectory:
    """PDE run on the default 101-point grid, initial mean -2."""
    return pk.integrate_pde_coupled(
        p_ref, cfg.r_in, cfg.s_in, cfg.initial_grid_density(), cfg.t_end
    )


def pde_pair(p, mean, n_pts, cfg):
    """PDE run plus the moment reference sharing its discretized initial law."""
    u_in = pk.from_gaussian_on_grid(pk.Gaussian(mean, 1.0), cfg.grid_lo, cfg.grid_hi, n_pts)
    pde = pk.integrate_pde_coupled(p, cfg.r_in, cfg.s_in, u_in, cfg.t_end)
    moment = pk.integrate_moment_ode(p, cfg.r_in, cfg.s_in, u_in, cfg.t_end, tol=1e-10)
    return pde, moment


@pytest.fixture(scope="session")
def pde_gaps(cfg, p_ref):
    """Max-norm PDE-vs-moment gaps at 101 and 201 points, both initial means."""
    gaps = {}
    for mean in (-2.0, 2.0):
        for n_pts in (101, 201):
            pde, moment = pde_pair(p_ref, mean, n_pts, cfg)
            gaps[(mean, n_pts)] = float(np.abs(pde.r - moment.r).max())
    return gaps
