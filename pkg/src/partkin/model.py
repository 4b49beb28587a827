"""Model parameters, 1-D measure types, and closed-form effective quantities.

The physical system is a macroscopic linear oscillator (mass ``M_r``,
stiffness ``gamma_r``) coupled through the constraint matrix ``G_r`` to
``N_real`` identical particles (mass ``M_q``, stiffness ``gamma_q``).
Simulations may use a reduced particle count ``N``; per-particle mass and
stiffness are then scaled by ``N_real / N`` so that aggregate quantities are
independent of ``N``.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Union

import numpy as np
from scipy.special import ndtri

__all__ = [
    "ModelParams",
    "MacroState",
    "Gaussian",
    "EmpiricalMeasure",
    "GridDensity",
    "Measure1D",
    "scale_particles",
    "effective_mass",
    "effective_stiffness",
    "equilibrium",
    "mean_field_force",
    "first_moment",
    "second_moment",
    "measure_mass",
    "shift_measure",
    "sample_measure",
    "stream",
]


def _as_matrix(value, n: int, name: str) -> np.ndarray:
    mat = np.atleast_2d(np.asarray(value, dtype=float))
    if mat.shape == (1, 1) and n > 1:
        raise ValueError(f"{name} must have shape ({n}, {n}), got scalar")
    if mat.shape != (n, n):
        raise ValueError(f"{name} must have shape ({n}, {n}), got {mat.shape}")
    if not np.all(np.isfinite(mat)):
        raise ValueError(f"{name} must be finite")
    return mat


def _as_vector(value, n: int, name: str) -> np.ndarray:
    vec = np.atleast_1d(np.asarray(value, dtype=float)).ravel()
    if vec.shape != (n,):
        raise ValueError(f"{name} must have length {n}, got shape {vec.shape}")
    if not np.all(np.isfinite(vec)):
        raise ValueError(f"{name} must be finite")
    return vec


def _require_spd(mat: np.ndarray, name: str) -> None:
    if not np.allclose(mat, mat.T, rtol=1e-12, atol=1e-12):
        raise ValueError(f"{name} must be symmetric")
    eigvals = np.linalg.eigvalsh(mat)
    if eigvals.min() <= 0.0:
        raise ValueError(f"{name} must be positive definite")


@dataclass(frozen=True, eq=False)
class ModelParams:
    """All physical constants and dimensions of the coupled system.

    ``M_q`` and ``gamma_q`` are the physical single-particle matrices (the
    values at the realistic count ``N_real``); the per-particle values used in
    an ``N``-particle simulation are the ``(N_real / N)``-scaled accessors
    ``M_q_particle`` and ``gamma_q_particle``.
    """

    M_r: np.ndarray
    M_q: np.ndarray
    gamma_r: np.ndarray
    gamma_q: np.ndarray
    G_r: np.ndarray
    N_real: float
    N: int
    n_r: int = 1
    n_q: int = 1

    def __post_init__(self):
        n_r = int(self.n_r)
        n_q = int(self.n_q)
        if n_r < 1 or n_q < 1:
            raise ValueError("n_r and n_q must be positive integers")
        object.__setattr__(self, "n_r", n_r)
        object.__setattr__(self, "n_q", n_q)
        object.__setattr__(self, "M_r", _as_matrix(self.M_r, n_r, "M_r"))
        object.__setattr__(self, "M_q", _as_matrix(self.M_q, n_q, "M_q"))
        object.__setattr__(self, "gamma_r", _as_matrix(self.gamma_r, n_r, "gamma_r"))
        object.__setattr__(self, "gamma_q", _as_matrix(self.gamma_q, n_q, "gamma_q"))
        G = np.atleast_2d(np.asarray(self.G_r, dtype=float))
        if G.shape != (n_q, n_r):
            raise ValueError(f"G_r must have shape ({n_q}, {n_r}), got {G.shape}")
        if not np.all(np.isfinite(G)):
            raise ValueError("G_r must be finite")
        object.__setattr__(self, "G_r", G)
        _require_spd(self.M_r, "M_r")
        _require_spd(self.M_q, "M_q")
        if not self.N_real >= 0.0:
            raise ValueError("N_real must be a nonnegative real")
        object.__setattr__(self, "N_real", float(self.N_real))
        if int(self.N) < 1:
            raise ValueError("N must be a positive integer")
        object.__setattr__(self, "N", int(self.N))
        m_eff = effective_mass(self)
        if np.linalg.cond(m_eff) > 1e12:
            raise ValueError("effective mass matrix is numerically singular")

    @property
    def M_q_particle(self) -> np.ndarray:
        """Per-particle mass at the simulated count: (N_real / N) * M_q."""
        return (self.N_real / self.N) * self.M_q

    @property
    def gamma_q_particle(self) -> np.ndarray:
        """Per-particle stiffness at the simulated count: (N_real / N) * gamma_q."""
        return (self.N_real / self.N) * self.gamma_q


@dataclass(frozen=True, eq=False)
class MacroState:
    """Macroscopic position r and velocity s = dr/dt."""

    r: np.ndarray
    s: np.ndarray

    def __post_init__(self):
        r = np.atleast_1d(np.asarray(self.r, dtype=float))
        s = np.atleast_1d(np.asarray(self.s, dtype=float))
        if r.shape != s.shape:
            raise ValueError("r and s must have the same shape")
        if not (np.all(np.isfinite(r)) and np.all(np.isfinite(s))):
            raise ValueError("macro state entries must be finite")
        object.__setattr__(self, "r", r)
        object.__setattr__(self, "s", s)


@dataclass(frozen=True, eq=False)
class Gaussian:
    """Normal law with mean ``mean`` and variance ``var`` (1-D)."""

    mean: float
    var: float

    def __post_init__(self):
        if not np.isfinite(self.mean):
            raise ValueError("Gaussian mean must be finite")
        if not self.var > 0.0:
            raise ValueError("Gaussian var must be positive")
        object.__setattr__(self, "mean", float(self.mean))
        object.__setattr__(self, "var", float(self.var))


@dataclass(frozen=True, eq=False)
class EmpiricalMeasure:
    """Weighted atoms; weights default to uniform and must sum to one."""

    atoms: np.ndarray
    weights: np.ndarray = field(default=None)  # type: ignore[assignment]

    def __post_init__(self):
        atoms = np.atleast_1d(np.asarray(self.atoms, dtype=float))
        if atoms.ndim > 2:
            raise ValueError("atoms must be a 1-D or 2-D array")
        if atoms.size == 0:
            raise ValueError("empirical measure needs at least one atom")
        if not np.all(np.isfinite(atoms)):
            raise ValueError("atoms must be finite")
        object.__setattr__(self, "atoms", atoms)
        if self.weights is None:
            weights = np.full(len(atoms), 1.0 / len(atoms))
        else:
            weights = np.atleast_1d(np.asarray(self.weights, dtype=float))
        if weights.shape != (len(atoms),):
            raise ValueError("weights must align with atoms")
        if np.any(weights < 0.0):
            raise ValueError("weights must be nonnegative")
        if abs(weights.sum() - 1.0) > 1e-12:
            raise ValueError("weights must sum to 1 within 1e-12")
        object.__setattr__(self, "weights", weights)

    @property
    def n_q(self) -> int:
        return 1 if self.atoms.ndim == 1 else self.atoms.shape[1]

    @property
    def uniform(self) -> bool:
        return bool(np.all(self.weights == self.weights[0]))


@dataclass(frozen=True, eq=False)
class GridDensity:
    """Density samples on an equidistant grid over [lo, hi] (1-D)."""

    lo: float
    hi: float
    values: np.ndarray

    def __post_init__(self):
        if not self.lo < self.hi:
            raise ValueError("lo must be strictly below hi")
        values = np.atleast_1d(np.asarray(self.values, dtype=float))
        if values.ndim != 1 or len(values) < 2:
            raise ValueError("values must be a 1-D array with n_pts >= 2")
        if not np.all(np.isfinite(values)):
            raise ValueError("values must be finite")
        object.__setattr__(self, "lo", float(self.lo))
        object.__setattr__(self, "hi", float(self.hi))
        object.__setattr__(self, "values", values)

    @property
    def n_pts(self) -> int:
        return len(self.values)

    @property
    def dx(self) -> float:
        return (self.hi - self.lo) / (self.n_pts - 1)

    @property
    def grid(self) -> np.ndarray:
        return np.linspace(self.lo, self.hi, self.n_pts)

    @property
    def min_value(self) -> float:
        """Most negative sample; values may dip below 0 by solver tolerance."""
        return float(self.values.min())


Measure1D = Union[EmpiricalMeasure, GridDensity, Gaussian]


def from_gaussian_on_grid(mu: Gaussian, lo: float, hi: float, n_pts: int) -> GridDensity:
    """Pointwise evaluation of the Gaussian pdf at the grid nodes.

    No renormalization is applied; the discrete trapezoid mass (slightly below
    one when the grid truncates the tails) is available via ``measure_mass``.
    """
    y = np.linspace(lo, hi, n_pts)
    sigma2 = mu.var
    values = np.exp(-((y - mu.mean) ** 2) / (2.0 * sigma2)) / np.sqrt(2.0 * np.pi * sigma2)
    return GridDensity(lo=lo, hi=hi, values=values)


__all__.append("from_gaussian_on_grid")


def scale_particles(base: ModelParams, N: int) -> ModelParams:
    """Return the same physical system simulated with ``N`` particles.

    Per-particle mass and force are scaled by ``N_real / N`` wherever
    per-particle sums are formed (see ``M_q_particle``/``gamma_q_particle``);
    the aggregate effective quantities are exactly invariant.
    """
    if int(N) < 1:
        raise ValueError("N must be a positive integer")
    return replace(base, N=int(N))


def effective_mass(p: ModelParams) -> np.ndarray:
    """m_eff = M_r + N_real * G_r^T M_q G_r."""
    return p.M_r + p.N_real * (p.G_r.T @ p.M_q @ p.G_r)


def effective_stiffness(p: ModelParams) -> np.ndarray:
    """gamma_eff = gamma_r + N_real * G_r^T gamma_q G_r."""
    return p.gamma_r + p.N_real * (p.G_r.T @ p.gamma_q @ p.G_r)


def measure_mass(mu: Measure1D) -> float:
    """Total mass of the measure; 1 except for truncated grid densities."""
    if isinstance(mu, GridDensity):
        return float(np.trapezoid(mu.values, dx=mu.dx))
    return 1.0


def first_moment(mu: Measure1D) -> np.ndarray:
    """Integral of q over the measure (trapezoid rule on grid densities)."""
    if isinstance(mu, Gaussian):
        m1 = np.array([mu.mean])
    elif isinstance(mu, EmpiricalMeasure):
        atoms = mu.atoms if mu.atoms.ndim == 2 else mu.atoms[:, None]
        m1 = mu.weights @ atoms
    elif isinstance(mu, GridDensity):
        m1 = np.array([np.trapezoid(mu.grid * mu.values, dx=mu.dx)])
    else:
        raise ValueError(f"unsupported measure type {type(mu).__name__}")
    if not np.all(np.isfinite(m1)):
        raise ValueError("measure has a non-finite first moment")
    return m1


def second_moment(mu: Measure1D) -> float:
    """Integral of q^2 over the measure, same quadrature conventions (1-D)."""
    if isinstance(mu, Gaussian):
        return mu.var + mu.mean**2
    if isinstance(mu, EmpiricalMeasure):
        if mu.n_q != 1:
            raise ValueError("second_moment supports n_q = 1 only")
        return float(mu.weights @ np.ravel(mu.atoms) ** 2)
    if isinstance(mu, GridDensity):
        return float(np.trapezoid(mu.grid**2 * mu.values, dx=mu.dx))
    raise ValueError(f"unsupported measure type {type(mu).__name__}")


def mean_field_force(p: ModelParams, mu: Measure1D) -> np.ndarray:
    """f = N_real * G_r^T gamma_q * (first moment of mu)."""
    m1 = first_moment(mu)
    if len(m1) != p.n_q:
        raise ValueError("measure dimension does not match n_q")
    return p.N_real * (p.G_r.T @ p.gamma_q @ m1)


def equilibrium(p: ModelParams, r_in, mu_in: Measure1D) -> np.ndarray:
    """Rest point r0 = gamma_eff^-1 N_real G_r^T gamma_q (G_r r_in + m1_in)."""
    r_in = _as_vector(r_in, p.n_r, "r_in")
    m1 = first_moment(mu_in)
    rhs = p.N_real * (p.G_r.T @ p.gamma_q @ (p.G_r @ r_in + m1))
    return np.linalg.solve(effective_stiffness(p), rhs)


def shift_measure(mu: Measure1D, w) -> Measure1D:
    """Translate the measure by ``w`` (scalar, or length-n_q vector for atoms).

    Grid densities are resampled onto their fixed grid by linear interpolation
    of the shifted profile, with zero fill outside the domain.
    """
    if isinstance(mu, EmpiricalMeasure):
        shift = np.asarray(w, dtype=float)
        return EmpiricalMeasure(atoms=mu.atoms + shift, weights=mu.weights)
    w = float(np.asarray(w).reshape(()))
    if isinstance(mu, Gaussian):
        return Gaussian(mean=mu.mean + w, var=mu.var)
    if isinstance(mu, GridDensity):
        shifted = np.interp(mu.grid - w, mu.grid, mu.values, left=0.0, right=0.0)
        return GridDensity(lo=mu.lo, hi=mu.hi, values=shifted)
    raise ValueError(f"unsupported measure type {type(mu).__name__}")


def stream(seed: int, *key: int) -> np.random.Generator:
    """Counter-based generator for the (seed, *key) stream.

    Streams with distinct keys are statistically independent and do not depend
    on scheduling order, so parallel runs reproduce serial results bit for bit.
    """
    return np.random.Generator(np.random.Philox(np.random.SeedSequence((int(seed), *map(int, key)))))


def sample_measure(mu: Measure1D, n: int, rng: np.random.Generator) -> np.ndarray:
    """Draw ``n`` i.i.d. points from the measure.

    Gaussian sampling uses the inverse CDF so the draw depends only on the
    generator's uniform stream, not on a rejection layout.
    """
    if n < 1:
        raise ValueError("n must be positive")
    if isinstance(mu, Gaussian):
        u = rng.random(n)
        u = np.clip(u, 1e-300, 1.0 - 1e-16)
        return mu.mean + np.sqrt(mu.var) * ndtri(u)
    if isinstance(mu, EmpiricalMeasure):
        idx = rng.choice(len(mu.weights), size=n, p=mu.weights)
        return np.asarray(mu.atoms)[idx]
    raise ValueError(f"sampling from {type(mu).__name__} is not supported")
