"""Flat run configuration, config-file parsing, and CSV/manifest output.

The config format is one ``key = value`` per line with ``#`` comments. Keys
are dotted (``solver.tol``); unknown keys are rejected by name. ``--set``
overrides use the same ``key=value`` syntax. Floats are written to CSV with 17
significant digits so reruns are byte-identical.
"""

from __future__ import annotations

import dataclasses
import json
import platform
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import ConfigError
from .model import Gaussian, GridDensity, Measure1D, ModelParams, from_gaussian_on_grid

__all__ = [
    "RunConfig",
    "parse_config_text",
    "format_float",
    "write_csv",
    "write_manifest",
]

DEFAULT_N_VALUES = (4, 8, 16, 32, 64, 128, 256, 512, 1024, 2048)


def _parse_float(text: str) -> float:
    try:
        return float(text)
    except ValueError as exc:
        raise ConfigError(f"expected a number, got {text!r}") from exc


def _parse_int(text: str) -> int:
    try:
        return int(text)
    except ValueError as exc:
        raise ConfigError(f"expected an integer, got {text!r}") from exc


def _parse_int_list(text: str) -> tuple[int, ...]:
    parts = [part.strip() for part in text.split(",") if part.strip()]
    if not parts:
        raise ConfigError("expected a comma-separated list of integers")
    return tuple(_parse_int(part) for part in parts)


def _parse_str(text: str) -> str:
    return text


# config key -> (dataclass field, parser)
_KEYS = {
    "M_r": ("M_r", _parse_float),
    "M_q_total": ("M_q_total", _parse_float),
    "gamma_r": ("gamma_r", _parse_float),
    "gamma_q_total": ("gamma_q_total", _parse_float),
    "G_r": ("G_r", _parse_float),
    "N_real": ("N_real", _parse_float),
    "N": ("N", _parse_int),
    "r_in": ("r_in", _parse_float),
    "s_in": ("s_in", _parse_float),
    "mu_in.kind": ("mu_in_kind", _parse_str),
    "mu_in.mean": ("mu_in_mean", _parse_float),
    "mu_in.var": ("mu_in_var", _parse_float),
    "t_end": ("t_end", _parse_float),
    "seed": ("seed", _parse_int),
    "solver.tol": ("solver_tol", _parse_float),
    "solver.max_step": ("solver_max_step", _parse_float),
    "solver.n_out": ("solver_n_out", _parse_int),
    "grid.lo": ("grid_lo", _parse_float),
    "grid.hi": ("grid_hi", _parse_float),
    "grid.n_pts": ("grid_n_pts", _parse_int),
    "mc.N_values": ("mc_N_values", _parse_int_list),
    "mc.n_samples": ("mc_n_samples", _parse_int),
    "out_dir": ("out_dir", _parse_str),
}
_FIELD_TO_KEY = {field: key for key, (field, _) in _KEYS.items()}


@dataclass(frozen=True)
class RunConfig:
    """Complete description of one run: model, initial data, solver, outputs.

    ``M_q_total``/``gamma_q_total`` are aggregate quantities; the per-particle
    base values handed to the model are these divided by ``N_real``.
    """

    M_r: float = 20.0
    M_q_total: float = 10.0
    gamma_r: float = 1.0
    gamma_q_total: float = 1.0
    G_r: float = -1.0
    N_real: float = 250.0
    N: int = 250
    r_in: float = 1.0
    s_in: float = 0.0
    mu_in_kind: str = "gaussian"
    mu_in_mean: float = -2.0
    mu_in_var: float = 1.0
    t_end: float = 60.0
    seed: int = 1234
    solver_tol: float = 1e-8
    solver_max_step: float = float("inf")
    solver_n_out: int = 601
    grid_lo: float = -5.0
    grid_hi: float = 7.0
    grid_n_pts: int = 101
    mc_N_values: tuple[int, ...] = DEFAULT_N_VALUES
    mc_n_samples: int = 100
    out_dir: str = "out"

    @classmethod
    def from_file(cls, path, overrides=()) -> "RunConfig":
        try:
            text = Path(path).read_text(encoding="utf-8")
        except OSError as exc:
            raise ConfigError(f"cannot read config file {path}: {exc}") from exc
        raw = parse_config_text(text, source=str(path))
        cfg = cls(**raw)
        return cfg.with_overrides(overrides)

    def with_overrides(self, overrides) -> "RunConfig":
        updates = {}
        for item in overrides:
            if "=" not in item:
                raise ConfigError(f"override {item!r} is not of the form key=value")
            key, _, value = item.partition("=")
            key = key.strip()
            if key not in _KEYS:
                raise ConfigError(f"unknown config key {key!r}")
            field, parser = _KEYS[key]
            updates[field] = parser(value.strip())
        return dataclasses.replace(self, **updates) if updates else self

    def validate(self) -> None:
        """Re-validate every model-level invariant; raise ConfigError by key."""
        if self.mu_in_kind != "gaussian":
            raise ConfigError(f"mu_in.kind must be 'gaussian', got {self.mu_in_kind!r}")
        if not self.mu_in_var > 0.0:
            raise ConfigError(f"mu_in.var must be positive, got {format_float(self.mu_in_var)}")
        if not self.t_end >= 0.0:
            raise ConfigError("t_end must be nonnegative")
        if not self.solver_tol > 0.0:
            raise ConfigError("solver.tol must be positive")
        if self.solver_n_out < 1:
            raise ConfigError("solver.n_out must be at least 1")
        if not self.grid_lo < self.grid_hi:
            raise ConfigError("grid.lo must be below grid.hi")
        if self.grid_n_pts < 3:
            raise ConfigError("grid.n_pts must be at least 3")
        if self.mc_n_samples < 2:
            raise ConfigError("mc.n_samples must be at least 2")
        if any(n < 1 for n in self.mc_N_values):
            raise ConfigError("mc.N_values entries must be at least 1")
        if not self.N_real > 0.0:
            raise ConfigError("N_real must be positive")
        try:
            self.to_model_params()
        except (ValueError, np.linalg.LinAlgError) as exc:
            raise ConfigError(str(exc)) from exc

    def to_model_params(self) -> ModelParams:
        return ModelParams(
            M_r=self.M_r,
            M_q=self.M_q_total / self.N_real,
            gamma_r=self.gamma_r,
            gamma_q=self.gamma_q_total / self.N_real,
            G_r=self.G_r,
            N_real=self.N_real,
            N=self.N,
        )

    def initial_measure(self) -> Measure1D:
        return Gaussian(mean=self.mu_in_mean, var=self.mu_in_var)

    def initial_grid_density(self) -> GridDensity:
        return from_gaussian_on_grid(
            self.initial_measure(), self.grid_lo, self.grid_hi, self.grid_n_pts
        )

    def to_flat_dict(self) -> dict:
        """Dotted-key mapping of every field, with JSON-native values."""
        out = {}
        for field in dataclasses.fields(self):
            value = getattr(self, field.name)
            key = _FIELD_TO_KEY[field.name]
            if isinstance(value, tuple):
                value = list(value)
            elif isinstance(value, float) and not np.isfinite(value):
                value = str(value)  # "inf" round-trips through the parser; JSON has no Infinity
            out[key] = value
        return out


def parse_config_text(text: str, source: str = "<config>") -> dict:
    """Parse ``key = value`` lines into RunConfig field values."""
    raw = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.split("#", 1)[0].strip()
        if not stripped:
            continue
        if "=" not in stripped:
            raise ConfigError(f"{source}:{lineno}: expected 'key = value', got {line.strip()!r}")
        key, _, value = stripped.partition("=")
        key = key.strip()
        if key not in _KEYS:
            raise ConfigError(f"{source}:{lineno}: unknown config key {key!r}")
        field, parser = _KEYS[key]
        if field in raw:
            raise ConfigError(f"{source}:{lineno}: duplicate key {key!r}")
        try:
            raw[field] = parser(value.strip())
        except ConfigError as exc:
            raise ConfigError(f"{source}:{lineno}: {key}: {exc}") from exc
    return raw


def format_float(x: float) -> str:
    return format(float(x), ".17g")


def _format_cell(value) -> str:
    if isinstance(value, (bool, np.bool_)):
        return str(int(value))
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return format_float(value)


def write_csv(path, header, rows) -> None:
    """Write rows of numbers with a header line and 17-significant-digit floats."""
    path = Path(path)
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(_format_cell(cell) for cell in row))
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def write_manifest(out_dir, command: str, cfg: RunConfig, wall_time: float, outputs, overrides=()) -> None:
    from . import __version__

    manifest = {
        "command": command,
        "config": cfg.to_flat_dict(),
        "overrides": list(overrides),
        "versions": {
            "python": platform.python_version(),
            "numpy": np.__version__,
            "scipy": _scipy_version(),
            "partkin": __version__,
        },
        "wall_time_s": round(float(wall_time), 3),
        "outputs": sorted(str(name) for name in outputs),
    }
    Path(out_dir, "manifest.json").write_text(
        json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )


def _scipy_version() -> str:
    import scipy

    return scipy.__version__
