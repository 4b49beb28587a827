"""Schema-checked loading of the simulation CSV outputs.

Every loader failure raises :class:`FigureDataError` with a message naming
the offending file and, where applicable, the missing column — callers can
surface these directly.
"""

from __future__ import annotations

import csv
from pathlib import Path

import numpy as np

__all__ = ["FigureDataError", "SCHEMAS", "load_table", "load_input"]


class FigureDataError(ValueError):
    """An input CSV is missing, empty, malformed, or fails a sanity check."""


# Documented column sets per producer file. ``micro_ensemble.csv`` is special:
# it carries ``t`` plus one ``Q_j`` column per particle, so only ``t`` is fixed.
_KINETIC = ("t", "r", "s", "m1", "m2", "T_r", "T_q", "U_r", "U_q", "E_total", "mass")
_ENERGY = ("t", "T_r", "T_q", "U_r", "U_q", "E_total")
SCHEMAS: dict[str, tuple[str, ...]] = {
    "micro_trajectory.csv": (
        "t", "r", "s", "Qmean", "Qvar", "res_ind3", "res_ind2",
        "T_r", "T_q", "U_r", "U_q", "E_total",
    ),
    "micro_ensemble.csv": ("t",),
    "moment_trajectory.csv": _KINETIC,
    "pde_trajectory.csv": _KINETIC,
    "density.csv": ("t", "q", "u"),
    "density_initial.csv": ("q", "u"),
    "density_final.csv": ("q", "u"),
    "mc_summary.csv": ("N", "max_var", "sup_mf_error", "slope_contrib"),
    "mc_trajectories.csv": ("N", "sample", "t", "r"),
    "energy_micro.csv": _ENERGY,
    "energy_moment.csv": _ENERGY,
    "energy_pde.csv": _ENERGY,
}


def load_table(path) -> dict[str, np.ndarray]:
    """Read a headered numeric CSV into a column dict of float arrays."""
    path = Path(path)
    if not path.is_file():
        raise FigureDataError(f"input CSV not found: {path}")
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise FigureDataError(f"{path} is empty") from None
        rows = list(reader)
    if not rows:
        raise FigureDataError(f"{path} has no data rows")
    n_cols = len(header)
    columns = {name: np.empty(len(rows)) for name in header}
    for i, row in enumerate(rows):
        if len(row) != n_cols:
            raise FigureDataError(
                f"{path} row {i + 2}: expected {n_cols} cells, found {len(row)}"
            )
        for name, cell in zip(header, row):
            try:
                columns[name][i] = float(cell)
            except ValueError:
                raise FigureDataError(
                    f"{path} row {i + 2}: column {name!r} has non-numeric value {cell!r}"
                ) from None
    return columns


def load_input(name: str, path) -> dict[str, np.ndarray]:
    """Load one known simulation output and verify its documented columns."""
    columns = load_table(path)
    for required in SCHEMAS.get(name, ()):
        if required not in columns:
            raise FigureDataError(f"column {required!r} missing from {path}")
    if name == "micro_ensemble.csv" and not any(c.startswith("Q_") for c in columns):
        raise FigureDataError(f"no Q_j particle columns in {path}")
    return columns
