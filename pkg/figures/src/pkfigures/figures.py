"""Figure builders and the rendering entry points.

Each figure is registered with the CSV inputs it consumes; ``render`` loads
and validates those inputs, builds the figure, and only then writes the
output file. Rendering twice from identical inputs produces byte-identical
SVG (fixed hash salt, no date metadata, glyphs stored as paths).
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Mapping

import matplotlib

matplotlib.use("Agg")  # render-only package; never needs a display

import matplotlib.pyplot as plt
import numpy as np

from .csvio import FigureDataError, load_input

__all__ = ["FigureSpec", "FIGURES", "render", "render_all"]

# Deterministic drawing defaults shared by every figure.
_RC = {
    "svg.hashsalt": "pkfigures",
    "font.size": 9,
    "axes.grid": True,
    "grid.alpha": 0.3,
    "axes.titlesize": 10,
    "figure.constrained_layout.use": True,
}

_ENERGY_SERIES = ("T_r", "T_q", "U_r", "U_q")
_FLAT_DRIFT_BUDGET = 1e-5


@dataclass(frozen=True)
class FigureSpec:
    """One renderable figure: its id, required CSV inputs, and builder."""

    figure_id: str
    inputs: tuple[str, ...]
    description: str
    builder: Callable[[dict[str, dict[str, np.ndarray]]], "plt.Figure"]


def _fig4_micro_trajectories(data):
    traj = data["micro_trajectory.csv"]
    ensemble = data["micro_ensemble.csv"]
    fig, (ax_r, ax_q) = plt.subplots(1, 2, figsize=(9.6, 3.8))
    ax_r.plot(traj["t"], traj["r"], color="tab:blue")
    ax_r.set_xlabel("t")
    ax_r.set_ylabel("r(t)")
    ax_r.set_title("macroscopic trajectory")
    t = ensemble["t"]
    for name in sorted(c for c in ensemble if c.startswith("Q_")):
        ax_q.plot(t, ensemble[name], color="tab:orange", linewidth=0.3, alpha=0.2)
    ax_q.plot(traj["t"], traj["Qmean"], color="tab:red", linewidth=1.5, label="ensemble mean")
    ax_q.set_xlabel("t")
    ax_q.set_ylabel("$Q_j(t)$")
    ax_q.set_title("cross-bridge extensions")
    ax_q.legend(loc="upper right")
    return fig


def _fig5_discrete_vs_kinetic(data):
    micro = data["micro_trajectory.csv"]
    moment = data["moment_trajectory.csv"]
    fig, ax = plt.subplots(figsize=(6.0, 3.8))
    ax.plot(micro["t"], micro["r"], color="tab:blue", label="particle run")
    ax.plot(moment["t"], moment["r"], color="tab:red", linestyle="--", label="kinetic run")
    ax.set_xlabel("t")
    ax.set_ylabel("r(t)")
    ax.set_title("discrete vs kinetic macroscopic trajectory")
    ax.legend(loc="upper right")
    return fig


def _pivot_density(density, path_hint="density.csv"):
    ts = np.unique(density["t"])
    qs = np.unique(density["q"])
    grid = np.full((len(ts), len(qs)), np.nan)
    it = np.searchsorted(ts, density["t"])
    iq = np.searchsorted(qs, density["q"])
    grid[it, iq] = density["u"]
    if np.isnan(grid).any():
        raise FigureDataError(f"{path_hint} does not cover a full (t, q) product grid")
    return ts, qs, grid


def _fig6_kinetic_evolution(data):
    traj = data["pde_trajectory.csv"]
    ts, qs, grid = _pivot_density(data["density.csv"])
    fig, (ax_r, ax_u) = plt.subplots(1, 2, figsize=(9.6, 3.8))
    ax_r.plot(traj["t"], traj["r"], color="tab:blue")
    ax_r.set_xlabel("t")
    ax_r.set_ylabel("r(t)")
    ax_r.set_title("macroscopic trajectory (transport run)")
    mesh = ax_u.pcolormesh(ts, qs, grid.T, shading="auto", cmap="viridis", rasterized=True)
    ax_u.set_xlabel("t")
    ax_u.set_ylabel("q")
    ax_u.set_title("cross-bridge density u(t, q)")
    ax_u.grid(False)
    fig.colorbar(mesh, ax=ax_u, label="u")
    return fig


def _fan_groups(mc):
    n_col = mc["N"].astype(int)
    values = sorted(set(n_col.tolist()))
    if len(values) <= 3:
        return values
    return [values[0], values[len(values) // 2], values[-1]]


def _fig7_mc_fans_and_variance(data):
    mc = data["mc_trajectories.csv"]
    summary = data["mc_summary.csv"]
    picks = _fan_groups(mc)
    fig, axes = plt.subplots(2, 2, figsize=(9.6, 7.2))
    fan_axes = [axes[0, 0], axes[0, 1], axes[1, 0]]
    n_col = mc["N"].astype(int)
    sample_col = mc["sample"].astype(int)
    for ax, N in zip(fan_axes, picks):
        mask_n = n_col == N
        for k in np.unique(sample_col[mask_n]):
            mask = mask_n & (sample_col == k)
            ax.plot(mc["t"][mask], mc["r"][mask], color="tab:blue", linewidth=0.4, alpha=0.35)
        ax.set_title(f"sampled r(t), N = {N}")
        ax.set_xlabel("t")
        ax.set_ylabel("r")
    for ax in fan_axes[len(picks):]:
        ax.axis("off")
    ax_v = axes[1, 1]
    order = np.argsort(summary["N"])
    n_vals = summary["N"][order]
    var_vals = summary["max_var"][order]
    ax_v.loglog(n_vals, var_vals, marker="o", color="tab:blue", label="max variance")
    ax_v.loglog(
        n_vals,
        var_vals[0] * n_vals[0] / n_vals,
        linestyle="--",
        color="tab:gray",
        label="slope $-1$ reference",
    )
    ax_v.set_xlabel("N")
    ax_v.set_ylabel("max variance of r(t)")
    ax_v.set_title("variance scaling")
    ax_v.legend(loc="upper right")
    return fig


def _fig8_mean_field_error(data):
    mc = data["mc_trajectories.csv"]
    summary = data["mc_summary.csv"]
    moment = data["moment_trajectory.csv"]
    fig, (ax_t, ax_e) = plt.subplots(1, 2, figsize=(9.6, 3.8))
    n_col = mc["N"].astype(int)
    cmap = plt.get_cmap("viridis")
    values = sorted(set(n_col.tolist()))
    for i, N in enumerate(values):
        mask_n = n_col == N
        samples = np.unique(mc["sample"][mask_n].astype(int))
        first = mask_n & (mc["sample"].astype(int) == samples[0])
        t = mc["t"][first]
        stack = np.stack(
            [mc["r"][mask_n & (mc["sample"].astype(int) == k)] for k in samples]
        )
        color = cmap(0.15 + 0.7 * i / max(1, len(values) - 1))
        ax_t.plot(t, stack.mean(axis=0), color=color, linewidth=1.0, label=f"N = {N}")
    ax_t.plot(moment["t"], moment["r"], color="black", linewidth=1.6, linestyle="--",
              label="kinetic")
    ax_t.set_xlabel("t")
    ax_t.set_ylabel("mean r(t)")
    ax_t.set_title("mean trajectories vs kinetic run")
    ax_t.legend(loc="upper right", fontsize=7)
    order = np.argsort(summary["N"])
    ax_e.loglog(summary["N"][order], summary["sup_mf_error"][order], marker="o",
                color="tab:blue")
    ax_e.set_xlabel("N")
    ax_e.set_ylabel("sup |mean r − kinetic r|")
    ax_e.set_title("mean-field error")
    return fig


def _fig9_energy_panels(data):
    micro = data["energy_micro.csv"]
    pde = data["energy_pde.csv"]
    # The whole point of this figure: conservative particle run vs energy-gaining
    # transport run. Guard the claim numerically before drawing anything.
    E_micro = micro["E_total"]
    drift = float(np.abs(E_micro - E_micro[0]).max() / abs(E_micro[0]))
    if drift > _FLAT_DRIFT_BUDGET:
        raise FigureDataError(
            f"energy_micro.csv: E_total is not flat (relative drift {drift:.3e} "
            f"> {_FLAT_DRIFT_BUDGET:.0e})"
        )
    E_pde = pde["E_total"]
    if not E_pde[-1] > E_pde[0]:
        raise FigureDataError(
            "energy_pde.csv: E_total does not rise "
            f"({E_pde[0]:.6f} -> {E_pde[-1]:.6f})"
        )
    fig, (ax_m, ax_p) = plt.subplots(1, 2, figsize=(9.6, 3.8), sharey=True)
    for ax, table, title in ((ax_m, micro, "particle run"), (ax_p, pde, "transport run")):
        for name in _ENERGY_SERIES:
            ax.plot(table["t"], table[name], linewidth=1.0, label=f"${name}$")
        ax.plot(table["t"], table["E_total"], color="black", linewidth=1.6,
                label=r"$E_\mathrm{total}$")
        ax.set_xlabel("t")
        ax.set_title(title)
        ax.legend(loc="center right", fontsize=7)
    ax_m.set_ylabel("energy")
    return fig


def _fig10_diffusion_snapshot(data):
    initial = data["density_initial.csv"]
    final = data["density_final.csv"]
    fig, ax = plt.subplots(figsize=(6.0, 3.8))
    ax.plot(initial["q"], initial["u"], color="tab:gray", linestyle="--", label="t = 0")
    ax.plot(final["q"], final["u"], color="tab:blue", label="t = end")
    ax.set_xlabel("q")
    ax.set_ylabel("u(q)")
    ax.set_title("numerical diffusion of the cross-bridge density")
    ax.legend(loc="upper right")
    return fig


FIGURES: dict[str, FigureSpec] = {
    spec.figure_id: spec
    for spec in (
        FigureSpec(
            "fig4",
            ("micro_trajectory.csv", "micro_ensemble.csv"),
            "particle run: macroscopic trajectory and cross-bridge extensions",
            _fig4_micro_trajectories,
        ),
        FigureSpec(
            "fig5",
            ("micro_trajectory.csv", "moment_trajectory.csv"),
            "discrete vs kinetic macroscopic trajectory",
            _fig5_discrete_vs_kinetic,
        ),
        FigureSpec(
            "fig6",
            ("pde_trajectory.csv", "density.csv"),
            "transport run: trajectory and density heatmap",
            _fig6_kinetic_evolution,
        ),
        FigureSpec(
            "fig7",
            ("mc_trajectories.csv", "mc_summary.csv"),
            "Monte-Carlo fan charts and variance scaling",
            _fig7_mc_fans_and_variance,
        ),
        FigureSpec(
            "fig8",
            ("mc_trajectories.csv", "mc_summary.csv", "moment_trajectory.csv"),
            "mean trajectories vs kinetic run and mean-field error curve",
            _fig8_mean_field_error,
        ),
        FigureSpec(
            "fig9",
            ("energy_micro.csv", "energy_pde.csv"),
            "energy budgets: flat particle run vs rising transport run",
            _fig9_energy_panels,
        ),
        FigureSpec(
            "fig10",
            ("density_initial.csv", "density_final.csv"),
            "diffusion of the density between start and end",
            _fig10_diffusion_snapshot,
        ),
    )
}


def _resolve_paths(csv_paths, inputs: tuple[str, ...]) -> dict[str, Path]:
    """Map each required input name to a concrete path.

    Accepts a directory (standard filenames inside it), a mapping
    name -> path, or an iterable of paths matched by filename.
    """
    if isinstance(csv_paths, (str, Path)):
        base = Path(csv_paths)
        return {name: base / name for name in inputs}
    if isinstance(csv_paths, Mapping):
        missing = [name for name in inputs if name not in csv_paths]
        if missing:
            raise FigureDataError(f"no path given for required input(s): {', '.join(missing)}")
        return {name: Path(csv_paths[name]) for name in inputs}
    by_name = {Path(p).name: Path(p) for p in csv_paths}
    missing = [name for name in inputs if name not in by_name]
    if missing:
        raise FigureDataError(f"no path given for required input(s): {', '.join(missing)}")
    return {name: by_name[name] for name in inputs}


def render(figure_id: str, csv_paths, out_path) -> Path:
    """Build one figure from CSV inputs and write it to ``out_path``.

    All inputs are loaded and validated (and fig9's energy claims checked)
    before any output file is created, so a failing render leaves nothing
    behind. The output format follows the file extension (SVG recommended;
    SVG output is byte-reproducible).
    """
    if figure_id not in FIGURES:
        known = ", ".join(sorted(FIGURES))
        raise FigureDataError(f"unknown figure id {figure_id!r} (known: {known})")
    spec = FIGURES[figure_id]
    paths = _resolve_paths(csv_paths, spec.inputs)
    data = {name: load_input(name, path) for name, path in paths.items()}
    out_path = Path(out_path)
    with matplotlib.rc_context(_RC):
        fig = spec.builder(data)
        try:
            out_path.parent.mkdir(parents=True, exist_ok=True)
            metadata = {"Date": None} if out_path.suffix.lower() == ".svg" else None
            fig.savefig(out_path, metadata=metadata)
        finally:
            plt.close(fig)
    return out_path


def render_all(out_dir, dest=None, fmt: str = "svg") -> list[Path]:
    """Render every figure whose inputs are all present in ``out_dir``.

    Figures with missing inputs are skipped; the written paths are returned
    in figure-id order.
    """
    out_dir = Path(out_dir)
    dest = Path(dest) if dest is not None else out_dir
    written = []
    for figure_id, spec in FIGURES.items():
        if all((out_dir / name).is_file() for name in spec.inputs):
            written.append(render(figure_id, out_dir, dest / f"{figure_id}.{fmt}"))
    return written
