"""Command-line interface: every experiment as a subcommand emitting CSV.

Exit codes: 0 success, 1 configuration/validation error, 2 integration
failure. All artifacts land in the configured output directory next to a
``manifest.json`` recording the config echo, library versions and wall time.
"""

from __future__ import annotations

import argparse
import dataclasses
import sys
import time
from pathlib import Path

import numpy as np

from .config import RunConfig, format_float, write_csv, write_manifest
from .errors import ConfigError, IntegrationFailure
from .harness import consistency_experiment, energy_experiment, mf_error_curve, run_mc_study
from .kinetic import integrate_moment_ode, integrate_pde_coupled
from .metrics import dobrushin_check, dobrushin_constants
from .micro import energy_micro, integrate_micro
from .model import Gaussian, sample_measure, stream

__all__ = ["main"]


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="partkin",
        description="Simulate a macroscopic oscillator coupled to a kinetic particle bath.",
    )
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="path to a key = value config file")
    common.add_argument(
        "--set",
        action="append",
        default=[],
        metavar="KEY=VALUE",
        help="override a config key (repeatable)",
    )
    common.add_argument("--out-dir", help="output directory (overrides config)")

    sub = parser.add_subparsers(dest="command")
    micro = sub.add_parser("simulate-micro", parents=[common], help="constrained particle run")
    micro.add_argument(
        "--dump-ensemble",
        action="store_true",
        help="also write the full particle ensemble as a wide CSV",
    )
    sub.add_parser("simulate-moment", parents=[common], help="closed first-moment ODE run")
    sub.add_parser("simulate-pde", parents=[common], help="upwind transport run")
    mc = sub.add_parser("mc-study", parents=[common], help="Monte-Carlo scaling study")
    mc.add_argument("--threads", type=int, default=1, help="worker processes (default 1)")
    dob = sub.add_parser("dobrushin", parents=[common], help="stability-estimate check")
    dob.add_argument("--perturb-r", type=float, default=0.1, help="shift of r_in (default 0.1)")
    dob.add_argument("--perturb-s", type=float, default=0.0, help="shift of s_in")
    dob.add_argument("--perturb-mean", type=float, default=0.0, help="shift of the initial mean")
    sub.add_parser("energy", parents=[common], help="three-solver energy comparison")
    cons = sub.add_parser("consistency", parents=[common], help="empirical-data exactness check")
    cons.add_argument("--n-seeds", type=int, default=10, help="number of seeds (default 10)")
    sub.add_parser("validate-config", parents=[common], help="check a config and exit")
    return parser


def _load_config(args) -> RunConfig:
    if args.config is not None:
        path = Path(args.config)
        if not path.exists():
            raise ConfigError(f"config file not found: {path}")
        cfg = RunConfig.from_file(path, args.set)
    else:
        cfg = RunConfig().with_overrides(args.set)
    if args.out_dir is not None:
        cfg = dataclasses.replace(cfg, out_dir=args.out_dir)
    cfg.validate()
    return cfg


def _scalar(series: np.ndarray, i: int) -> float:
    return float(np.ravel(series[i])[0])


def _cmd_simulate_micro(args, cfg: RunConfig, out_dir: Path) -> list[str]:
    p = cfg.to_model_params()
    mu = cfg.initial_measure()
    q_in = sample_measure(mu, cfg.N, stream(cfg.seed, cfg.N, 0))
    traj = integrate_micro(
        p,
        cfg.r_in,
        cfg.s_in,
        q_in,
        cfg.t_end,
        tol=cfg.solver_tol,
        n_out=cfg.solver_n_out,
        max_step=cfg.solver_max_step,
    )
    report = energy_micro(p, traj)
    rows = []
    for i in range(len(traj.times)):
        ensemble = traj.Q[i, :, 0]
        q_var = float(ensemble.var(ddof=1)) if p.N > 1 else 0.0
        rows.append(
            (
                traj.times[i],
                _scalar(traj.r, i),
                _scalar(traj.s, i),
                float(ensemble.mean()),
                q_var,
                float(traj.res_ind3[i]),
                float(traj.res_ind2[i]),
                float(report.T_r[i]),
                float(report.T_q[i]),
                float(report.U_r[i]),
                float(report.U_q[i]),
                float(report.E_total[i]),
            )
        )
    write_csv(
        out_dir / "micro_trajectory.csv",
        ["t", "r", "s", "Qmean", "Qvar", "res_ind3", "res_ind2", "T_r", "T_q", "U_r", "U_q", "E_total"],
        rows,
    )
    outputs = ["micro_trajectory.csv"]
    if args.dump_ensemble:
        header = ["t"] + [f"Q_{j + 1}" for j in range(p.N)]
        wide = [
            (traj.times[i], *(float(q) for q in traj.Q[i, :, 0])) for i in range(len(traj.times))
        ]
        write_csv(out_dir / "micro_ensemble.csv", header, wide)
        outputs.append("micro_ensemble.csv")
    print(f"micro run done: relative energy drift {report.relative_drift:.3e}")
    return outputs


def _kinetic_rows(traj):
    report = traj.energies
    rows = []
    for i in range(len(traj.times)):
        rows.append(
            (
                traj.times[i],
                _scalar(traj.r, i),
                _scalar(traj.s, i),
                _scalar(traj.m1, i),
                float(traj.m2[i]),
                float(report.T_r[i]),
                float(report.T_q[i]),
                float(report.U_r[i]),
                float(report.U_q[i]),
                float(report.E_total[i]),
                float(traj.mass[i]),
            )
        )
    return rows


_KINETIC_HEADER = ["t", "r", "s", "m1", "m2", "T_r", "T_q", "U_r", "U_q", "E_total", "mass"]


def _cmd_simulate_moment(args, cfg: RunConfig, out_dir: Path) -> list[str]:
    p = cfg.to_model_params()
    traj = integrate_moment_ode(
        p, cfg.r_in, cfg.s_in, cfg.initial_measure(), cfg.t_end, tol=cfg.solver_tol, n_out=cfg.solver_n_out
    )
    write_csv(out_dir / "moment_trajectory.csv", _KINETIC_HEADER, _kinetic_rows(traj))
    print(f"moment run done: energy drift {traj.energies.relative_drift:.3e}")
    return ["moment_trajectory.csv"]


def _cmd_simulate_pde(args, cfg: RunConfig, out_dir: Path) -> list[str]:
    p = cfg.to_model_params()
    traj = integrate_pde_coupled(
        p,
        cfg.r_in,
        cfg.s_in,
        cfg.initial_grid_density(),
        cfg.t_end,
        tol=cfg.solver_tol,
        n_out=cfg.solver_n_out,
    )
    write_csv(out_dir / "pde_trajectory.csv", _KINETIC_HEADER, _kinetic_rows(traj))
    density_rows = []
    for i, snap in enumerate(traj.snapshots):
        t = traj.times[i]
        for q, u in zip(snap.grid, snap.values):
            density_rows.append((t, float(q), float(u)))
    write_csv(out_dir / "density.csv", ["t", "q", "u"], density_rows)
    final = traj.snapshots[-1]
    write_csv(
        out_dir / "density_final.csv",
        ["q", "u"],
        [(float(q), float(u)) for q, u in zip(final.grid, final.values)],
    )
    for message in traj.warnings:
        print(f"warning: {message}", file=sys.stderr)
    print(f"pde run done: final mass {traj.mass[-1]:.6f}")
    return ["pde_trajectory.csv", "density.csv", "density_final.csv"]


def _cmd_mc_study(args, cfg: RunConfig, out_dir: Path) -> list[str]:
    p = cfg.to_model_params()
    study = run_mc_study(
        p,
        cfg.initial_measure(),
        cfg.r_in,
        cfg.s_in,
        cfg.t_end,
        cfg.mc_N_values,
        cfg.mc_n_samples,
        cfg.seed,
        tol=cfg.solver_tol,
        n_out=cfg.solver_n_out,
        threads=args.threads,
    )
    curve = mf_error_curve(study)
    contrib = study.slope_contrib
    summary_rows = [
        (N, float(study.max_var[i]), float(study.sup_mf_error[i]), float(contrib[i]))
        for i, N in enumerate(study.N_values)
    ]
    write_csv(out_dir / "mc_summary.csv", ["N", "max_var", "sup_mf_error", "slope_contrib"], summary_rows)

    traj_rows = []
    for i, N in enumerate(study.N_values):
        samples = study.r_samples[i]
        for k in range(study.n_samples):
            for j, t in enumerate(study.times):
                traj_rows.append((N, k, float(t), float(samples[k, j, 0])))
    write_csv(out_dir / "mc_trajectories.csv", ["N", "sample", "t", "r"], traj_rows)
    print(
        f"mc study done: slope {study.slope:.4f}, spearman {curve.spearman:.4f}, "
        f"errors {format_float(curve.sup_error[0])} -> {format_float(curve.sup_error[-1])}"
    )
    return ["mc_summary.csv", "mc_trajectories.csv"]


def _cmd_dobrushin(args, cfg: RunConfig, out_dir: Path) -> list[str]:
    p = cfg.to_model_params()
    mu1 = cfg.initial_measure()
    mu2 = Gaussian(mean=cfg.mu_in_mean + args.perturb_mean, var=cfg.mu_in_var)
    init1 = (cfg.r_in, cfg.s_in, mu1)
    init2 = (cfg.r_in + args.perturb_r, cfg.s_in + args.perturb_s, mu2)
    t_grid = np.linspace(0.0, cfg.t_end, cfg.solver_n_out)
    check = dobrushin_check(p, init1, init2, t_grid)
    constants = dobrushin_constants(p)
    rows = [
        (float(check.times[i]), float(check.lhs[i]), float(check.rhs[i]), float(check.margin[i]))
        for i in range(len(check.times))
    ]
    write_csv(out_dir / "dobrushin.csv", ["t", "lhs", "rhs", "margin"], rows)
    print(
        f"dobrushin check done: L={constants.L:.6f} C={constants.C:.6f} "
        f"satisfied={check.satisfied}"
    )
    return ["dobrushin.csv"]


def _cmd_energy(args, cfg: RunConfig, out_dir: Path) -> list[str]:
    p = cfg.to_model_params()
    result = energy_experiment(
        p,
        cfg.initial_measure(),
        cfg.r_in,
        cfg.s_in,
        cfg.t_end,
        cfg.seed,
        grid_lo=cfg.grid_lo,
        grid_hi=cfg.grid_hi,
        grid_n_pts=cfg.grid_n_pts,
        tol=cfg.solver_tol,
        n_out=cfg.solver_n_out,
    )
    reports = {
        "energy_micro.csv": energy_micro(p, result.micro),
        "energy_moment.csv": result.moment.energies,
        "energy_pde.csv": result.pde.energies,
    }
    header = ["t", "T_r", "T_q", "U_r", "U_q", "E_total"]
    for name, report in reports.items():
        rows = [
            (
                float(report.times[i]),
                float(report.T_r[i]),
                float(report.T_q[i]),
                float(report.U_r[i]),
                float(report.U_q[i]),
                float(report.E_total[i]),
            )
            for i in range(len(report.times))
        ]
        write_csv(out_dir / name, header, rows)
    for name, density in (
        ("density_initial.csv", result.initial_density),
        ("density_final.csv", result.final_density),
    ):
        write_csv(
            out_dir / name,
            ["q", "u"],
            [(float(q), float(u)) for q, u in zip(density.grid, density.values)],
        )
    micro_drift = reports["energy_micro.csv"].relative_drift
    pde_growth = float(reports["energy_pde.csv"].E_total[-1] - reports["energy_pde.csv"].E_total[0])
    print(f"energy experiment done: micro drift {micro_drift:.3e}, pde growth {pde_growth:.4f}")
    return list(reports) + ["density_initial.csv", "density_final.csv"]


def _cmd_consistency(args, cfg: RunConfig, out_dir: Path) -> list[str]:
    p = cfg.to_model_params()
    mu = cfg.initial_measure()
    rows = []
    worst = 0.0
    for offset in range(args.n_seeds):
        seed = cfg.seed + offset
        result = consistency_experiment(
            p, mu, cfg.r_in, cfg.s_in, cfg.t_end, seed, n_out=cfg.solver_n_out
        )
        rows.append((seed, result.deviation, result.mismatch))
        worst = max(worst, result.deviation)
    write_csv(out_dir / "consistency.csv", ["seed", "deviation", "mismatch"], rows)
    print(f"consistency done: max deviation {worst:.3e} over {args.n_seeds} seeds")
    return ["consistency.csv"]


_COMMANDS = {
    "simulate-micro": _cmd_simulate_micro,
    "simulate-moment": _cmd_simulate_moment,
    "simulate-pde": _cmd_simulate_pde,
    "mc-study": _cmd_mc_study,
    "dobrushin": _cmd_dobrushin,
    "energy": _cmd_energy,
    "consistency": _cmd_consistency,
}


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    if args.command is None:
        parser.print_usage(sys.stderr)
        print("error: a subcommand is required", file=sys.stderr)
        return 1
    try:
        cfg = _load_config(args)
        if args.command == "validate-config":
            print("config OK")
            return 0
        out_dir = Path(cfg.out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        start = time.perf_counter()
        outputs = _COMMANDS[args.command](args, cfg, out_dir)
        wall = time.perf_counter() - start
        write_manifest(out_dir, args.command, cfg, wall, outputs, overrides=args.set)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except IntegrationFailure as exc:
        print(f"integration failure: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
