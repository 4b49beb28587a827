"""Command-line entry point: render figures from a directory of CSV outputs."""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .csvio import FigureDataError
from .figures import FIGURES, render, render_all


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="pkfigures",
        description="Render figures from simulation CSV outputs.",
    )
    parser.add_argument("out_dir", help="directory containing the simulation CSV files")
    parser.add_argument(
        "--figures",
        help="comma-separated figure ids to render (default: all with inputs present)",
    )
    parser.add_argument("--dest", help="directory for the images (default: out_dir)")
    parser.add_argument(
        "--format", default="svg", choices=("svg", "png", "pdf"),
        help="output image format (default svg; svg is byte-reproducible)",
    )
    return parser


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    out_dir = Path(args.out_dir)
    dest = Path(args.dest) if args.dest else out_dir
    try:
        if args.figures:
            written = []
            for figure_id in args.figures.split(","):
                figure_id = figure_id.strip()
                written.append(
                    render(figure_id, out_dir, dest / f"{figure_id}.{args.format}")
                )
        else:
            written = render_all(out_dir, dest=dest, fmt=args.format)
    except FigureDataError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    if not written:
        present = [p.name for p in sorted(out_dir.glob("*.csv"))]
        print(
            "error: no figure has all of its inputs in "
            f"{out_dir} (found: {', '.join(present) if present else 'no CSV files'})",
            file=sys.stderr,
        )
        return 1
    for path in written:
        print(f"wrote {path}")
    skipped = sorted(set(FIGURES) - {p.stem for p in written})
    if not args.figures and skipped:
        print(f"skipped (missing inputs): {', '.join(skipped)}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
