"""plotviz command line: render every report file in a directory."""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .render import render_box, render_curves, render_win_heatmap
from .schemas import SchemaError


def _round_tag(stem: str) -> int | None:
    tail = stem.rsplit("_", 1)[-1]
    return int(tail) if tail.isdigit() else None


def render_reports(reports_dir, out_dir, rounds=None, fmt="svg") -> list[Path]:
    reports_dir = Path(reports_dir)
    out_dir = Path(out_dir)
    written = []

    def wanted(stem):
        return rounds is None or _round_tag(stem) in rounds

    for path in sorted(reports_dir.glob("win_matrix_*.json")):
        if wanted(path.stem):
            tag = path.stem.removeprefix("win_matrix_")
            out = out_dir / f"win_heatmap_{tag}.{fmt}"
            render_win_heatmap(path, out)
            written.append(out)
    for path in sorted(reports_dir.glob("gains_*.csv")):
        if wanted(path.stem):
            tag = path.stem.removeprefix("gains_")
            for filtered, prefix in [(False, "box"), (True, "box_filtered")]:
                out = out_dir / f"{prefix}_{tag}.{fmt}"
                render_box(path, filtered, out)
                written.append(out)
    for path in sorted(reports_dir.glob("curves_*.csv")):
        tag = path.stem.removeprefix("curves_")
        out = out_dir / f"curves_{tag}.{fmt}"
        render_curves(path, out)
        written.append(out)
    return written


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="plotviz",
        description="Render benchmark report files to figures",
    )
    parser.add_argument("reports_dir", help="directory holding the report files")
    parser.add_argument("--out", required=True, help="figure output directory")
    parser.add_argument("--rounds", type=int, nargs="*", default=None,
                        help="only render round-tagged files for these rounds")
    parser.add_argument("--format", choices=["svg", "png"], default="svg")
    args = parser.parse_args(argv)

    reports_dir = Path(args.reports_dir)
    if not reports_dir.is_dir():
        print(f"error: {reports_dir} is not a directory", file=sys.stderr)
        return 1
    try:
        written = render_reports(reports_dir, args.out, args.rounds, args.format)
    except SchemaError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    if not written:
        print("warning: no report files found", file=sys.stderr)
    for path in written:
        print(path)
    return 0


if __name__ == "__main__":
    sys.exit(main())
