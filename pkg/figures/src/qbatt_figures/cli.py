"""qbatt-plot: render figure analogues from simulation output files."""

from __future__ import annotations

import argparse
import sys

from .io import SchemaMismatch
from .plots import RENDERERS, render


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="qbatt-plot",
        description="Render static figures from qbatt CSV/JSON outputs",
    )
    parser.add_argument("--fig", required=True,
                        help=f"figure id or 'all' ({', '.join(sorted(RENDERERS))})")
    parser.add_argument("--in", dest="in_dir", required=True,
                        help="directory holding the simulation outputs")
    parser.add_argument("--out", dest="out_dir", required=True,
                        help="directory for the rendered images")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    ids = sorted(RENDERERS) if args.fig == "all" else [args.fig]
    try:
        for figure_id in ids:
            path = render(figure_id, args.in_dir, args.out_dir)
            print(path)
    except SchemaMismatch as exc:
        print(f"schema error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:   # noqa: BLE001 - CLI boundary
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
