"""Solve every scenario preset and write its CSV/JSON artifacts.

Usage:
    python scripts/reproduce_figures.py [--out results] [--grid 1000]

Each preset lands in <out>/<preset>/ with equilibrium CSVs per sweep leg,
a stacked sweep.csv, summary JSONs and a panels.json manifest for the
figure renderer (see frontend/).
"""

import argparse
import sys
from pathlib import Path

from mfg_habitat.cli import run_preset
from mfg_habitat.presets import PRESETS


def main() -> int:
    ap = argparse.ArgumentParser()
    ap.add_argument("--out", type=Path, default=Path("results"))
    ap.add_argument("--grid", type=int, default=1000)
    ap.add_argument("--only", nargs="*", help="subset of preset names")
    args = ap.parse_args()

    names = args.only or sorted(PRESETS)
    for name in names:
        out = args.out / name
        run_preset(name, {"n_steps": args.grid}, out)
        print(f"{name}: wrote {out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
