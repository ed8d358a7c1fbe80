"""Cohort-size convergence study for both utility regimes.

Usage:
    python scripts/run_convergence.py [--out results/convergence] \
        [--n 16 64 256 1024 4096] [--replications 64] [--seed 20240801]

Writes one subdirectory per regime with convergence.csv (per-n squared
errors of the empirical habit path and terminal benchmark, plus the
deviation-gap probe) and a summary.json with fitted log-log slopes.
"""

import argparse
import sys
from dataclasses import replace
from pathlib import Path

from mfg_habitat.cli import run_convergence
from mfg_habitat.config import ScenarioConfig, SimulationConfig
from mfg_habitat.model import AgentClass, MarketParams, TypeDistribution


def scenario(regime: str, args) -> ScenarioConfig:
    return ScenarioConfig(
        regime=regime,
        market=MarketParams(T=1.0, delta=0.1, x0=5.0, z0=1.0),
        distribution=TypeDistribution([AgentClass(mu=0.2, sigma=0.2, risk=0.3, theta=1.0)], [1.0]),
        n_steps=args.grid,
        simulation=SimulationConfig(
            n_values=tuple(args.n), replications=args.replications, seed=args.seed
        ),
    )


def main() -> int:
    ap = argparse.ArgumentParser()
    ap.add_argument("--out", type=Path, default=Path("results/convergence"))
    ap.add_argument("--n", type=int, nargs="+", default=[16, 64, 256, 1024, 4096])
    ap.add_argument("--replications", type=int, default=64)
    ap.add_argument("--seed", type=int, default=20240801)
    ap.add_argument("--grid", type=int, default=256)
    ap.add_argument("--threads", type=int, default=1)
    args = ap.parse_args()

    for regime in ("exponential", "power"):
        cfg = scenario(regime, args)
        summary = run_convergence(cfg, args.out / regime, threads=args.threads)
        slopes = summary["slopes"]
        line = ", ".join(f"{k}: {v['slope']:.3f}±{v['stderr']:.3f}" for k, v in slopes.items())
        print(f"{regime}: {line}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
