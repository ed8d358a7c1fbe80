"""Command-line front end: solve equilibria, run studies, emit CSV/JSON.

Subcommands
    solve    equilibrium.csv + summary.json for one scenario
    converge convergence.csv + summary.json (error decay and deviation gaps)
    sweep    sweep.csv: re-solve over one parameter's value list
    preset   run a named scenario preset (solves each sweep leg, writes
             per-leg equilibrium files, sweep.csv and a panels.json manifest)

All artifacts are deterministic: rerunning with the same configuration and
seed produces byte-identical files.  Exit code 0 means every requested
artifact was written and every solver residual audit passed; on failure an
error.json with the failure type and message is left in the output
directory and the exit code is nonzero.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time
from pathlib import Path

import numpy as np

from . import exponential, power, simulation
from .config import SWEEPABLE, ScenarioConfig, load_config
from .grids import TimeGrid
from .model import Regime, ValidationError
from .presets import PRESETS, preset

RESIDUAL_AUDIT = 1e-8


class CliError(RuntimeError):
    pass


def _write_text(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text, encoding="utf-8")


def _write_json(path: Path, payload: dict) -> None:
    _write_text(path, json.dumps(payload, indent=2, sort_keys=True) + "\n")


def _fmt(x) -> str:
    if isinstance(x, float):
        return repr(x)
    return str(x)


def _write_csv(path: Path, header: list[str], rows) -> None:
    lines = [",".join(header)]
    lines.extend(",".join(_fmt(v) for v in row) for row in rows)
    _write_text(path, "\n".join(lines) + "\n")


# ---------------------------------------------------------------------------
# equilibrium artifacts
# ---------------------------------------------------------------------------

def _solve(cfg: ScenarioConfig):
    grid = TimeGrid(cfg.market.T, cfg.n_steps)
    if cfg.regime == Regime.EXPONENTIAL:
        eq = exponential.solve(
            cfg.distribution, cfg.market, grid, tol=cfg.solver.tol, max_iter=cfg.solver.max_iter
        )
    else:
        eq = power.solve(
            cfg.distribution, cfg.market, grid,
            tol=cfg.solver.tol, max_iter=cfg.solver.max_iter, damping=cfg.solver.damping,
        )
    if eq.residual >= RESIDUAL_AUDIT:
        raise CliError(f"solver residual audit failed: {eq.residual:.3e} >= {RESIDUAL_AUDIT}")
    return grid, eq


def _equilibrium_table(cfg: ScenarioConfig, grid: TimeGrid, eq) -> tuple[list[str], list[list]]:
    K = cfg.distribution.n_classes
    t = grid.nodes
    if cfg.regime == Regime.EXPONENTIAL:
        zvals = eq.zbar.values
        mean_c = exponential.mean_consumption_path(cfg.distribution, cfg.market, grid, zvals, eq.xbar_T)
        cols = {"t": t, "zbar": zvals, "xbar_T": np.full_like(t, eq.xbar_T), "mean_consumption": mean_c}
        for k, cls in enumerate(cfg.distribution.classes, start=1):
            cols[f"pi_star_k{k}"] = cls.risk * cls.mu / cls.sigma**2 * (grid.T + 1.0 - t)
            f = exponential.mean_wealth_path(cls, cfg.market, grid, zvals, eq.xbar_T)
            cols[f"c_star_at_mean_wealth_k{k}"] = exponential.consumption_at(
                cls, cfg.market, grid, zvals, eq.xbar_T, f
            )
    else:
        cp = power.class_paths(eq, cfg.distribution, cfg.market)
        cols = {"t": t, "zbar": eq.zbar.values, "xbar_T": np.full_like(t, eq.xbar_T)}
        for k in range(1, K + 1):
            cols[f"pi_star_k{k}"] = np.full_like(t, cp.pi_star[k - 1])
            cols[f"c_star_fraction_k{k}"] = cp.c_frac[k - 1]
            cols[f"spending_rate_k{k}"] = cp.c_frac[k - 1] * cp.mean_wealth[k - 1]
            cols[f"mean_wealth_k{k}"] = cp.mean_wealth[k - 1]
    header = list(cols)
    rows = [[float(cols[h][j]) for h in header] for j in range(grid.n_nodes)]
    return header, rows


def _summary(cfg: ScenarioConfig, eq, runtime: float, extra: dict | None = None) -> dict:
    out = {
        "regime": cfg.regime,
        "n_steps": cfg.n_steps,
        "xbar_T": eq.xbar_T,
        "residual": eq.residual,
        "iterations": eq.iterations,
        "runtime_s": round(runtime, 3),
    }
    if cfg.regime == Regime.POWER:
        b = eq.bounds
        out["bounds"] = {
            "c0": b.c0, "c1": b.c1, "c2": b.c2,
            "e_const": b.e_const, "m_T": float(b.m_path.values[-1]),
        }
    if extra:
        out.update(extra)
    return out


def run_solve(cfg: ScenarioConfig, out_dir: Path, tag: str = "") -> dict:
    """Solve one scenario; write equilibrium[_tag].csv and summary JSON."""
    t0 = time.perf_counter()
    grid, eq = _solve(cfg)
    header, rows = _equilibrium_table(cfg, grid, eq)
    suffix = f"_{tag}" if tag else ""
    _write_csv(out_dir / f"equilibrium{suffix}.csv", header, rows)
    summary = _summary(cfg, eq, time.perf_counter() - t0, {"tag": tag} if tag else None)
    _write_json(out_dir / f"summary{suffix}.json", summary)
    return summary


def run_convergence(cfg: ScenarioConfig, out_dir: Path, threads: int = 1) -> dict:
    """Convergence-rate study plus the deviation-gap probe; one CSV row per n."""
    t0 = time.perf_counter()
    grid, eq = _solve(cfg)
    rep = simulation.convergence_study(
        cfg.regime, cfg.distribution, cfg.market, grid,
        cfg.simulation.n_values, cfg.simulation.replications, cfg.simulation.seed,
        threads=threads, include_gaps=True, eq=eq,
    )
    header = ["n", "sup_z_mse", "x_mse"]
    if rep.x_gamma_mse is not None:
        header.append("x_gamma_mse")
    header.append("gap")
    rows = []
    for i, n in enumerate(rep.n_values):
        row = [n, rep.sup_z_mse[i], rep.x_mse[i]]
        if rep.x_gamma_mse is not None:
            row.append(rep.x_gamma_mse[i])
        row.append(rep.gap_estimates[i])
        rows.append(row)
    _write_csv(out_dir / "convergence.csv", header, rows)
    summary = {
        "regime": cfg.regime,
        "n_values": list(rep.n_values),
        "replications": cfg.simulation.replications,
        "seed": cfg.simulation.seed,
        "exact_match": rep.exact_match,
        "slopes": {"sup_z_mse": {"slope": rep.slope, "stderr": rep.slope_stderr}, **rep.extra_slopes},
        "gaps": rep.gap_estimates,
        "runtime_s": round(time.perf_counter() - t0, 3),
    }
    _write_json(out_dir / "summary.json", summary)
    return summary


def run_sensitivity(cfg: ScenarioConfig, param: str, values, out_dir: Path, allow_internal=False) -> dict:
    """Re-solve per sweep value; stacked long-format sweep.csv keyed by value.

    Per-value failures are recorded in the manifest and do not abort the
    remaining legs; the exit status reflects any failure.
    """
    allowed = SWEEPABLE if not allow_internal else None
    if allowed is not None and param not in allowed:
        raise ValidationError(f"sweep.param: must be one of {SWEEPABLE}, got {param!r}")
    header_out: list[str] | None = None
    rows_out: list[list] = []
    manifest = {"param": param, "values": list(values), "completed": [], "failed": {}}
    summaries = {}
    for value in values:
        leg = cfg.with_swept(param, value)
        try:
            leg.validate()
            grid, eq = _solve(leg)
        except Exception as exc:  # per-leg isolation
            manifest["failed"][repr(value)] = f"{type(exc).__name__}: {exc}"
            continue
        header, rows = _equilibrium_table(leg, grid, eq)
        if header_out is None:
            header_out = ["sweep_param", "sweep_value", *header]
        for row in rows:
            rows_out.append([param, float(value), *row])
        manifest["completed"].append(value)
        summaries[repr(value)] = _summary(leg, eq, 0.0)
    if header_out is not None:
        _write_csv(out_dir / "sweep.csv", header_out, rows_out)
    manifest["summaries"] = summaries
    _write_json(out_dir / "sweep_manifest.json", manifest)
    if manifest["failed"]:
        raise CliError(f"sweep legs failed: {sorted(manifest['failed'])}")
    return manifest


def _panels_manifest(cfg: ScenarioConfig, name: str, swept: bool) -> dict:
    """Default figure panels for a preset run, consumed by the renderer."""
    csv = "sweep.csv" if swept else "equilibrium.csv"
    group = {"group_by": "sweep_value"} if swept else {}
    K = cfg.distribution.n_classes
    if cfg.regime == Regime.EXPONENTIAL:
        spend_cols = [{"column": "mean_consumption", "label": "mean consumption"}]
        pi_cols = [{"column": f"pi_star_k{k}", "label": f"class {k}"} for k in range(1, K + 1)]
    else:
        spend_cols = [
            {"column": f"spending_rate_k{k}", "label": f"class {k} spending"} for k in range(1, K + 1)
        ]
        pi_cols = [{"column": f"pi_star_k{k}", "label": f"class {k}"} for k in range(1, K + 1)]
    panels = [
        {"csv": csv, "x": "t", "kind": "timeseries", "out": f"{name}-consumption.svg",
         "title": f"{name}: consumption", "series": spend_cols, **group},
        {"csv": csv, "x": "t", "kind": "timeseries", "out": f"{name}-portfolio.svg",
         "title": f"{name}: portfolio", "series": pi_cols, **group},
        {"csv": csv, "x": "t", "kind": "timeseries", "out": f"{name}-habit.svg",
         "title": f"{name}: habit path", "series": [{"column": "zbar", "label": "mean habit"}],
         "hlines": [{"column": "xbar_T", "label": "terminal wealth"}], **group},
    ]
    return {"panels": panels}


def run_preset(name: str, cfg_overrides: dict, out_dir: Path) -> dict:
    p = preset(name)
    cfg = p.base.with_overrides(**cfg_overrides)
    cfg.validate()
    result: dict = {"preset": name}
    if p.sweep_param is None:
        result["solve"] = run_solve(cfg, out_dir)
    else:
        for value in p.sweep_values:
            leg = cfg.with_swept(p.sweep_param, value)
            tag = f"{p.sweep_param}={value:g}"
            result[tag] = run_solve(leg, out_dir, tag=tag)
        result["sweep"] = run_sensitivity(cfg, p.sweep_param, p.sweep_values, out_dir, allow_internal=True)
    _write_json(out_dir / "panels.json", _panels_manifest(cfg, name, p.sweep_param is not None))
    return result


# ---------------------------------------------------------------------------
# argument handling
# ---------------------------------------------------------------------------

def _add_common(sp: argparse.ArgumentParser) -> None:
    sp.add_argument("--config", type=Path, help="scenario config JSON")
    sp.add_argument("--out", type=Path, help="output directory (overrides config)")
    sp.add_argument("--seed", type=int, help="simulation seed override")
    sp.add_argument("--grid", type=int, help="time grid steps override")
    sp.add_argument("--threads", type=int, help="worker threads (or MFG_HABITAT_THREADS)")


def _resolve(args) -> tuple[ScenarioConfig, Path, int]:
    if args.config is None:
        raise ValidationError("config: --config PATH is required for this command")
    cfg = load_config(args.config)
    if args.grid is not None:
        cfg = cfg.with_overrides(n_steps=args.grid)
    if args.seed is not None:
        from dataclasses import replace

        cfg = cfg.with_overrides(simulation=replace(cfg.simulation, seed=args.seed))
    cfg.validate()
    out_dir = Path(args.out) if args.out is not None else Path(cfg.outputs)
    threads = args.threads if args.threads is not None else int(os.environ.get("MFG_HABITAT_THREADS", "1"))
    return cfg, out_dir, max(1, threads)


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="mfg-habitat", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    for cmd in ("solve", "converge", "sweep"):
        sp = sub.add_parser(cmd)
        _add_common(sp)
        if cmd == "sweep":
            sp.add_argument("--param", required=True, choices=SWEEPABLE)
            sp.add_argument("--values", required=True, help="comma-separated value list")
    sp = sub.add_parser("preset")
    sp.add_argument("name", choices=sorted(PRESETS))
    _add_common(sp)

    args = parser.parse_args(argv)
    out_dir = Path(args.out) if args.out is not None else None
    try:
        if args.command == "preset":
            p = preset(args.name)
            overrides = {"n_steps": args.grid}
            out_dir = out_dir or Path(p.base.outputs) / args.name
            run_preset(args.name, overrides, out_dir)
        else:
            cfg, out_dir, threads = _resolve(args)
            if args.command == "solve":
                run_solve(cfg, out_dir)
            elif args.command == "converge":
                run_convergence(cfg, out_dir, threads=threads)
            else:
                values = [float(v) for v in args.values.split(",") if v]
                if not values:
                    raise ValidationError("sweep.values: empty value list")
                run_sensitivity(cfg, args.param, values, out_dir)
    except Exception as exc:
        payload = {"error": type(exc).__name__, "message": str(exc)}
        try:
            _write_json((out_dir or Path(".")) / "error.json", payload)
        except OSError:
            pass
        print(f"error: {payload['error']}: {payload['message']}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
