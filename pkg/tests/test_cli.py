import json
from pathlib import Path

import numpy as np
import pytest

from mfg_habitat import cli
from mfg_habitat.config import ScenarioConfig, config_from_dict, load_config
from mfg_habitat.model import ValidationError


def base_config(**overrides):
    cfg = {
        "regime": "power",
        "market": {"T": 1.0, "delta": 0.1, "x0": 5.0, "z0": 1.0},
        "classes": [{"mu": 0.2, "sigma": 0.2, "risk": 0.3, "theta": 1.0}],
        "grid": {"n_steps": 200},
        "solver": {"tol": 1e-10, "max_iter": 5000, "damping": 0.5},
        "simulation": {"n_values": [8, 16, 32], "replications": 30, "seed": 7},
    }
    cfg.update(overrides)
    return cfg


def write_config(tmp_path, cfg) -> Path:
    p = tmp_path / "config.json"
    p.write_text(json.dumps(cfg))
    return p


def read_csv(path: Path):
    lines = path.read_text().strip().split("\n")
    header = lines[0].split(",")
    return header, [line.split(",") for line in lines[1:]]


class TestConfig:
    def test_valid_roundtrip(self, tmp_path):
        cfg = load_config(write_config(tmp_path, base_config()))
        assert isinstance(cfg, ScenarioConfig)
        assert cfg.n_steps == 200

    def test_malformed_risk_names_field(self):
        bad = base_config()
        bad["classes"][0]["risk"] = 1.2
        with pytest.raises(ValidationError, match=r"class\[0\].risk"):
            config_from_dict(bad)

    def test_missing_required_field(self):
        bad = base_config()
        del bad["market"]["delta"]
        with pytest.raises(ValidationError, match="market.delta"):
            config_from_dict(bad)

    def test_bad_weights(self):
        bad = base_config()
        bad["classes"].append({"mu": 0.2, "sigma": 0.2, "risk": 0.5, "theta": 1.0})
        bad["weights"] = [0.7, 0.7]
        with pytest.raises(ValidationError, match="weights"):
            config_from_dict(bad)

    def test_sweep_param_guard(self):
        cfg = config_from_dict(base_config())
        with pytest.raises(ValidationError, match="sweep.param"):
            cfg.with_swept("sigma", 0.5)


class TestSolveCommand:
    def test_artifacts_and_schema(self, tmp_path):
        cfg = write_config(tmp_path, base_config())
        out = tmp_path / "out"
        assert cli.main(["solve", "--config", str(cfg), "--out", str(out)]) == 0
        header, rows = read_csv(out / "equilibrium.csv")
        assert header[:3] == ["t", "zbar", "xbar_T"]
        assert "pi_star_k1" in header
        assert "c_star_fraction_k1" in header
        assert "spending_rate_k1" in header
        assert "mean_wealth_k1" in header
        assert len(rows) == 201
        for row in rows:
            assert all(np.isfinite(float(v)) for v in row)
        summary = json.loads((out / "summary.json").read_text())
        assert summary["regime"] == "power"
        assert summary["residual"] < 1e-8
        assert {"c0", "c1", "c2", "e_const", "m_T"} <= set(summary["bounds"])

    def test_exponential_schema(self, tmp_path):
        cfg = write_config(tmp_path, base_config(regime="exponential"))
        out = tmp_path / "out"
        assert cli.main(["solve", "--config", str(cfg), "--out", str(out)]) == 0
        header, _ = read_csv(out / "equilibrium.csv")
        assert "mean_consumption" in header
        assert "c_star_at_mean_wealth_k1" in header

    def test_idempotent_bytes(self, tmp_path):
        cfg = write_config(tmp_path, base_config())
        out = tmp_path / "out"
        cli.main(["solve", "--config", str(cfg), "--out", str(out)])
        first = (out / "equilibrium.csv").read_bytes()
        cli.main(["solve", "--config", str(cfg), "--out", str(out)])
        assert (out / "equilibrium.csv").read_bytes() == first

    def test_invalid_config_writes_error_json(self, tmp_path):
        bad = base_config()
        bad["classes"][0]["risk"] = 1.2
        cfg = write_config(tmp_path, bad)
        out = tmp_path / "out"
        code = cli.main(["solve", "--config", str(cfg), "--out", str(out)])
        assert code != 0
        err = json.loads((out / "error.json").read_text())
        assert err["error"] == "ValidationError"
        assert "risk" in err["message"]


class TestConvergeCommand:
    def test_threads_env_fallback_and_seed_override(self, tmp_path, monkeypatch):
        cfg = write_config(tmp_path, base_config())
        out1, out2 = tmp_path / "a", tmp_path / "b"
        monkeypatch.setenv("MFG_HABITAT_THREADS", "3")
        assert cli.main(["converge", "--config", str(cfg), "--out", str(out1)]) == 0
        monkeypatch.delenv("MFG_HABITAT_THREADS")
        assert cli.main(["converge", "--config", str(cfg), "--out", str(out2), "--threads", "2"]) == 0
        # thread count must not affect results
        assert (out1 / "convergence.csv").read_bytes() == (out2 / "convergence.csv").read_bytes()
        # a different seed must
        out3 = tmp_path / "c"
        assert cli.main(["converge", "--config", str(cfg), "--out", str(out3), "--seed", "99"]) == 0
        assert (out3 / "convergence.csv").read_bytes() != (out1 / "convergence.csv").read_bytes()

    def test_rows_and_summary(self, tmp_path):
        cfg = write_config(tmp_path, base_config())
        out = tmp_path / "out"
        assert cli.main(["converge", "--config", str(cfg), "--out", str(out)]) == 0
        header, rows = read_csv(out / "convergence.csv")
        assert header == ["n", "sup_z_mse", "x_mse", "x_gamma_mse", "gap"]
        assert [int(r[0]) for r in rows] == [8, 16, 32]
        summary = json.loads((out / "summary.json").read_text())
        assert np.isfinite(summary["slopes"]["sup_z_mse"]["slope"])

    def test_deterministic_rerun(self, tmp_path):
        cfg = write_config(tmp_path, base_config())
        out = tmp_path / "out"
        cli.main(["converge", "--config", str(cfg), "--out", str(out)])
        first = (out / "convergence.csv").read_bytes()
        cli.main(["converge", "--config", str(cfg), "--out", str(out)])
        assert (out / "convergence.csv").read_bytes() == first


class TestSweepCommand:
    def test_theta_orderings(self, tmp_path):
        cfg = write_config(tmp_path, base_config())
        out = tmp_path / "out"
        code = cli.main([
            "sweep", "--config", str(cfg), "--out", str(out),
            "--param", "theta", "--values", "0.5,0.8,1.0",
        ])
        assert code == 0
        header, rows = read_csv(out / "sweep.csv")
        zt = {}
        for row in rows:
            rec = dict(zip(header, row))
            if float(rec["t"]) == 1.0:
                zt[float(rec["sweep_value"])] = float(rec["zbar"])
        # low initial habit: Z_T increases with the competition weight
        assert zt[0.5] < zt[0.8] < zt[1.0]
        manifest = json.loads((out / "sweep_manifest.json").read_text())
        assert manifest["completed"] == [0.5, 0.8, 1.0]

    def test_partial_failure_reported(self, tmp_path):
        cfg = write_config(tmp_path, base_config())
        out = tmp_path / "out"
        code = cli.main([
            "sweep", "--config", str(cfg), "--out", str(out),
            "--param", "p", "--values", "0.3,1.4",
        ])
        assert code != 0
        manifest = json.loads((out / "sweep_manifest.json").read_text())
        assert manifest["completed"] == [0.3]
        assert "1.4" in str(manifest["failed"])
        # completed leg still present in the CSV
        header, rows = read_csv(out / "sweep.csv")
        assert {float(r[1]) for r in rows} == {0.3}

    def test_unknown_param_rejected(self, tmp_path):
        cfg = write_config(tmp_path, base_config())
        code = cli.main([
            "sweep", "--config", str(cfg), "--out", str(tmp_path / "o"),
            "--param", "theta", "--values", "",
        ])
        assert code != 0


class TestPresetCommand:
    def test_fig1_low_three_equilibria(self, tmp_path):
        out = tmp_path / "fig1"
        assert cli.main(["preset", "fig1-low", "--out", str(out), "--grid", "200"]) == 0
        files = sorted(p.name for p in out.glob("equilibrium_*.csv"))
        assert files == ["equilibrium_p=0.2.csv", "equilibrium_p=0.3.csv", "equilibrium_p=0.5.csv"]
        assert (out / "sweep.csv").exists()
        panels = json.loads((out / "panels.json").read_text())
        assert all({"csv", "x", "kind", "out", "series"} <= set(p) for p in panels["panels"])

    def test_fig4_hetero_two_class_columns(self, tmp_path):
        out = tmp_path / "fig4"
        assert cli.main(["preset", "fig4-hetero", "--out", str(out), "--grid", "200"]) == 0
        header, _ = read_csv(out / "equilibrium.csv")
        assert "spending_rate_k1" in header and "spending_rate_k2" in header

    def test_fig5_terminal_theta_legs(self, tmp_path):
        out = tmp_path / "fig5"
        assert cli.main(["preset", "fig5-highwealth", "--out", str(out), "--grid", "200"]) == 0
        names = {p.name for p in out.glob("equilibrium_*.csv")}
        assert names == {"equilibrium_terminal_theta=1.csv", "equilibrium_terminal_theta=0.csv"}
        # with relative wealth concern, consumption is higher when wealth is high
        h, rows = read_csv(out / "sweep.csv")
        spend = {}
        for row in rows:
            rec = dict(zip(h, row))
            if float(rec["t"]) == 1.0:
                spend[float(rec["sweep_value"])] = float(rec["spending_rate_k1"])
        assert spend[1.0] > spend[0.0]
