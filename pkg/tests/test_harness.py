import csv
import json
import math
import subprocess
import sys

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qconsensus import complete_graph
from qconsensus.harness import (
    AVERAGE_COLUMNS,
    RATES_COLUMNS,
    SWEEP_COLUMNS,
    ConfigError,
    ExperimentConfig,
    desk_sweep_config,
    fmt,
    main,
)


def write_config(tmp_path, cfg):
    path = tmp_path / "config.json"
    path.write_text(json.dumps(cfg))
    return str(path)


def pair_config():
    edges = [list(e) for e in complete_graph(2).edges]
    return {
        "graph": {"m": 2, "edges": edges},
        "signal": {"sigma_x2": 0.5, "sigma_n2": 0.5, "L": 200},
        "T": 1,
        "model": {"family": "vq_proxy"},
        "optimizer": {"mode": "variable", "mse_targets": [0.05]},
        "simulation": {"trials": 3, "quantizer_kind": "gaussian_noise_proxy", "seed": 3},
    }


def small_config(**over):
    cfg = {
        "graph": {"m": 8, "rho_c": 0.5, "seed": 2},
        "signal": {"sigma_x2": 1.0, "sigma_n2": 0.5, "L": 200},
        "T": 3,
        "optimizer": {"mode": "auto", "from-emse": [1.0, 3.0]},
        "simulation": {"trials": 4, "quantizer_kind": "dithered_uniform", "seed": 5},
        "sweep": {"n_graphs": 2, "rho_c": [0.5]},
    }
    cfg.update(over)
    return cfg


def read_csv(path):
    with open(path) as f:
        return list(csv.reader(f))


def test_fmt():
    assert fmt(3) == "3"
    assert fmt(np.int64(4)) == "4"
    assert fmt(1 / 3) == "0.333333333"
    assert fmt(np.float64(2.5e-12)) == "2.5e-12"
    assert fmt("ok") == "ok"


def test_config_round_trip():
    cfg = desk_sweep_config()
    again = ExperimentConfig.from_dict(json.loads(json.dumps(cfg.to_dict())))
    assert again.to_dict() == cfg.to_dict()
    with open("configs/desk_sweep.json") as f:
        assert ExperimentConfig.from_dict(json.load(f)).to_dict() == cfg.to_dict()


@given(
    st.integers(2, 60),
    st.floats(0.05, 0.8),
    st.integers(0, 10**6),
    st.floats(0.1, 10),
    st.floats(0.01, 5),
    st.integers(1, 12),
    st.sampled_from(["auto", "variable", "constant"]),
    st.lists(st.floats(0.1, 20), max_size=4),
    st.sampled_from(["gaussian_noise_proxy", "dithered_uniform", "ecsq_uniform", "fixed_uniform"]),
)
@settings(max_examples=60)
def test_config_round_trip_property(m, rho, seed, sx, sn, T, mode, emse_db, kind):
    d = {
        "graph": {"m": m, "rho_c": rho, "seed": seed},
        "signal": {"sigma_x2": sx, "sigma_n2": sn},
        "T": T,
        "optimizer": {"mode": mode, "from-emse": emse_db},
        "simulation": {"quantizer_kind": kind},
    }
    once = ExperimentConfig.from_dict(d).to_dict()
    assert ExperimentConfig.from_dict(json.loads(json.dumps(once))).to_dict() == once


def test_snr_db_convention():
    cfg = ExperimentConfig.from_dict({"signal": {"sigma_x2": 1.0, "snr_db": 10 * math.log10(2)}})
    assert cfg.signal.sigma_n2 == pytest.approx(0.5)
    assert cfg.signal.snr_db == pytest.approx(3.0103, abs=1e-4)


@pytest.mark.parametrize(
    "bad,path",
    [
        ({"graph": {"m": -3, "rho_c": 0.3}}, "graph.m"),
        ({"graph": {"m": 5, "rho_c": -0.2}}, "graph.rho_c"),
        ({"graph": {"m": 3, "edges": [[0, 1, 2]]}}, "graph.edges"),
        ({"signal": {"sigma_n2": "x"}}, "signal.sigma_n2"),
        ({"T": 0}, "T"),
        ({"optimizer": {"mode": "fast"}}, "optimizer.mode"),
        ({"optimizer": {"from-emse": [1, -2]}}, "optimizer.from-emse"),
        ({"simulation": {"quantizer_kind": "lattice"}}, "simulation.quantizer_kind"),
        ({"model": {"family": "turbo"}}, "model"),
        ({"colour": 1}, "colour"),
    ],
)
def test_config_errors_name_the_field(bad, path):
    with pytest.raises(ConfigError) as info:
        ExperimentConfig.from_dict(bad)
    assert path in str(info.value)


def test_bad_config_exits_2(tmp_path, capsys):
    cfg = write_config(tmp_path, {"graph": {"m": 0, "rho_c": 0.3}})
    assert main(["--config", cfg, "--out", str(tmp_path / "o"), "gen-graph"]) == 2
    assert "graph.m" in capsys.readouterr().err
    (tmp_path / "broken.json").write_text("{not json")
    assert main(["--config", str(tmp_path / "broken.json"), "gen-graph"]) == 2
    assert main(["--config", str(tmp_path / "missing.json"), "gen-graph"]) == 2


def test_gen_graph(tmp_path, capsys):
    out = tmp_path / "o"
    cfg = write_config(tmp_path, {"graph": {"m": 20, "rho_c": 0.35, "seed": 1}})
    assert main(["--config", cfg, "--out", str(out), "gen-graph"]) == 0
    g = json.loads((out / "graph.json").read_text())
    assert g["m"] == 20
    printed = capsys.readouterr().out
    assert "m=20" in printed and "lambda2=" in printed
    cfg = write_config(tmp_path, {"graph": {"m": 12, "rho_c": 0.75, "seed": 4}})
    assert main(["--config", cfg, "--out", str(out), "gen-graph"]) == 0
    assert len(json.loads((out / "graph.json").read_text())["edges"]) == 66


def test_gen_graph_retry_exhaustion_exits_1(tmp_path):
    cfg = write_config(tmp_path, {"graph": {"m": 40, "rho_c": 0.01, "seed": 1, "retries": 2}})
    assert main(["--config", cfg, "--out", str(tmp_path / "o"), "gen-graph"]) == 1


def test_tmin(tmp_path):
    out = tmp_path / "o"
    c = pair_config()
    c["graph"] = {"m": 4, "edges": [list(e) for e in complete_graph(4).edges]}
    assert main(["--config", write_config(tmp_path, c), "--out", str(out), "tmin", "--mse-target", "0.01"]) == 0
    assert json.loads((out / "tmin.json").read_text())[0]["t_min"] == 1
    c["graph"] = {"m": 3, "edges": [[0, 1], [1, 2]]}
    c["signal"] = {"sigma_x2": 1.0, "sigma_n2": 0.5}
    assert main(["--config", write_config(tmp_path, c), "--out", str(out), "tmin", "--mse-target", "0.01"]) == 0
    rep = json.loads((out / "tmin.json").read_text())[0]
    assert rep["t_min"] == 4
    assert rep["lossless_mse"][1] == pytest.approx(2 / 27)
    assert main(["--config", write_config(tmp_path, c), "--out", str(out), "tmin", "--mse-target", "0.5"]) == 0
    assert json.loads((out / "tmin.json").read_text())[0]["t_min"] == 0


def test_optimize_pair_closed_form(tmp_path):
    out = tmp_path / "o"
    assert main(["--config", write_config(tmp_path, pair_config()), "--out", str(out), "optimize"]) == 0
    rows = read_csv(out / "rates_000.csv")
    assert rows[0] == RATES_COLUMNS
    assert len(rows) == 3
    for r in rows[1:]:
        assert float(r[2]) == pytest.approx(0.5 * math.log2(10), abs=1e-4)
        assert float(r[3]) == pytest.approx(0.1, rel=1e-5)
        assert float(r[4]) == pytest.approx(1.0)
    sol = json.loads((out / "solution_000.json").read_text())
    assert sol["objective_bits"] == pytest.approx(3.3219, abs=1e-3)
    assert "solver_report" in sol


def test_optimize_reports_infeasible_without_aborting(tmp_path):
    out = tmp_path / "o"
    c = small_config()
    c["optimizer"] = {"mse_targets": [1e-12, 0.05]}
    assert main(["--config", write_config(tmp_path, c), "--out", str(out), "optimize"]) == 0
    summary = json.loads((out / "optimize.json").read_text())["targets"]
    assert summary[0]["status"] == "infeasible" and summary[1]["status"].startswith("optimal")
    assert not (out / "solution_000.json").exists()
    assert (out / "solution_001.json").exists()


@pytest.mark.parametrize("constraint", ["network", "max-node", "per-node"])
def test_optimize_cli_overrides(tmp_path, constraint):
    out = tmp_path / "o"
    args = ["--config", write_config(tmp_path, small_config()), "--out", str(out), "optimize",
            "--mode", "constant", "--constraint", constraint, "--mse-target", "0.08", "--tol", "1e-5"]
    assert main(args) == 0
    sol = json.loads((out / "solution_000.json").read_text())
    assert sol["mode"] == "constant"
    assert sol["constraint"] == constraint
    assert np.asarray(sol["d_star"]).shape == (3,)


def test_simulate_writes_outputs(tmp_path):
    out = tmp_path / "o"
    assert main(["--config", write_config(tmp_path, small_config()), "--out", str(out), "simulate"]) == 0
    rows = read_csv(out / "mse_000.csv")
    assert rows[0] == ["t", "predicted_mse", "empirical_mse", "lossless_mse"]
    assert len(rows) == 5
    data = json.loads((out / "simulation_001.json").read_text())
    assert data["simulation"]["trials"] == 4
    assert data["simulation"]["max_average_drift"] <= 1e-10


def test_sweep_csv_shape(tmp_path):
    out = tmp_path / "o"
    assert main(["--config", write_config(tmp_path, small_config()), "--out", str(out), "--threads", "2", "sweep"]) == 0
    rows = read_csv(out / "tradeoff.csv")
    assert rows[0] == SWEEP_COLUMNS
    assert len(rows) == 1 + 2 * 2
    for r in rows[1:]:
        rec = dict(zip(SWEEP_COLUMNS, r))
        assert rec["status"].startswith("ok")
        assert int(rec["T"]) == 3 and rec["quantizer_kind"] == "dithered_uniform"
        assert float(rec["empirical_mse"]) > 0 and int(rec["tmin"]) >= 0
    avg = read_csv(out / "tradeoff_avg.csv")
    assert avg[0] == AVERAGE_COLUMNS and len(avg) == 3
    assert json.loads((out / "sweep_summary.json").read_text())["ok"] == 4


def test_sweep_empty_targets_gives_header_only(tmp_path):
    out = tmp_path / "o"
    c = small_config(optimizer={"from-emse": []})
    assert main(["--config", write_config(tmp_path, c), "--out", str(out), "sweep"]) == 0
    assert (out / "tradeoff.csv").read_text() == ",".join(SWEEP_COLUMNS) + "\n"


def test_sweep_records_infeasible_rows(tmp_path):
    out = tmp_path / "o"
    c = small_config(optimizer={"mse_targets": [1e-9, 0.1]})
    assert main(["--config", write_config(tmp_path, c), "--out", str(out), "sweep"]) == 0
    status = [r[-1] for r in read_csv(out / "tradeoff.csv")[1:]]
    assert status.count("infeasible") == 2
    avg = [dict(zip(AVERAGE_COLUMNS, r)) for r in read_csv(out / "tradeoff_avg.csv")[1:]]
    assert [a["n_failed"] for a in avg] == ["2", "0"]
    assert avg[0]["predicted_Ragg"] == "nan"


def test_reruns_are_byte_identical(tmp_path):
    cfg = write_config(tmp_path, small_config())
    for name in ("a", "b"):
        assert main(["--config", cfg, "--out", str(tmp_path / name), "sweep"]) == 0
        assert main(["--config", cfg, "--out", str(tmp_path / name), "simulate"]) == 0
    files = sorted(p.name for p in (tmp_path / "a").iterdir())
    assert files == sorted(p.name for p in (tmp_path / "b").iterdir())
    for f in files:
        assert (tmp_path / "a" / f).read_bytes() == (tmp_path / "b" / f).read_bytes()


def test_full_scale_flag():
    cfg = desk_sweep_config()
    cfg.apply_full_scale()
    assert (cfg.sweep.n_graphs, cfg.signal.L, cfg.simulation.trials) == (32, 10000, 1000)


def test_auto_mode_uses_size_threshold():
    cfg = ExperimentConfig.from_dict({"T": 5, "graph": {"m": 20, "rho_c": 0.35}})
    assert cfg.resolve_mode() == "variable"
    cfg.T = 6
    assert cfg.resolve_mode() == "constant"


def test_module_entry_point(tmp_path):
    cfg = write_config(tmp_path, {"graph": {"m": 5, "rho_c": 0.75}})
    proc = subprocess.run([sys.executable, "-m", "qconsensus", "--config", cfg, "--out", str(tmp_path / "o"), "gen-graph"],
                          capture_output=True, text=True)
    assert proc.returncode == 0 and "edges=10" in proc.stdout
