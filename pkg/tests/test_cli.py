import csv
import json
import os
import subprocess
import sys
from pathlib import Path

import pytest

from oscitime.cli import (
    SCHEMA_VERSION,
    ConfigError,
    ExperimentConfig,
    build_config,
    load_config,
    main,
    run,
    worker_count,
)
from oscitime.suites import DEFAULT_GRID, DEFAULT_TOLERANCES, table1_report


def _write(tmp_path, text, name="cfg.toml"):
    p = tmp_path / name
    p.write_text(text, encoding="utf-8")
    return p


# -- configuration ---------------------------------------------------------


def test_load_config_roundtrip(tmp_path):
    p = _write(
        tmp_path,
        f"""
schema = {SCHEMA_VERSION}
[run]
suite = "bridge"
dim = 32
seeds = [3, 4]
out = "res"
[grid]
alpha = [0.5]
n_max = 10
[tolerances]
bridge = 1e-9
""",
    )
    cfg = load_config(p)
    assert cfg.suite == "Bridge" and cfg.dim == 32 and cfg.seeds == [3, 4]
    assert cfg.output_dir == "res"
    assert cfg.grid["alpha"] == [0.5] and cfg.grid["m"] == DEFAULT_GRID["m"]
    assert cfg.tolerances["bridge"] == 1e-9 and cfg.tolerances["ccr"] == DEFAULT_TOLERANCES["ccr"]


@pytest.mark.parametrize(
    "text",
    [
        "[run]\ndim = 32\n",  # no schema
        "schema = 2\n",
        "schema = 1\n[extra]\nx = 1\n",
        "schema = 1\n[run]\nbogus = 1\n",
        "schema = 1\n[run]\ndim = 8\n",
        "schema = 1\n[run]\nsuite = \"Nope\"\n",
        "schema = 1\n[grid]\nzeta = [1]\n",
        "schema = 1\n[grid]\nalpha = []\n",
        "schema = 1\n[tolerances]\nccr = -1.0\n",
        "schema = 1\n[tolerances]\nwhatever = 1e-3\n",
        "schema = 1\n[run\n",
    ],
)
def test_bad_configs(tmp_path, text):
    with pytest.raises(ConfigError):
        load_config(_write(tmp_path, text))


def test_missing_config_file(tmp_path):
    with pytest.raises(ConfigError):
        load_config(tmp_path / "nope.toml")


def test_flags_override_file(tmp_path):
    p = _write(tmp_path, "schema = 1\n[run]\ndim = 32\nseeds = [1]\n")
    from oscitime.cli import _parser

    args = _parser().parse_args(["verify", "--config", str(p), "--dim", "48", "--seed", "5", "--seed", "6", "--suite", "ccr", "--tol", "1e-7"])
    cfg = build_config(args)
    assert cfg.dim == 48 and cfg.seeds == [5, 6] and cfg.suite == "Ccr"
    assert cfg.tolerances["ccr"] == 1e-7


def test_subcommand_fixes_suite():
    from oscitime.cli import _parser

    args = _parser().parse_args(["bridge", "--tol", "1e-6"])
    cfg = build_config(args)
    assert cfg.suite == "Bridge" and cfg.tolerances["bridge"] == 1e-6
    with pytest.raises(ConfigError):
        build_config(_parser().parse_args(["bridge", "--suite", "Ccr"]))


def test_worker_count_env(monkeypatch):
    monkeypatch.setenv("OSCITIME_THREADS", "1")
    assert worker_count() == 1
    monkeypatch.setenv("OSCITIME_THREADS", "100000")
    assert worker_count() == (os.cpu_count() or 1)
    monkeypatch.delenv("OSCITIME_THREADS")
    assert worker_count() == (os.cpu_count() or 1)
    for bad in ("0", "x"):
        monkeypatch.setenv("OSCITIME_THREADS", bad)
        with pytest.raises(ConfigError):
            worker_count()


def test_validate_rejects_empty_seeds():
    with pytest.raises(ConfigError):
        ExperimentConfig(seeds=[]).validate()


# -- runs --------------------------------------------------------------------


def _small(tmp_path, suite, **grid):
    cfg = ExperimentConfig(suite=suite, dim=64, seeds=[0, 1], output_dir=str(tmp_path))
    cfg.grid.update(grid)
    return cfg


def test_run_bridge_outputs(tmp_path):
    status, summary = run(_small(tmp_path, "Bridge", alpha=[0.5], n_max=12), workers=1)
    assert status == 0
    assert summary["counts"]["Bridge"]["Pass"] == 1
    doc = json.loads((tmp_path / "summary.json").read_text())
    assert doc["schema"] == SCHEMA_VERSION and doc["total_fail"] == 0
    rows = list(csv.DictReader((tmp_path / "bridge.csv").open(encoding="utf-8")))
    assert rows and rows[0]["verdict"] == "Pass"


def test_run_fail_sets_exit_status(tmp_path):
    cfg = _small(tmp_path, "Bridge", alpha=[0.5], n_max=12)
    cfg.tolerances["bridge"] = 1e-30
    status, summary = run(cfg, workers=1)
    assert status == 1 and summary["total_fail"] >= 1


def test_run_galapon_norms(tmp_path):
    status, _ = run(_small(tmp_path, "Galapon", galapon_dims=[64, 128, 256]), workers=1)
    assert status == 0
    rows = list(csv.DictReader((tmp_path / "norms.csv").open(encoding="utf-8")))
    norms = [float(r["norm"]) for r in rows]
    assert norms == sorted(norms) and max(norms) <= 3.141592653589793 + 1e-9


def test_run_classification_table(tmp_path):
    cfg = _small(tmp_path, "Classification")
    cfg.dim = 128
    status, _ = run(cfg, workers=1)
    assert status == 0
    doc = json.loads((tmp_path / "table1.json").read_text())
    fams = {r["family"]: r for r in doc["rows"]}
    assert set(fams) == {"Zero", "OpenDisc", "Boundary"}
    assert fams["Boundary"]["bounded"] is True and fams["Boundary"]["ccr_domain"] == "Dense"
    assert fams["OpenDisc"]["ccr_domain"] == "FiniteDim"
    assert fams["Zero"]["ccr_domain"] == "InfiniteDim" and len(fams["Zero"]["witnesses"]) >= 3
    assert all(w["root_count"] == w["m"] for w in fams["OpenDisc"]["witnesses"])
    md = (tmp_path / "table1.md").read_text()
    assert "T_G = T_{1,1}+T_{1,1}*" in md and "finite dim." in md and "infinite dim." in md


def test_table1_rows_pass():
    doc = table1_report(128)
    assert [r["verdict"] for r in doc["rows"]] == ["Pass"] * 3


def test_run_is_deterministic(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    for d in (a, b):
        cfg = ExperimentConfig(suite="Ccr", dim=64, seeds=[0, 1], output_dir=str(d))
        cfg.grid.update(m=[1, 2], kalpha=[0.5], open_disc=[["0.8", 1, 0.2]])
        assert run(cfg, workers=2)[0] == 0
    assert (a / "ccr.csv").read_bytes() == (b / "ccr.csv").read_bytes()


def test_parallel_matches_serial(tmp_path):
    outs = []
    for w, d in ((1, "s"), (3, "p")):
        cfg = _small(tmp_path / d, "Evolution", omega=["1", "1j"], m=[1, 2], t=[0.3, 1.0])
        assert run(cfg, workers=w)[0] == 0
        outs.append((tmp_path / d / "evolution.csv").read_bytes())
    assert outs[0] == outs[1]


def test_float_formatting_round_trips(tmp_path):
    run(_small(tmp_path, "Galapon", galapon_dims=[64]), workers=1)
    row = next(csv.DictReader((tmp_path / "norms.csv").open(encoding="utf-8")))
    x = float(row["norm"])
    assert repr(x) == row["norm"]


# -- entry point -------------------------------------------------------------


def test_main_usage_error(tmp_path, capsys):
    assert main(["verify", "--dim", "4", "--out", str(tmp_path)]) == 2
    assert "dim must be at least" in capsys.readouterr().err


def test_main_report(tmp_path, capsys):
    assert main(["report", "--dim", "64", "--out", str(tmp_path)]) == 0
    out = capsys.readouterr().out
    assert out.startswith("Classification of T_(omega,m) at D = 64")
    assert (tmp_path / "table1.json").exists()


def test_main_diverge(tmp_path, capsys):
    assert main(["diverge", "--out", str(tmp_path)]) == 0
    counts = json.loads(capsys.readouterr().out)
    assert counts["Divergence"]["Pass"] == len(DEFAULT_GRID["divergence_m"])


def test_module_entry_point_with_env(tmp_path):
    cfg = _write(tmp_path, 'schema = 1\n[run]\nsuite = "Bridge"\n[grid]\nalpha = [0.3]\nn_max = 8\n')
    env = dict(os.environ, OSCITIME_THREADS="1")
    proc = subprocess.run(
        [sys.executable, "-m", "oscitime", "bridge", "--config", str(cfg), "--out", str(tmp_path / "o"), "--tol", "1e-30"],
        capture_output=True, text=True, env=env, timeout=300,
    )
    assert proc.returncode == 1
    assert json.loads(proc.stdout)["Bridge"]["Fail"] == 1
    assert Path(tmp_path / "o" / "summary.json").exists()


@pytest.mark.slow
def test_full_verify_has_no_failures(tmp_path):
    status, summary = run(ExperimentConfig(output_dir=str(tmp_path)))
    assert status == 0, summary["counts"]
    assert summary["total_fail"] == 0
    assert set(summary["files"]) == {"Ccr", "Classification", "Evolution", "Galapon", "Angle", "Bridge", "Divergence"}
