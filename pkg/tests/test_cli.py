import csv
from pathlib import Path

import numpy as np
import pytest

from fermiblock.cli import emit_csv, main, run_experiment
from fermiblock.config import ConfigError, parse_config, parse_entries

CONFIGS = Path(__file__).resolve().parent.parent / "configs"

MINIMAL = """
[experiment]
command = thermal-entry

[model]
type = chain
length = 8

[parameters]
beta = 1
degree = 200
"""


def read_rows(path):
    with open(path, newline="", encoding="utf-8") as fh:
        return [r for r in csv.reader(fh) if r and not r[0].startswith("#")]


def test_minimal_config_defaults():
    cfg = parse_config(MINIMAL)
    assert cfg.command == "thermal-entry"
    assert cfg.seed == 0
    assert cfg.get("delta") == 0.05
    assert cfg.sweep("beta") == [1.0]
    assert cfg.csv == "thermal-entry.csv"


def test_negative_beta_names_field():
    with pytest.raises(ConfigError) as exc:
        parse_config(MINIMAL.replace("beta = 1", "beta = -1"))
    assert any("beta" in e for e in exc.value.errors)


def test_sweep_list():
    cfg = parse_config(MINIMAL.replace("beta = 1", "beta = 0.5, 1, 2"))
    assert cfg.sweep("beta") == [0.5, 1.0, 2.0]


def test_all_errors_reported():
    bad = """
[experiment]
command = warp-drive
seed = abc

[parameters]
eta = 0
d = 1.5
mystery = 3
"""
    with pytest.raises(ConfigError) as exc:
        parse_config(bad)
    text = " | ".join(exc.value.errors)
    for needle in ["unknown command", "seed", "eta", "parameters.d", "mystery"]:
        assert needle in text
    assert len(exc.value.errors) >= 5


def test_missing_model_rejected():
    with pytest.raises(ConfigError, match="model"):
        parse_config("[experiment]\ncommand = greens\n")


def test_lattice_model_parsing():
    cfg = parse_config((CONFIGS / "disordered_lattice.ini").read_text(), CONFIGS)
    spec = cfg.model["spec"]
    assert spec.dims == (4, 4) and spec.boundary == "periodic"
    assert spec.disorder is not None and len(spec.domains) >= 1
    with pytest.raises(ConfigError, match="hoppings"):
        parse_config(
            "[experiment]\ncommand = thermal-entry\n[model]\ntype = lattice\ndims = 4\nhoppings = 0 0 * * 1\n"
        )


def test_parse_entries():
    assert parse_entries("0 0; 0 1") == [(0, 0), (0, 1)]
    assert parse_entries(None) == [(0, 0)]
    with pytest.raises(ValueError):
        parse_entries("1 2 3")


def test_emit_csv_header_only_and_complex(tmp_path):
    p = tmp_path / "a.csv"
    emit_csv([], p, ["x", "z"], {"z"})
    assert p.read_bytes() == b"x,z_re,z_im\r\n"
    emit_csv([{"x": 1.5, "z": 2 - 3j}, {"x": "a,b", "z": 0}], p, ["x", "z"], {"z"})
    assert read_rows(p) == [["x", "z_re", "z_im"], ["1.5", "2.0", "-3.0"], ["a,b", "0.0", "0.0"]]
    assert b'"a,b"' in p.read_bytes()


def test_emit_csv_truncation_marker(tmp_path):
    p = tmp_path / "t.csv"
    emit_csv([{"x": 1}], p, ["x"], truncated="ValueError: boom\nmore")
    assert p.read_text().splitlines()[-1] == "# TRUNCATED: ValueError: boom more"


def test_approx_bound_rows(tmp_path):
    cfg = parse_config((CONFIGS / "approx_bound.ini").read_text(), CONFIGS)
    assert run_experiment(cfg, tmp_path) == 0
    rows = read_rows(tmp_path / cfg.csv)
    assert len(rows) == 5
    head = rows[0]
    for r in rows[1:]:
        rec = dict(zip(head, r))
        assert float(rec["measured"]) <= float(rec["certified"])
        assert rec["within"] == "true"


def test_clock_overlap_report(tmp_path):
    cfg = parse_config("[experiment]\ncommand = clock-overlap\n[parameters]\nL = 15\n")
    assert run_experiment(cfg, tmp_path) == 0
    report = (tmp_path / cfg.report).read_text()
    assert "max overlap" in report and "3/(2(L+2)) = 0.0882352941" in report


def test_dynamics_t_zero_matches_m0(tmp_path):
    text = (CONFIGS / "dynamics_chain.ini").read_text().replace("t = 0, 1, 2, 5", "t = 0")
    cfg = parse_config(text, CONFIGS)
    assert run_experiment(cfg, tmp_path) == 0
    rows = read_rows(tmp_path / cfg.csv)
    rec = [dict(zip(rows[0], r)) for r in rows[1:]]
    diag = next(r for r in rec if r["i"] == "3" and r["j"] == "3")
    tol = float(diag["eps_declared"])
    assert abs(float(diag["value_re"]) - 1.0) <= tol
    assert all(r["within"] == "true" for r in rec)


def test_failure_writes_partial_csv(tmp_path):
    text = MINIMAL.replace("beta = 1", "beta = 0.5, 8").replace("degree = 200", "degree = 200\neps_pa = 0.01")
    cfg = parse_config(text)
    assert run_experiment(cfg, tmp_path) == 1
    lines = (tmp_path / cfg.csv).read_text().splitlines()
    assert lines[-1].startswith("# TRUNCATED:")
    assert "[error]" in (tmp_path / cfg.report).read_text()


def test_main_exit_codes(tmp_path, capsys):
    bad = tmp_path / "bad.ini"
    bad.write_text(MINIMAL.replace("beta = 1", "beta = -2"))
    assert main([str(bad)]) == 2
    assert "beta" in capsys.readouterr().err
    assert main([str(tmp_path / "missing.ini")]) == 2
    good = tmp_path / "good.ini"
    good.write_text(MINIMAL)
    assert main([str(good), "--output-dir", str(tmp_path / "o"), "--seed", "3", "--jobs", "2"]) == 0
    assert (tmp_path / "o" / "thermal-entry.csv").exists()


@pytest.mark.parametrize("name", sorted(p.name for p in CONFIGS.glob("*.ini")))
def test_shipped_configs_run_deterministically(name, tmp_path):
    cfg = parse_config((CONFIGS / name).read_text(), CONFIGS)
    assert run_experiment(cfg, tmp_path / "a") == 0
    assert run_experiment(cfg, tmp_path / "b", jobs=2) == 0
    a = (tmp_path / "a" / cfg.csv).read_bytes()
    assert a == (tmp_path / "b" / cfg.csv).read_bytes()
    rows = read_rows(tmp_path / "a" / cfg.csv)
    if "within" in rows[0]:
        k = rows[0].index("within")
        assert all(r[k] == "true" for r in rows[1:]), name
