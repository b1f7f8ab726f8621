import json
import math
import os
import subprocess
import sys

import numpy as np
import pytest

from psilab.cli import main
from psilab.config import load_config
from psilab.errors import ConfigError
from psilab.grid import read_symbol_csv
from psilab.report import CheckEntry, VerificationReport, _clean
from psilab.runner import run, sweep

ZERO_FAST = {"symbol": {"family": "zero"}, "lambda": [4],
             "suites": ["multiplier", "geometry"]}


def write(tmp_path, cfg, name="cfg.json"):
    p = tmp_path / name
    p.write_text(json.dumps(cfg))
    return str(p)


# ---------------------------------------------------------------- config

def test_config_defaults_and_order():
    cfg = load_config({"symbol": {"family": "zero"}, "suites": ["energy", "quantize"]})
    assert cfg.suites == ["quantize", "energy"]
    assert cfg.lambdas == [4.0] and cfg.time.T == 0.25
    assert load_config('{"symbol": {"family": "zero"}, "lambda": [4, 16]}').lambdas == [4, 16]


@pytest.mark.parametrize("bad", [
    {"symbol": {"family": "zero"}, "time": {"T": -0.1}},
    {"symbol": {"family": "zero"}, "unknown": 1},
    {"symbol": {"family": "nope"}},
    {"symbol": {"family": "zero"}, "lambda": []},
    {"symbol": {"family": "zero"}, "loss": {"lambdas": [4, 8]}},
    {"symbol": {"family": "zero"}, "suites": ["fourier"]},
])
def test_config_rejects(bad):
    with pytest.raises(ConfigError):
        load_config(bad)


def test_config_bad_sources(tmp_path):
    with pytest.raises(ConfigError):
        load_config(str(tmp_path / "missing.json"))
    with pytest.raises(ConfigError):
        load_config("{not json")


# ---------------------------------------------------------------- report

def test_report_json_is_clean():
    rep = VerificationReport()
    rep.add(CheckEntry("a", "ref", margin=math.inf, tolerance=0.0, passed=np.bool_(True),
                       witness={"v": np.float64(1.5), "arr": np.arange(2), "z": 1 + 2j}))
    rep.add(CheckEntry("b", "ref", margin=-1.0, tolerance=0.0, passed=False))
    d = json.loads(rep.to_json())
    assert d["pass"] is False and d["entries"][0]["margin"] == "inf"
    assert d["entries"][0]["witness"] == {"arr": [0, 1], "v": 1.5, "z": [1.0, 2.0]}
    assert [e.name for e in rep.failures()] == ["b"]
    assert _clean(float("nan")) == "nan"
    with pytest.raises(ValueError):
        CheckEntry("c", "", 0.0, 0.0, True)


# ---------------------------------------------------------------- runner

def test_run_shifted_sum_multiplier_entries():
    rep = run(load_config({"symbol": {"family": "shifted_sum"}, "lambda": [16],
                           "suites": ["multiplier"]}))
    names = [e.name for e in rep.entries]
    for n in ("multiplier_a", "multiplier_b", "multiplier_c", "multiplier_d"):
        assert n in names
    assert rep.passed
    assert all(e.witness["Lambda"] == 16 for e in rep.entries)


def test_run_reports_module_errors_as_failures():
    cfg = load_config({"symbol": {"family": "zero"}, "lambda": [4], "suites": ["geometry"],
                       "grid": {"L_x": 1.0}})
    rep = run(cfg)
    assert not rep.passed and rep.entries[0].reference == "plumbing"


def test_sweep_lambda_zero():
    cfg = load_config({"symbol": {"family": "zero"}, "lambda": [1, 2, 3, 4],
                       "grid": {"space_N": 16}, "loss": {"N": 16, "M": 5}})
    out = sweep(cfg, "lambda")
    assert out["pass"] and len(out["table"]) == 4
    c0 = [r["c0_min"] for r in out["table"]]
    np.testing.assert_allclose(c0, np.sqrt([1, 2, 3, 4]), rtol=1e-5)
    assert out["exponents"]["c0_min"] == pytest.approx(0.5, abs=1e-4)


def test_sweep_needs_four_points():
    cfg = load_config({"symbol": {"family": "zero"}, "lambda": [4, 8]})
    with pytest.raises(ConfigError):
        sweep(cfg, "lambda")
    with pytest.raises(ConfigError):
        sweep(cfg, "depth")


# ---------------------------------------------------------------- CLI

def test_cli_catalog(capsys):
    assert main(["catalog", "--list"]) == 0
    out = capsys.readouterr().out
    for name in ("zero", "gradient_model", "product_monotone", "shifted_sum", "a4_model"):
        assert name in out


def test_cli_schema_error(tmp_path, capsys):
    path = write(tmp_path, {"symbol": {"family": "zero"}, "time": {"T": -1}})
    assert main(["verify", "--config", path]) == 2
    assert "configuration error" in capsys.readouterr().err


def test_cli_verify_is_deterministic(tmp_path):
    path = write(tmp_path, ZERO_FAST)
    outs = []
    for k in range(2):
        out = tmp_path / f"r{k}.json"
        assert main(["verify", "--config", path, "--output", str(out)]) == 0
        outs.append(out.read_bytes())
    assert outs[0] == outs[1]
    rep = json.loads(outs[0])
    assert rep["pass"] is True and rep["environment"]["symbol"]["family"] == "zero"


def test_cli_verify_failure_exit_code(tmp_path, capsys):
    cfg = dict(ZERO_FAST, tolerances={"stability_ratio": 1.0}, suites=["geometry"],
               **{"lambda": [4, 16]})
    path = write(tmp_path, cfg)
    rc = main(["verify", "--config", path, "--output", str(tmp_path / "r.json")])
    rep = json.loads((tmp_path / "r.json").read_text())
    assert rc == (0 if rep["pass"] else 1)


def test_cli_sweep_short_axis(tmp_path):
    path = write(tmp_path, {"symbol": {"family": "zero"}, "lambda": [4, 8]})
    assert main(["sweep", "--config", path, "--axis", "lambda"]) == 2


def test_cli_export(tmp_path, capsys):
    path = write(tmp_path, {"symbol": {"family": "gradient_model"}, "lambda": [4],
                            "grid": {"N_x": 48, "N_xi": 48}})
    assert main(["export", "--fields", "delta0,m", "--config", path,
                 "--dir", str(tmp_path / "out")]) == 0
    s = read_symbol_csv(tmp_path / "out" / "delta0_L4.csv")
    assert s.grid.shape == (48, 48) and np.any(s.values != 0)
    assert main(["export", "--fields", "bogus", "--config", path, "--dir", str(tmp_path)]) == 2


def test_console_module_runs():
    env = dict(os.environ, PSILAB_THREADS="1")
    r = subprocess.run([sys.executable, "-m", "psilab", "catalog", "--list"],
                       capture_output=True, text=True, env=env, timeout=120)
    assert r.returncode == 0 and "a4_model" in r.stdout
