import csv
import json
import subprocess
import sys

import pytest

from conftest import write_config
from rieszlab.cli import run_cli
from rieszlab.config import KINDS
from rieszlab.records import canonical_json, content_hash


@pytest.mark.parametrize("kind", KINDS)
def test_each_subcommand(tiny_configs, tmp_path, kind):
    out = tmp_path / "out"
    assert run_cli([kind, "--config", str(tiny_configs[kind]), "--out", str(out), "--seed", "5"]) == 0
    rec_path = out / f"{kind}_seed5.json"
    rec = json.loads(rec_path.read_text())
    assert set(rec) == {"kind", "seed", "config", "input_hash", "outputs", "format_version"}
    assert rec["kind"] == kind and rec["seed"] == 5 and rec["config"]["seed"] == 5
    assert rec["input_hash"] == content_hash({k: rec[k] for k in ("kind", "seed", "config")})
    tables = sorted(out.glob(f"{kind}_seed5_*.csv"))
    assert tables
    for t in tables:
        rows = list(csv.reader(t.open()))
        assert len(rows) >= 2 and all(len(r) == len(rows[0]) for r in rows)


def test_config_errors_exit_2(tmp_path, tiny_configs):
    assert run_cli(["moment", "--config", str(tmp_path / "none.toml")]) == 2
    bad = write_config(tmp_path / "bad.toml", "moment", params={"beta": 2.0, "d": 2, "p": 1, "sigma": 3.0})
    assert run_cli(["moment", "--config", str(bad), "--out", str(tmp_path)]) == 2
    assert run_cli(["tail", "--config", str(tiny_configs["moment"]), "--out", str(tmp_path)]) == 2
    assert run_cli(["moment", "--config", str(tiny_configs["moment"]), "--threads", "0"]) == 2
    assert run_cli(["nope"]) == 2


def test_missing_config_message(tmp_path, capsys):
    assert run_cli(["tail", "--config", str(tmp_path / "missing.toml")]) == 2
    assert "not found" in capsys.readouterr().err


def test_variational_schema(tiny_configs, tmp_path):
    assert run_cli(["variational", "--config", str(tiny_configs["variational"]), "--out", str(tmp_path)]) == 0
    out = json.loads((tmp_path / "variational_seed1.json").read_text())["outputs"]
    assert {"rho", "lambda_sigma", "duality"} <= set(out)


def test_numerical_failure_exit_3(tmp_path):
    # too few samples to populate the tail thresholds
    cfg = write_config(tmp_path / "t.toml", "tail",
                       tables={"budget": {"n_samples": 100, "n_steps": 8}, "tail": {"rho": 1.0, "moment_orders": 0}})
    assert run_cli(["tail", "--config", str(cfg), "--out", str(tmp_path)]) == 3


def test_out_env(monkeypatch, tmp_path, tiny_configs):
    monkeypatch.setenv("RIESZLAB_OUT", str(tmp_path / "env"))
    assert run_cli(["sobolev-check", "--config", str(tiny_configs["sobolev-check"])]) == 0
    assert (tmp_path / "env" / "sobolev-check_seed1.json").is_file()


def test_module_entry_point(tmp_path, tiny_configs):
    res = subprocess.run([sys.executable, "-m", "rieszlab", "sobolev-check", "--config",
                          str(tiny_configs["sobolev-check"]), "--out", str(tmp_path)],
                         capture_output=True, text=True)
    assert res.returncode == 0 and res.stdout.strip().endswith("sobolev-check_seed1.json")


def test_canonical_json_stable():
    a = canonical_json({"b": 1.0, "a": [float("inf"), 2]})
    assert a == canonical_json({"a": [float("inf"), 2], "b": 1.0})
    assert "Infinity" in a or "inf" in a
