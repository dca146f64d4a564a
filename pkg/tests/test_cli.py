import csv
import json
import subprocess
import sys

import pytest

from twrsel.cli import main

CONFIG = """scheme = pr-maxmin-rs
layout = 1, 1
modulation = MPAM(4)
snr_grid = 0, 5
min_errors = 20
max_trials = 20000
chunk_trials = 5000
seed = 1
"""


@pytest.fixture
def cfg_path(tmp_path):
    p = tmp_path / "run.cfg"
    p.write_text(CONFIG)
    return p


def test_simulate_writes_files(cfg_path, tmp_path, capsys):
    out = tmp_path / "out"
    assert main(["-q", "simulate", "--config", str(cfg_path), "--out", str(out), "--seed", "3"]) == 0
    rows = list(csv.DictReader((out / "run.csv").open()))
    assert [r["snr_db"] for r in rows] == ["0.0", "5.0"]
    side = json.loads((out / "run.json").read_text())
    assert side["seed"] == 3
    assert capsys.readouterr().out.startswith("snr_db,scheme")


def test_simulate_byte_identical_across_workers(cfg_path, tmp_path):
    main(["-q", "simulate", "--config", str(cfg_path), "--out", str(tmp_path / "a")])
    main(["-q", "simulate", "--config", str(cfg_path), "--out", str(tmp_path / "b"), "--workers", "2"])
    assert (tmp_path / "a" / "run.csv").read_bytes() == (tmp_path / "b" / "run.csv").read_bytes()


def test_compare(cfg_path, tmp_path, capsys):
    other = tmp_path / "nopr.cfg"
    other.write_text(CONFIG.replace("pr-maxmin-rs", "maxmin-rs-noPR"))
    assert main(["-q", "compare", "--configs", str(cfg_path), str(other), "--window", "0", "5"]) == 0
    out = capsys.readouterr().out
    assert "maxmin-rs-noPR" in out and "slope" in out


def test_analyze(cfg_path, capsys):
    assert main(["analyze", "--config", str(cfg_path)]) == 0
    lines = [l for l in capsys.readouterr().out.splitlines() if not l.startswith("#")]
    assert lines[0] == "snr_db,ser_ma_bound,ser_bc_bound,ser_e2e_bound,asymptotic"
    assert len(lines) == 3
    assert all(float(x) > 0 for x in lines[1].split(",")[1:])


def test_bad_config_exit_code(tmp_path, capsys):
    p = tmp_path / "bad.cfg"
    p.write_text("scheme = nonsense\n")
    assert main(["analyze", "--config", str(p)]) == 2
    assert "error" in capsys.readouterr().err


def test_selfcheck_passes(capsys):
    assert main(["selfcheck"]) == 0
    assert "FAIL" not in capsys.readouterr().out


def test_module_entry_point():
    res = subprocess.run([sys.executable, "-m", "twrsel", "--version"], capture_output=True, text=True)
    assert res.returncode == 0 and "0.1.0" in res.stdout
