"""Tests for the command-line interface: subcommands, exit codes, and the
emitted artifacts."""

import json

import numpy as np
import pytest

from adactl.cli import main
from adactl.harness import read_trace_csv, sliding_window_average

GOOD = """
[experiment]
t = 30
seeds = 0 1

[system]
kind = fixed

[noise]
kind = gaussian
std = 0.3

[controller:lqr]
type = lqr

[controller:gpc]
type = gpc
history = 3
"""


@pytest.fixture
def good_config(tmp_path):
    path = tmp_path / "exp.ini"
    path.write_text(GOOD)
    return str(path)


def test_run_writes_traces_and_summary(good_config, tmp_path, capsys):
    out = tmp_path / "out"
    out.mkdir()
    code = main(["run", "--config", good_config, "--out", str(out)])
    assert code == 0
    names = {p.name for p in out.iterdir()}
    assert names == {"lqr_seed0.csv", "lqr_seed1.csv",
                     "gpc_seed0.csv", "gpc_seed1.csv", "summary.json"}
    assert "wrote 2 seed(s)" in capsys.readouterr().out


def test_run_seed_override(good_config, tmp_path):
    out = tmp_path / "out"
    out.mkdir()
    code = main(["run", "--config", good_config, "--seed", "7",
                 "--out", str(out)])
    assert code == 0
    names = {p.name for p in out.iterdir()}
    assert names == {"lqr_seed7.csv", "gpc_seed7.csv", "summary.json"}


def test_run_missing_config_exits_2(tmp_path):
    assert main(["run", "--config", str(tmp_path / "nope.ini"),
                 "--out", str(tmp_path)]) == 2


def test_run_bad_config_exits_2(tmp_path):
    path = tmp_path / "bad.ini"
    path.write_text(GOOD + "\n[controller:x]\ntype = pid\n")
    assert main(["run", "--config", str(path), "--out", str(tmp_path)]) == 2


def test_run_unwritable_output_exits_2(good_config):
    # a path nested under a regular file cannot be created
    assert main(["run", "--config", good_config,
                 "--out", good_config + "/out"]) == 2


def test_report_totals_match_trace(good_config, tmp_path, capsys):
    out = tmp_path / "out"
    out.mkdir()
    main(["run", "--config", good_config, "--seed", "0", "--out", str(out)])
    capsys.readouterr()
    trace = str(out / "gpc_seed0.csv")
    assert main(["report", "--trace", trace]) == 0
    payload = json.loads(capsys.readouterr().out)
    cols = read_trace_csv(trace)
    entry = payload[trace]
    assert entry["total_cost"] == pytest.approx(cols["cost"].sum())
    assert entry["windowed_final"] == pytest.approx(
        sliding_window_average(cols["cost"])[-1])
    assert entry["sup_cost"] >= entry["total_cost"] - 1e-12


def test_report_full_grid_sup_dominates(good_config, tmp_path, capsys):
    out = tmp_path / "out"
    out.mkdir()
    main(["run", "--config", good_config, "--seed", "0", "--out", str(out)])
    capsys.readouterr()
    trace = str(out / "lqr_seed0.csv")
    main(["report", "--trace", trace, "--intervals", "dyadic"])
    dyadic = json.loads(capsys.readouterr().out)[trace]["sup_cost"]
    main(["report", "--trace", trace, "--intervals", "full"])
    full = json.loads(capsys.readouterr().out)[trace]["sup_cost"]
    assert full >= dyadic - 1e-12


def test_report_missing_trace_exits_2(tmp_path):
    assert main(["report", "--trace", str(tmp_path / "missing.csv")]) == 2


def test_selftest_passes(capsys):
    assert main(["selftest"]) == 0
    out = capsys.readouterr().out
    assert out.count(": ok") == 4


def test_unknown_subcommand_rejected():
    with pytest.raises(SystemExit):
        main(["frobnicate"])
