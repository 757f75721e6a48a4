import csv
import json
import subprocess
import sys
from pathlib import Path

import pytest

from jtame import cli
from jtame.reports import Scenario, ConfigError, RunReport, write_table

CONFIGS = Path(__file__).resolve().parents[1] / "configs"


def run(argv):
    return cli.main([str(a) for a in argv])


def test_linear_sweep_margin_column(tmp_path):
    assert run(["linear", "--out", tmp_path]) == 0
    rows = list(csv.DictReader(open(tmp_path / "linear.csv", newline="")))
    for r in rows:
        N = float(r["N"])
        if N < 2:
            assert abs(float(r["margin"]) - (1 - N / 2)) < 1e-9


def test_inflate_trivial_class_shift(tmp_path):
    assert run(["inflate", "--config", CONFIGS / "inflate_trivial.toml", "--out", tmp_path]) == 0
    rep = json.load(open(tmp_path / "report.json", encoding="utf-8"))
    assert rep["outputs"]["class_shift"]["value"] == pytest.approx(5.0, rel=0.01)
    assert rep["outputs"]["class_shift"]["tier"] == "relative"
    with open(tmp_path / "profile.csv", newline="") as fh:
        header = next(csv.reader(fh))
    assert header[:3] == ["r", "f", "f_prime"]


@pytest.mark.parametrize("case", ["negative", "positive-bound"])
def test_inflate_cases(tmp_path, case):
    assert run(["inflate", "--case", case, "--out", tmp_path, "--grid-scale", "0.5"]) == 0


def test_prepare_trace(tmp_path):
    assert run(["prepare", "--out", tmp_path, "--grid-scale", "0.5"]) == 0
    trace = json.load(open(tmp_path / "trace.json"))
    assert trace["final_N"] < 1e-6


def test_every_output_is_tagged(tmp_path):
    run(["isotopy", "--out", tmp_path])
    rep = json.load(open(tmp_path / "report.json"))
    assert all({"value", "tolerance", "tier"} == set(v) for v in rep["outputs"].values())
    assert all(c["invariant"] for c in rep["checks"])


def test_deterministic_outputs(tmp_path):
    for d in ("a", "b"):
        assert run(["isotopy", "--seed", "11", "--out", tmp_path / d]) == 0
    for name in ("isotopy.csv", "report.json", "checks.csv"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_config_errors_exit_2(tmp_path):
    bad = tmp_path / "bad.toml"
    bad.write_text("kind = [unterminated")
    assert run(["linear", "--config", bad, "--out", tmp_path]) == 2
    bad.write_text('kind = "linear-sweep"\n[params]\nbogus = 1\n')
    assert run(["linear", "--config", bad, "--out", tmp_path]) == 2
    assert run(["isotopy", "--config", CONFIGS / "linear.toml", "--out", tmp_path]) == 2
    bad.write_text('kind = "inflate-negative"\n[params]\nm = 1\nM_prime = 1.01\n')
    assert run(["inflate", "--config", bad, "--out", tmp_path]) == 2
    with pytest.raises(SystemExit) as exc:
        run(["prepare", "--grid-scale", "0"])
    assert exc.value.code == 2


def test_precondition_message_names_bound(tmp_path, capsys):
    bad = tmp_path / "neg.toml"
    bad.write_text('kind = "inflate-negative"\n[params]\nm = 2\nM_prime = 0.6\n')
    assert run(["inflate", "--config", bad, "--out", tmp_path]) == 2
    assert "-omega(Z)/(Z.Z)" in capsys.readouterr().err


def test_strict_tolerances_fail(tmp_path):
    code = subprocess.call([sys.executable, "-m", "jtame.cli", "selftest", "--config",
                            str(CONFIGS / "selftest_strict.toml"), "--out", str(tmp_path)],
                           stdout=subprocess.DEVNULL)
    assert code == 1
    rep = json.load(open(tmp_path / "selftest.json"))
    assert not rep["passed"] and any(not c["passed"] for c in rep["checks"])


def test_csv_quoting(tmp_path):
    write_table(tmp_path / "q.csv", ("name", "value"), [('a,"b"', 1.5)])
    raw = (tmp_path / "q.csv").read_bytes()
    assert raw == b'name,value\r\n"a,""b""",1.5\r\n'


def test_scenario_validation():
    with pytest.raises(ConfigError):
        Scenario.build("nope")
    with pytest.raises(ConfigError):
        Scenario.build("prepare", seed=-1)
    assert Scenario.build("prepare", grid_scale=0.5).scaled(25) == 12


def test_report_json_excludes_wall_time():
    rep = RunReport(scenario={}, wall_time=3.0)
    assert "wall_time" not in rep.to_dict()
