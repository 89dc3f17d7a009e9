import csv
import json
import subprocess
import sys

import pytest

from ergocert.cli import main

from networks import BIRTH_DEATH


@pytest.fixture
def bd_file(tmp_path):
    path = tmp_path / "bd.net"
    path.write_text(BIRTH_DEATH)
    return path


def test_sign_fails_on_sir(fixtures, capsys):
    assert main(["analyze", "--framework", "sign", str(fixtures / "sir.net")]) == 1
    assert "Fails" in capsys.readouterr().out


def test_structural_holds_on_sir(fixtures):
    assert main(["analyze", "--framework", "structural", str(fixtures / "sir.net")]) == 0


def test_interval_with_controller(fixtures, capsys):
    code = main(["analyze", "--framework", "interval", "--controlled", "X4",
                 str(fixtures / "ex82.net")])
    out = capsys.readouterr().out
    assert code == 0
    assert "OutputControllability" in out and "AIC" in out


def test_all_prints_table(fixtures, capsys):
    code = main(["analyze", "--framework", "all", str(fixtures / "sir.net")])
    out = capsys.readouterr().out
    assert code == 0
    for name in ("Nominal", "Interval", "Robust", "Sign", "Structural"):
        assert name in out
    assert "not applicable" in out


def test_unknown_species_is_usage_error(fixtures):
    assert main(["analyze", "--controlled", "X9", str(fixtures / "ex82.net")]) == 4


def test_missing_file_is_error(tmp_path):
    assert main(["analyze", str(tmp_path / "nope.net")]) == 3


def test_bad_flag_is_usage_error():
    with pytest.raises(SystemExit) as exc:
        main(["analyze", "--framework", "bogus", "x.net"])
    assert exc.value.code == 4


@pytest.fixture
def report(fixtures, tmp_path):
    out = tmp_path / "report.json"
    assert main(["analyze", "--framework", "interval", "--controlled", "X4",
                 str(fixtures / "ex82.net"), "--out", str(out)]) == 0
    return out


def test_report_contents(report, fixtures):
    data = json.loads(report.read_text())
    assert data["tool"] == "ergocert"
    assert len(data["network"]["sha256"]) == 64
    certs = data["frameworks"]["Interval"]["certificates"]
    assert [c["property"] for c in certs] == ["Ergodicity", "OutputControllability", "AIC"]


def test_verify_accepts(report, fixtures, capsys):
    assert main(["verify", str(report), str(fixtures / "ex82.net")]) == 0
    assert "0 failure(s)" in capsys.readouterr().out


def test_verify_rejects_tampered_vector(report, fixtures, capsys):
    data = json.loads(report.read_text())
    cert = data["frameworks"]["Interval"]["certificates"][0]
    cert["v"][0] = 0.01
    report.write_text(json.dumps(data))
    assert main(["verify", str(report), str(fixtures / "ex82.net")]) == 1
    assert "FAILED" in capsys.readouterr().out


def test_verify_rejects_other_network(report, fixtures, capsys):
    assert main(["verify", str(report), str(fixtures / "sir.net")]) == 1
    assert "hash mismatch" in capsys.readouterr().out


def test_report_command(report, capsys):
    assert main(["report", str(report)]) == 0
    out = capsys.readouterr().out
    assert "Interval" in out and "Holds" in out


def test_simulate_requires_seed(bd_file):
    assert main(["simulate", str(bd_file), "--n-traj", "10"]) == 4


def test_simulate_closed_loop(bd_file, tmp_path, capsys):
    prefix = tmp_path / "cl"
    code = main(["simulate", str(bd_file), "--controlled", "X1", "--actuated", "X1", "--mu", "3",
                 "--n-traj", "40", "--t-end", "30", "--grid", "7", "--seed", "5",
                 "--out", str(prefix)])
    assert code == 0
    summary = json.loads((tmp_path / "cl.json").read_text())
    track = summary["tracking"]
    assert track["species"] == "X1" and track["setpoint"] == 3
    assert track["error"] == pytest.approx(track["terminal_mean"] - 3)
    rows = list(csv.reader((tmp_path / "cl.csv").open()))
    assert len(rows) == 8
    assert "Z1_mean" in rows[0]


def test_simulate_moment_ode_columns(bd_file, tmp_path):
    prefix = tmp_path / "ol"
    assert main(["simulate", str(bd_file), "--n-traj", "20", "--t-end", "5", "--grid", "6",
                 "--seed", "1", "--moment-ode", "--x0", "X1=4", "--out", str(prefix)]) == 0
    rows = list(csv.reader((tmp_path / "ol.csv").open()))
    assert "X1_ode" in rows[0]
    col = rows[0].index("X1_ode")
    assert float(rows[1][col]) == pytest.approx(4.0)


def test_simulate_is_reproducible(bd_file, tmp_path):
    for name in ("a", "b"):
        assert main(["simulate", str(bd_file), "--n-traj", "20", "--t-end", "5", "--grid", "6",
                     "--seed", "8", "--out", str(tmp_path / name)]) == 0
    assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()


def test_module_entry_point(fixtures):
    proc = subprocess.run([sys.executable, "-m", "ergocert", "analyze", "--framework",
                           "structural", str(fixtures / "sir.net")],
                          capture_output=True, text=True, timeout=120)
    assert proc.returncode == 0
    assert "Structural" in proc.stdout
