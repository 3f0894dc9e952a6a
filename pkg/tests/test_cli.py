import json
import subprocess
import sys

import numpy as np
import pytest

from poissonctl.cli import dumps, run
from poissonctl.control import ControlSignal
from poissonctl.larc import RankReport, ScanResult
from poissonctl.stability import PropernessProfile


def call(capsys, *argv):
    code = run(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def test_help(capsys):
    code, out, _ = call(capsys, "--help")
    assert code == 0 and "simulate" in out and "verdict" in out


def test_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "poissonctl", "larc", "--system", "threewave", "--point", "0,1,1,1", "--depth", "2"], capture_output=True, text=True)
    assert proc.returncode == 0 and json.loads(proc.stdout)["rank"] == 4


def test_simulate_csv(capsys):
    code, out, _ = call(capsys, "simulate", "--system", "threewave", "--x0", "0.1,1,1,1", "--span", "0,1")
    lines = out.strip().splitlines()
    assert code == 0 and lines[0] == "t,q,p,a,b"
    last = [float(v) for v in lines[-1].split(",")]
    assert last[0] == 1.0 and len(last) == 5


def test_simulate_with_signal_file(capsys, tmp_path):
    path = tmp_path / "sig.json"
    path.write_text(ControlSignal.constant([1.0, 0.0, 0.0], 0.0, 1.0).to_json())
    code, out, _ = call(capsys, "simulate", "--system", "bodies", "--x0", "0,0,0", "--signal", str(path), "--format", "json")
    data = json.loads(out)
    assert code == 0 and data["labels"] == ["theta", "mu1", "mu2"]
    assert data["states"][-1][0] == pytest.approx(1.0, abs=1e-9)


def test_simulate_guard_violation_is_runtime_error(capsys):
    code, _, err = call(capsys, "simulate", "--system", "threewave", "--x0", "0,1,1,1", "--span", "0,20")
    assert code == 3 and "guard" in err.lower()


def test_check_structure(capsys):
    code, out, _ = call(capsys, "check", "structure", "--system", "threewave", "--samples", "20")
    data = json.loads(out)
    assert code == 0 and data["ok"] and data["max_antisymmetry_defect"] == 0.0
    assert set(data["max_scaled_casimir_residual"]) == {"V", "W"}


def test_larc_point_and_scan_round_trip(capsys):
    code, out, _ = call(capsys, "larc", "--system", "threewave", "--point", "0,1,1,1", "--depth", "2")
    rep = json.loads(out)
    assert code == 0 and rep["rank"] == 4
    assert json.loads(dumps(RankReport.from_dict(rep).to_dict())) == rep
    code, out, _ = call(capsys, "larc", "--system", "vortex", "--samples", "10", "--depth", "1")
    scan = json.loads(out)
    assert code == 0 and json.loads(dumps(ScanResult.from_dict(scan).to_dict())) == scan


def test_larc_rank_deficient_exit_code(capsys, tmp_path):
    path = tmp_path / "p.json"
    path.write_text(json.dumps({"system": "threewave"}))
    code, out, _ = call(capsys, "larc", "--params", str(path), "--point", "0.5,0,1,1", "--depth", "0")
    assert code == 1 and json.loads(out)["rank"] == 3


def test_seeded_output_is_byte_identical(capsys):
    argv = ("larc", "--system", "bodies", "--samples", "5", "--seed", "7")
    _, a, _ = call(capsys, *argv)
    _, b, _ = call(capsys, *argv)
    assert a == b


def test_floats_use_seventeen_digits():
    assert dumps({"x": 0.1, "n": 3, "ok": True, "v": np.array([1 / 3])}) == '{"x": 0.10000000000000001, "n": 3, "ok": true, "v": [0.33333333333333331]}'
    assert json.loads(dumps([1 / 3]))[0] == 1 / 3


@pytest.mark.parametrize(
    "argv",
    [
        ("simulate",),
        ("simulate", "--system", "threewave", "--x0", "1,2"),
        ("simulate", "--system", "threewave", "--x0", "a,b,c,d"),
        ("simulate", "--system", "pendulum", "--x0", "0"),
        ("simulate", "--system", "threewave", "--x0", "0.1,1,1,1", "--rel-tol", "-1"),
        ("simulate", "--system", "bodies", "--x0", "0,0,0", "--signal", "/nonexistent.json"),
        ("recur", "--system", "bodies", "--x0", "0,0,0", "--radius", "0"),
        ("proper", "--system", "threewave", "--radii", "2,1"),
        ("nope",),
    ],
)
def test_usage_errors(capsys, argv):
    code, _, err = call(capsys, *argv)
    assert code == 2


def test_params_conflict_is_usage_error(capsys, tmp_path):
    path = tmp_path / "p.json"
    path.write_text(json.dumps({"system": "bodies"}))
    code, _, err = call(capsys, "larc", "--params", str(path), "--system", "vortex", "--point", "0,1,0")
    assert code == 2 and "conflicts" in err


def test_recur(capsys):
    code, out, _ = call(capsys, "recur", "--system", "bodies", "--x0", "0.3,0.5,-0.2", "--radius", "0.1", "--t-max", "100")
    data = json.loads(out)
    assert code == 0 and 10.0 < data["return_time"] < 12.0
    code, _, _ = call(capsys, "recur", "--system", "threewave", "--x0", "0,1,1,1")
    assert code == 3


def test_nonwander(capsys):
    code, out, _ = call(capsys, "nonwander", "--system", "threewave", "--x0", "0,1,1,1", "--t-max", "100")
    data = json.loads(out)
    assert code == 0 and data["evidence"]["index"] >= 1


def test_proper_profiles(capsys):
    for name in ("vortex", "bodies", "threewave"):
        code, out, _ = call(capsys, "proper", "--system", name, "--radii", "1,2,4", "--samples", "64")
        data = json.loads(out)
        assert code == 0
        prof = PropernessProfile.from_dict(data)
        assert prof.increasing
        assert json.loads(dumps(prof.to_dict())) == data


def test_steer_and_output_file(capsys, tmp_path):
    out_path = tmp_path / "plan.json"
    code, out, _ = call(capsys, "steer", "--system", "bodies", "--x0", "0,0,0", "--xF", "1,0.2,0.1", "--out", str(out_path))
    assert code == 0 and out == ""
    data = json.loads(out_path.read_text())
    assert data["success"] and data["verification"]["ok"]
    sig = ControlSignal.from_dict(data, 3)
    assert sig.pieces == len(data["values"])


def test_steer_failure_exit_code(capsys):
    code, out, _ = call(capsys, "steer", "--system", "threewave", "--x0", "0,1,1,1", "--xF", "0,1,1.9,1", "--max-nodes", "3")
    data = json.loads(out)
    assert code == 1 and data["success"] is False and data["best_error"] > 0


def test_verdict(capsys):
    code, out, _ = call(capsys, "verdict", "--system", "bodies", "--samples", "10", "--probes", "2", "--t-max", "200")
    assert code == 0
    assert out.startswith("LARC: sampled rank full")
    assert "WPPS evidence: 2/2 probes recurrent" in out and "not a proof" in out
    code, out, _ = call(capsys, "verdict", "--system", "bodies", "--samples", "10", "--probes", "2", "--t-max", "200", "--format", "json")
    data = json.loads(out)
    assert data["recurrent"] == 2 and data["larc_min_rank"] == 3
