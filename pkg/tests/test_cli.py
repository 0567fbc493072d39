import argparse
import csv
import io
import json
import subprocess
import sys

import pytest

from qkzb.cli import main, parse_complex


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def report(out):
    return json.loads(out)


@pytest.mark.parametrize("text, value", [
    ("1", 1), ("-2.5", -2.5), ("0.5i", 0.5j), ("i", 1j), ("-i", -1j), ("-1i", -1j),
    ("0.2+0.1i", 0.2 + 0.1j), ("0.2-0.1i", 0.2 - 0.1j), ("1e-3+2e-1i", 0.001 + 0.2j),
])
def test_parse_complex(text, value):
    assert parse_complex(text) == value


@pytest.mark.parametrize("text", ["2i+1", "abc", "", "1+i+i"])
def test_parse_complex_rejects(text):
    with pytest.raises(argparse.ArgumentTypeError):
        parse_complex(text)


def test_eval_theta_zero(capsys):
    code, out, _ = run(capsys, "eval", "theta1", "--t", "0", "--tau", "0.5i")
    rep = report(out)
    assert code == 0 and rep["pass"]
    assert abs(complex(rep["value"]["re"], rep["value"]["im"])) < 1e-14


@pytest.mark.parametrize("argv", [
    ["eval", "rho", "--t", "0.3"],
    ["eval", "rho-prime", "--t", "0.3"],
    ["eval", "gamma"],
    ["eval", "omega"],
    ["eval", "q-cubic"],
    ["eval", "theta-level", "--j", "1", "--level", "3"],
    ["eval", "kernel-u"],
    ["eval", "hypergeom-m1"],
])
def test_eval_functions(capsys, argv):
    code, out, _ = run(capsys, *argv)
    assert code == 0 and "value" in report(out)


@pytest.mark.parametrize("argv", [
    ["verify", "gamma-heat", "--t", "0.2+0.1i", "--tau", "0.8i", "--p", "1.1i"],
    ["verify", "fourier-qheat"],
    ["verify", "fourier-modular"],
    ["verify", "sl3", "--relation", "braid321", "--x", "1,1.7,1.2i"],
    ["verify", "sl3", "--relation", "commute:12,13"],
    ["verify", "theta-block", "--j", "1", "--level", "2"],
    ["verify", "projective-free"],
    ["verify", "projective-free", "--true-solution"],
    ["verify", "hermite"],
    ["verify", "kzb-residual"],
    ["verify", "kzb-residual", "--m", "1"],
    ["verify", "modular-map"],
    ["verify", "semiclassical"],
])
def test_verify_passes(capsys, argv):
    code, out, _ = run(capsys, *argv)
    rep = report(out)
    assert code == 0 and rep["pass"] and rep["residual"] <= rep["tolerance"]


def test_verify_failure_exit_code(capsys):
    code, out, _ = run(capsys, "verify", "projective-one")
    rep = report(out)
    assert code == 1 and not rep["pass"] and rep["residual"] > rep["tolerance"]


def test_numerical_error_exit_code(capsys):
    # purely imaginary tau and p put tau/p on the real line
    code, out, _ = run(capsys, "verify", "gamma-modular", "--tau", "1i", "--p", "1.2i")
    rep = report(out)
    assert code == 3 and rep["error"] == "DomainError" and rep["inputs"]["tau"] == {"re": 0.0, "im": 1.0}
    code, out, _ = run(capsys, "verify", "semiclassical", "--operand", "heat")
    assert code == 3 and report(out)["error"] == "FitUnstable"


@pytest.mark.parametrize("argv", [
    ["verify", "sl3"],
    ["verify", "sl3", "--relation", "commute:12,21"],
    ["verify", "sl3", "--relation", "braid:1,1,2"],
    ["verify", "sl3", "--relation", "nonsense"],
    ["eval", "theta-level"],
    ["eval", "theta1", "--tau", "2i+1"],
    ["eval", "nosuchfunction"],
    ["verify", "kzb-residual", "--m", "2"],
    ["grid", "theta1", "--lambda-from", "0", "--lambda-to", "1", "--n", "0"],
    [],
])
def test_usage_errors(capsys, argv):
    code, out, err = run(capsys, *argv)
    assert code == 2 and out == "" and err.strip()


def test_lower_half_plane_modulus_is_usage_error(capsys):
    code, out, err = run(capsys, "eval", "theta1", "--tau=-1i")
    assert code == 2 and out == "" and "upper half plane" in err


def test_grid_csv(capsys, tmp_path):
    code, out, _ = run(capsys, "grid", "theta1", "--lambda-from", "0", "--lambda-to", "1",
                       "--n", "5", "--tau", "1i", "--csv")
    assert code == 0
    rows = list(csv.reader(io.StringIO(out)))
    assert rows[0] == ["re_lambda", "im_lambda", "re_value", "im_value"]
    assert len(rows) == 6
    # theta vanishes at both ends of [0, 1]
    assert abs(float(rows[1][2])) < 1e-14 and abs(float(rows[-1][2])) < 1e-12
    target = tmp_path / "grid.csv"
    code, _, _ = run(capsys, "grid", "theta1", "--lambda-from", "0", "--lambda-to", "1",
                     "--n", "5", "--tau", "1i", "--out", str(target))
    assert code == 0 and target.read_text() == out


def test_out_file_holds_report(capsys, tmp_path):
    target = tmp_path / "report.json"
    code, out, _ = run(capsys, "verify", "gamma-heat", "--out", str(target))
    assert code == 0 and json.loads(target.read_text())["pass"]


def test_deterministic_output(capsys):
    argv = ["verify", "sl3", "--relation", "braid321"]
    first = report(run(capsys, *argv)[1])
    second = report(run(capsys, *argv)[1])
    first.pop("wall_time_ms")
    second.pop("wall_time_ms")
    assert json.dumps(first, sort_keys=True) == json.dumps(second, sort_keys=True)


def test_max_evals_env(capsys, monkeypatch):
    monkeypatch.setenv("QKZB_MAX_EVALS", "16")
    code, out, _ = run(capsys, "eval", "kernel-u", "--tol", "1e-13")
    assert code == 3 and report(out)["error"] == "NonConvergence"
    monkeypatch.setenv("QKZB_MAX_EVALS", "many")
    code, _, err = run(capsys, "eval", "kernel-u")
    assert code == 2 and "QKZB_MAX_EVALS" in err


def test_entry_point_subprocess():
    proc = subprocess.run([sys.executable, "-m", "qkzb.cli", "eval", "theta1", "--t", "0.25"],
                          capture_output=True, text=True)
    assert proc.returncode == 0 and json.loads(proc.stdout)["pass"]


def test_nonfinite_fields_serialize_as_null(capsys):
    # the m = 1 family has no coefficient check, reported as null
    code, out, _ = run(capsys, "verify", "semiclassical", "--family", "one", "--operand", "exp")
    assert code in (0, 1) and report(out)["coeff_check"] is None
