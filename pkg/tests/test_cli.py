import copy
import csv
import json
import math

import pytest
import yaml

from spinlight.analysis import eta
from spinlight.cli import main

BP = {
    "name": "bp_small",
    "units": "atomic",
    "grid": {"n": 32, "box": 20},
    "orbitals": [
        {"center": [-1.2, 0.3, 0], "width": 1.3, "wavevector": [0.4, 0, 0.2], "spin": [1, 0, 0]},
        {"center": [1.2, -0.2, 0.3], "width": 1.3, "wavevector": [0, -0.3, 0.1], "spin": [0, 1, 1]},
    ],
    "dt": 0.01,
    "breit_pauli": {"a_ext": [0.3, -0.5, 0.4], "softening": 1.25, "tolerance": 1e-3},
}

RUN = {
    "name": "tiny",
    "units": "atomic",
    "grid": {"n": 32, "box": 20},
    "orbitals": [
        {"center": [-1.0, 0, 0], "width": 1.3, "spin": [0, 0, 1]},
        {"center": [1.0, 0, 0], "width": 1.3, "wavevector": [0, 0.45, 0], "spin": [1, 0, 0]},
    ],
    "pulse": {"omega": 0.5, "e0": 0.05, "envelope": "sin2", "duration": 1.0, "center": 0.5},
    "dt": 0.05,
    "t_end": 0.2,
    "outputs": {"every": 2, "snapshots": 4, "fields": ["orbitals"], "units": "si"},
}


def _write(tmp_path, name, data):
    path = tmp_path / name
    path.write_text(yaml.safe_dump(data))
    return path


def _json_out(capsys):
    return json.loads(capsys.readouterr().out)


def test_eta_from_fluence(capsys):
    assert main(["eta", "--fluence", "1", "--dt", "50fs"]) == 0
    out = _json_out(capsys)
    assert abs(out["E_ext_V_per_m"] / 4e8 - 1) < 0.05
    assert math.isclose(out["duration_s"], 50e-15)
    assert abs(out["lambda_C_m"] / 2.42e-12 - 1) < 5e-3


def test_eta_with_units(capsys):
    assert main(["eta", "--r", "1A", "--E", "4e8", "--lambda", "800nm", "--n", "2",
                 "--reference"]) == 0
    out = _json_out(capsys)
    assert math.isclose(out["r_ij_m"], 1e-10)
    assert math.isclose(out["eta"], eta(1e-10, 4e8, 800e-9), rel_tol=1e-12)
    assert math.isclose(out["magnitudes_J"]["eta"], out["eta"], rel_tol=1e-12)
    assert len(out["reference"]) == 3


@pytest.mark.parametrize("argv", [
    ["eta", "--E", "4e8", "--fluence", "1", "--dt", "50fs"],
    ["eta", "--fluence", "1"],
    ["eta"],
    ["eta", "--E", "4e8", "--r", "1A"],
])
def test_eta_errors(argv, capsys):
    assert main(argv) == 2
    err = json.loads(capsys.readouterr().err)
    assert err["error"] == "configuration"


def test_validate_bp(tmp_path, capsys):
    path = _write(tmp_path, "bp.yaml", BP)
    report = tmp_path / "bp.csv"
    assert main(["validate-bp", str(path), "--report", str(report)]) == 0
    with open(report, newline="") as fh:
        rows = list(csv.DictReader(fh))
    assert len(rows) == 7
    assert all(r["pass"] in ("PASS", "True", "true") for r in rows)


def test_validate_bp_failure_exit_code(tmp_path, capsys):
    path = _write(tmp_path, "bp.yaml", BP)
    assert main(["validate-bp", str(path), "--tolerance", "1e-14"]) == 6
    captured = capsys.readouterr()
    assert captured.out.startswith("term,route1,route2")
    assert json.loads(captured.err.splitlines()[-1])["error"] == "validation-failed"


def test_simulate_and_decompose(tmp_path, capsys):
    path = _write(tmp_path, "run.yaml", RUN)
    out_dir = tmp_path / "run"
    assert main(["simulate", str(path), "-o", str(out_dir)]) == 0
    res = _json_out(capsys)
    assert res["steps"] == 4 and (out_dir / "manifest.json").exists()

    assert main(["decompose", str(out_dir / "observables.csv")]) == 0
    rep = _json_out(capsys)
    assert len(rep["times"]) == len(rep["reports"]) == 3
    assert set(rep["reports"][0]["mechanisms"]) == {"A1", "A2", "B1", "B2"}

    assert main(["decompose", str(out_dir), "--snapshot", "4"]) == 0
    snap = _json_out(capsys)
    assert len(snap["reports"]) == 1
    # the snapshot decomposition recomputes the same energies as the run
    last = rep["reports"][-1]["coherent_total"]
    assert math.isclose(snap["reports"][0]["coherent_total"], last, rel_tol=1e-6, abs_tol=1e-14)

    assert main(["decompose", str(out_dir), "--snapshot", "3"]) == 2


def test_missing_scenario(tmp_path, capsys):
    assert main(["simulate", str(tmp_path / "nope.yaml")]) == 2
