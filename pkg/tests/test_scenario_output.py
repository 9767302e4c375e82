import copy
import json
import math
from pathlib import Path

import numpy as np
import pytest

from spinlight.constants import from_internal, to_internal
from spinlight.errors import ConfigurationError
from spinlight.grid import probability_density
from spinlight.laser import LaserPulse, StaticField
from spinlight.output import (load_snapshot, observable_columns, read_manifest, read_observables,
                              simulate)
from spinlight.scenario import gaussian_packet, load_scenario, parse_scenario, spinor_for
from spinlight.terms import TermId

SCENARIOS = Path(__file__).resolve().parents[1] / "scenarios"

BASE = {
    "name": "tiny",
    "units": "atomic",
    "grid": {"n": 32, "box": 20},
    "orbitals": [
        {"center": [-1.0, 0, 0], "width": 1.3, "spin": [0, 0, 1]},
        {"center": [1.0, 0, 0], "width": 1.3, "wavevector": [0, 0.45, 0], "spin": [1, 0, 0]},
    ],
    "pulse": {"omega": 0.5, "e0": 0.05, "envelope": "sin2", "duration": 1.0, "center": 0.5},
    "dt": 0.05,
    "t_end": 0.4,
    "solver": {"padding_factor": 2},
    "outputs": {"every": 2, "snapshots": 4, "fields": ["orbitals", "rho0", "a2", "phi2", "j0"],
                "units": "si"},
}


def scenario(**changes):
    d = copy.deepcopy(BASE)
    d.update(changes)
    return d


def test_spinor_directions():
    for n in ([0, 0, 1], [1, 0, 0], [0, -1, 0], [1, 1, 1]):
        chi = spinor_for(n)
        s = np.array([np.vdot(chi, m @ chi).real for m in
                      (np.array([[0, 1], [1, 0]]), np.array([[0, -1j], [1j, 0]]), np.diag([1, -1]))])
        assert np.allclose(s, np.array(n) / np.linalg.norm(n))


def test_parse_atomic_scenario():
    scn = parse_scenario(scenario())
    assert scn.grid.n == (32, 32, 32) and scn.grid.box == (20.0,) * 3
    assert isinstance(scn.pulse, LaserPulse)
    assert math.isclose(scn.pulse.e0, 0.05)
    assert len(scn.orbitals) == 2 and scn.outputs.every == 2
    phi = scn.initial_orbitals()
    assert phi.shape == (2, 2, 32, 32, 32)


def test_parse_si_units_and_suffixes():
    d = scenario(units="si", grid={"n": 32, "box": "20 bohr"}, dt="0.05 au_time",
                 t_end=from_internal(0.4, "s"))
    d["orbitals"] = [{"center": ["-1.5 bohr", 0, 0], "width": "1.4 bohr"}]
    d["pulse"] = {"wavelength": "800 nm", "fluence": 1.0, "duration": "2 fs", "center": "1 fs"}
    scn = parse_scenario(d)
    assert math.isclose(scn.grid.box[0], 20.0)
    assert math.isclose(scn.t_end, 0.4, rel_tol=1e-12)
    assert math.isclose(scn.pulse.wavelength, to_internal(800, "nm"))
    assert scn.pulse.a0 > 0


def test_static_field_and_toggles():
    d = scenario(pulse=None, static_field={"b": [0, 0, 0.1]}, terms={"spin-spin": False})
    scn = parse_scenario(d)
    assert isinstance(scn.pulse, StaticField)
    assert not scn.toggles[TermId.SPIN_SPIN] and scn.toggles[TermId.HARTREE]


@pytest.mark.parametrize("change,message", [
    ({"colour": 1}, "unknown scenario keys"),
    ({"units": "cgs"}, "units"),
    ({"dt": 1.0}, "stability"),
    ({"grid": {"n": 16}}, "grid needs"),
    ({"static_field": {"b": [0, 0, 1]}}, "either pulse or static_field"),
    ({"terms": {"warp-drive": True}}, "unknown term"),
    ({"outputs": {"fields": ["vorticity"]}}, "snapshot fields"),
    ({"self_interaction": "sometimes"}, "self_interaction"),
])
def test_configuration_errors(change, message):
    with pytest.raises(ConfigurationError, match=message):
        parse_scenario(scenario(**change)).propagator()


def test_orbital_too_narrow():
    d = scenario()
    d["orbitals"] = [{"center": [0, 0, 0], "width": 0.8}]
    with pytest.raises(ConfigurationError, match="below two grid spacings"):
        parse_scenario(d)


def test_pulse_amplitude_is_unique():
    d = scenario()
    d["pulse"] = dict(d["pulse"], a0=0.1)
    with pytest.raises(ConfigurationError, match="exactly one"):
        parse_scenario(d)


def test_shipped_scenarios_parse():
    for path in sorted(SCENARIOS.glob("*.yaml")):
        scn = load_scenario(path)
        assert scn.name == path.stem


def test_load_errors(tmp_path):
    with pytest.raises(ConfigurationError):
        load_scenario(tmp_path / "missing.yaml")
    bad = tmp_path / "bad.yaml"
    bad.write_text("grid: [1, 2\n")
    with pytest.raises(ConfigurationError):
        load_scenario(bad)


def test_observable_columns():
    cols = observable_columns("si")
    assert cols[:3] == ["step", "time_s", "norm_min"]
    assert "energy_soc-ext-int_J" in cols and "energy_kinetic_J" in cols
    assert observable_columns("atomic")[1] == "time_au"
    with pytest.raises(ConfigurationError):
        observable_columns("imperial")


@pytest.fixture(scope="module")
def tiny_run(tmp_path_factory):
    scn = parse_scenario(scenario())
    out = tmp_path_factory.mktemp("run")
    traj, directory = simulate(scn, out)
    return scn, traj, directory


def test_simulate_writes_outputs(tiny_run):
    scn, traj, directory = tiny_run
    assert (directory / "observables.csv").exists()
    man = read_manifest(directory)
    assert man["name"] == "tiny" and man["resolved_atomic"]["steps"] == traj.steps == 8
    assert man["observables"]["columns"] == observable_columns("si")
    steps = sorted({e["step"] for e in man["snapshots"]})
    assert steps == [0, 4, 8]
    assert {e["field"] for e in man["snapshots"]} == {"orbitals", "rho0", "a2", "phi2", "j0"}
    assert man["deviations"] and man["config"]["grid"]["n"] == 32
    # observables keep their own cadence
    assert [o.step for o in traj.observables] == [0, 2, 4, 6, 8]


def test_observables_round_trip(tiny_run):
    scn, traj, directory = tiny_run
    rows, units = read_observables(directory / "observables.csv")
    assert units == "si"
    assert [r["step"] for r in rows] == [o.step for o in traj.observables]
    for r, o in zip(rows, traj.observables):
        assert math.isclose(r["time"], o.time, rel_tol=1e-12, abs_tol=1e-15)
        for k, v in o.energies.items():
            key = getattr(k, "value", k)
            assert math.isclose(r["energies"][key], v, rel_tol=1e-12, abs_tol=1e-300)


def test_snapshots_load(tiny_run):
    scn, traj, directory = tiny_run
    man = read_manifest(directory / "manifest.json")
    entry = next(e for e in man["snapshots"] if e["field"] == "orbitals" and e["step"] == 0)
    phi = load_snapshot(directory, entry)
    assert phi.dtype == np.complex128 and phi.shape == (2, 2, 32, 32, 32)
    assert np.allclose(phi, scn.initial_orbitals())
    rho_entry = next(e for e in man["snapshots"] if e["field"] == "rho0" and e["step"] == 0)
    assert np.allclose(load_snapshot(directory, rho_entry), probability_density(phi))
    a2 = next(e for e in man["snapshots"] if e["field"] == "a2")
    assert a2["shape"] == [3, 32, 32, 32] and a2["dtype"] == "<f8"


def test_read_errors(tmp_path):
    bad = tmp_path / "obs.csv"
    bad.write_text("a,b\n1,2\n")
    with pytest.raises(ConfigurationError):
        read_observables(bad)
    with pytest.raises(ConfigurationError):
        read_manifest(tmp_path)
    (tmp_path / "manifest.json").write_text(json.dumps({"x": 1}))
    assert read_manifest(tmp_path) == {"x": 1}
