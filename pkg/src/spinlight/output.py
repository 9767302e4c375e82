"""Run output: observables CSV, binary field snapshots and a JSON manifest.

Layout of a run directory::

    observables.csv          one row per output time
    snapshots/<field>_<step>.bin
    manifest.json

Snapshots are raw little-endian arrays (``<f8`` or ``<c16``) in atomic
units, C order, with the shape recorded in the manifest.  Orbital
snapshots have shape ``(N, 2, nx, ny, nz)``; vector fields
``(3, nx, ny, nz)``.

Observables columns (``<u>`` is the unit suffix for the chosen system,
``si`` or ``atomic``):

``step``
    Step index.
``time_<u>``
    Time (``s`` or ``au``).
``norm_min``, ``norm_max``
    Extremes of the per-orbital norms.
``mx``, ``my``, ``mz``
    Total spin magnetization ``sum_i <sigma>_i`` (dimensionless).
``dipole_x_<u>`` ...
    Electric dipole ``q <r>`` (``C_m`` or ``au``).
``energy_total_<u>``
    One-body energy plus half the pair (internal and coherent) energy,
    without the rest energy (``J`` or ``hartree``).
``energy_<key>_<u>``
    Per-term expectation value summed over orbitals, for ``kinetic`` and
    every term key.
``rest_energy_<u>``
    ``N m c^2``.
``continuity_residual``
    Relative residual of the leading-order continuity equation.
"""
from __future__ import annotations

import csv
import json
import math
import time as _time
from dataclasses import asdict, is_dataclass
from pathlib import Path

import numpy as np

from . import __version__
from .constants import ATOMIC, SI, from_internal
from .errors import ConfigurationError, OutputError
from .grid import probability_density, spin_density
from .propagator import run
from .solvers import assemble_potentials
from .sources import build_sources
from .terms import TermId

__all__ = ["observable_columns", "write_observables", "read_observables", "SnapshotWriter",
           "write_manifest", "read_manifest", "simulate", "DEVIATIONS", "load_snapshot"]

DEVIATIONS = (
    "orbital current inside all kernels uses the Hermitian (real) form",
    "spin-orbit operators are Hermitian-symmetrised: sigma.(E x p) -> sigma.(E x p - p x E)/2",
    "external spin-orbit term uses the minimally coupled momentum p - qA",
    "potentials acting on an orbital exclude its own density unless self_interaction=include",
    "isolated-system Coulomb gauge: internal A is transverse and vanishes at leading order",
    "default RK4 stability constant C=0.18 instead of 0.2",
    "dipole approximation for the laser unless a spatial profile is requested",
)

_UNITS = {
    "si": {"time": ("s", "s"), "energy": ("J", "J"), "dipole": ("C_m", None)},
    "atomic": {"time": ("au", None), "energy": ("hartree", None), "dipole": ("au", None)},
}


def _energy_keys():
    return ["kinetic"] + [t.value for t in TermId]


def observable_columns(units: str = "si") -> list:
    if units not in _UNITS:
        raise ConfigurationError(f"unknown unit system {units!r}")
    u = {k: v[0] for k, v in _UNITS[units].items()}
    cols = ["step", f"time_{u['time']}", "norm_min", "norm_max", "mx", "my", "mz"]
    cols += [f"dipole_{a}_{u['dipole']}" for a in "xyz"]
    cols.append(f"energy_total_{u['energy']}")
    cols += [f"energy_{k}_{u['energy']}" for k in _energy_keys()]
    cols += [f"rest_energy_{u['energy']}", "continuity_residual"]
    return cols


def _scales(units):
    if units == "atomic":
        return 1.0, 1.0, 1.0
    t = from_internal(1.0, "s")
    en = from_internal(1.0, "J")
    dip = SI.e * from_internal(1.0, "m")
    return t, en, dip


def _row(obs, units):
    ts, es, ds = _scales(units)
    norms = np.atleast_1d(obs.norms)
    mag = obs.magnetization_total
    row = [obs.step, obs.time * ts,
           float(norms.min()) if norms.size else float("nan"),
           float(norms.max()) if norms.size else float("nan"),
           *map(float, mag), *(float(d) * ds for d in obs.dipole), obs.energy_total * es]
    energies = {getattr(k, "value", k): v for k, v in obs.energies.items()}
    row += [float(energies.get(k, 0.0)) * es for k in _energy_keys()]
    row += [obs.rest_energy * es, obs.continuity_residual]
    return row


def write_observables(path, trajectory, units: str = "si"):
    """Write a trajectory's observables as CSV."""
    cols = observable_columns(units)
    try:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(cols)
            for obs in trajectory.observables:
                w.writerow([repr(v) if isinstance(v, float) else v for v in _row(obs, units)])
    except OSError as err:
        raise OutputError(f"cannot write {path}: {err}") from None


def read_observables(path) -> tuple[list, str]:
    """Read an observables CSV back to atomic units.

    Returns
    -------
    rows : list of dict
        ``time``, ``step`` and ``energies`` (keyed by term key) per row.
    units : str
        Unit system detected from the header.
    """
    try:
        with open(path, newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader)
            data = [r for r in reader if r]
    except (OSError, StopIteration) as err:
        raise ConfigurationError(f"cannot read observables {path}: {err}") from None
    units = next((u for u in _UNITS if header == observable_columns(u)), None)
    if units is None:
        raise ConfigurationError(f"{path} does not have the observables header")
    ts, es, _ = _scales(units)
    idx = {c: i for i, c in enumerate(header)}
    esuf = _UNITS[units]["energy"][0]
    rows = []
    for r in data:
        rows.append({
            "step": int(r[0]),
            "time": float(r[1]) / ts,
            "energies": {k: float(r[idx[f"energy_{k}_{esuf}"]]) / es for k in _energy_keys()},
        })
    return rows, units


class SnapshotWriter:
    """Writes field snapshots and keeps the index for the manifest."""

    def __init__(self, directory, fields):
        self.directory = Path(directory) / "snapshots"
        self.fields = tuple(fields)
        self.index = []
        try:
            self.directory.mkdir(parents=True, exist_ok=True)
        except OSError as err:
            raise OutputError(f"cannot create {self.directory}: {err}") from None

    def write_array(self, name: str, step: int, t: float, arr):
        arr = np.asarray(arr)
        dtype = "<c16" if np.iscomplexobj(arr) else "<f8"
        fname = f"{name}_{step:08d}.bin"
        try:
            np.ascontiguousarray(arr, dtype=dtype).tofile(self.directory / fname)
        except OSError as err:
            raise OutputError(f"cannot write snapshot {fname}: {err}") from None
        self.index.append({"field": name, "step": int(step), "time_au": float(t),
                           "file": f"snapshots/{fname}", "dtype": dtype,
                           "shape": list(arr.shape), "units": "atomic"})

    def write(self, grid, state, sample, solver, const=ATOMIC):
        """Snapshot of the requested fields, built from all orbitals."""
        phi = state.orbitals
        need_pot = {"phi0", "a2", "phi2"} & set(self.fields)
        need_src = need_pot | ({"j0"} & set(self.fields))
        src = build_sources(grid, phi, sample.a, const=const) if need_src else None
        pot = assemble_potentials(grid, src, solver, const) if need_pot else None
        for name in self.fields:
            if name == "orbitals":
                arr = phi
            elif name == "rho0":
                arr = probability_density(phi)
            elif name == "spin":
                arr = spin_density(phi)
            elif name == "j0":
                arr = src.j0
            elif name == "phi0":
                arr = pot.phi0
            elif name == "a2":
                arr = pot.a2_total
            else:
                arr = pot.phi2_total
            self.write_array(name, state.step, state.t, arr)


def load_snapshot(directory, entry) -> np.ndarray:
    """Array for one manifest snapshot entry."""
    path = Path(directory) / entry["file"]
    try:
        return np.fromfile(path, dtype=entry["dtype"]).reshape(entry["shape"])
    except (OSError, ValueError) as err:
        raise ConfigurationError(f"cannot read snapshot {path}: {err}") from None


def _jsonable(obj):
    if is_dataclass(obj):
        return _jsonable(asdict(obj))
    if isinstance(obj, dict):
        return {str(k.value if isinstance(k, TermId) else k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, float) and not math.isfinite(obj):
        return str(obj)
    if isinstance(obj, (str, int, float, bool)) or obj is None:
        return obj
    return str(obj)


def write_manifest(directory, scn, trajectory, snapshots=(), extra=None) -> Path:
    """Write ``manifest.json`` describing a finished run."""
    g = scn.grid
    man = {
        "program": "spinlight",
        "version": __version__,
        "created": _time.strftime("%Y-%m-%dT%H:%M:%S%z"),
        "name": scn.name,
        "config": _jsonable(scn.raw),
        "resolved_atomic": {
            "grid": {"n": list(g.n), "box": list(g.box), "spacing": list(g.spacing)},
            "dt": trajectory.dt, "steps": trajectory.steps, "t_end": scn.t_end,
            "dt_limit": scn.dt_limit, "stability_c": scn.stability_c,
            "terms": {t.value: bool(v) for t, v in scn.toggles.items()},
            "self_interaction": scn.self_interaction,
            "scf": _jsonable(scn.scf), "solver": _jsonable(scn.solver),
            "pulse": _jsonable(scn.pulse),
        },
        "constants": {"atomic": ATOMIC.as_dict(), "si": SI.as_dict()},
        "deviations": list(DEVIATIONS),
        "flags": list(trajectory.flags),
        "observables": {"file": "observables.csv", "units": scn.outputs.units,
                        "columns": observable_columns(scn.outputs.units)},
        "snapshots": list(snapshots),
    }
    if extra:
        man.update(_jsonable(extra))
    path = Path(directory) / "manifest.json"
    try:
        path.write_text(json.dumps(man, indent=2))
    except OSError as err:
        raise OutputError(f"cannot write {path}: {err}") from None
    return path


def read_manifest(path) -> dict:
    path = Path(path)
    if path.is_dir():
        path = path / "manifest.json"
    try:
        return json.loads(path.read_text())
    except (OSError, ValueError) as err:
        raise ConfigurationError(f"cannot read manifest {path}: {err}") from None


def simulate(scn, directory=None):
    """Run a scenario and write its outputs.

    Parameters
    ----------
    scn : Scenario
    directory : path, optional
        Overrides ``scn.outputs.directory``; defaults to ``./<name>``.

    Returns
    -------
    trajectory : Trajectory
    directory : Path
    """
    directory = Path(directory or scn.outputs.directory or scn.name)
    try:
        directory.mkdir(parents=True, exist_ok=True)
    except OSError as err:
        raise OutputError(f"cannot create {directory}: {err}") from None
    prop = scn.propagator()
    writer = None
    if scn.outputs.snapshots > 0 and scn.outputs.fields:
        writer = SnapshotWriter(directory, scn.outputs.fields)
    every = scn.outputs.every
    if writer is not None:
        every = math.gcd(every, scn.outputs.snapshots)

    def on_output(state, fields, obs):
        if writer is not None and state.step % scn.outputs.snapshots == 0:
            writer.write(scn.grid, state, prop.sample(state.t), scn.solver)

    traj = run(prop, scn.initial_orbitals(), scn.dt, scn.t_end, every, on_output=on_output)
    if every != scn.outputs.every:
        last = traj.steps
        traj.observables = [o for o in traj.observables
                            if o.step % scn.outputs.every == 0 or o.step == last]
    write_observables(directory / "observables.csv", traj, scn.outputs.units)
    write_manifest(directory, scn, traj, writer.index if writer else ())
    return traj, directory
