"""Scenario files: a YAML tree describing one run.

Bare numbers are read in the unit system named by the top-level
``units`` key (``si`` by default, or ``atomic``); any number may instead
be written as a string with an explicit unit, e.g. ``"800 nm"`` or
``"50fs"``.  Everything is converted to atomic units on load.

Example
-------
::

    units: si
    grid: {n: 32, box: 2 nm}
    orbitals:
      - {center: [0, 0, 0], width: 0.1 nm, wavevector: [10 nm^-1, 0, 0], spin: [0, 0, 1]}
    pulse: {wavelength: 800 nm, e0: 1e9 V/m, envelope: gaussian, duration: 1 fs, center: 2 fs}
    dt: 1 as
    t_end: 4 fs
    terms: {hartree: true, spin-spin: false}
    outputs: {every: 10, directory: run1, snapshots: 100, fields: [rho0, spin]}
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import yaml

from .constants import ATOMIC, quantity
from .errors import ConfigurationError
from .grid import Grid3, boundary_leakage, norm
from .laser import LaserPulse, StaticField
from .propagator import Propagator, SCFConfig, check_dt, stability_limit
from .solvers import SolverConfig
from .terms import parse_toggles

__all__ = ["Scenario", "OrbitalSpec", "OutputSpec", "BPSpec", "load_scenario",
           "parse_scenario", "gaussian_packet", "spinor_for"]

SNAPSHOT_FIELDS = ("orbitals", "rho0", "spin", "j0", "phi0", "a2", "phi2")
_TOP_KEYS = {"units", "grid", "orbitals", "pulse", "static_field", "dt", "t_end", "scf",
             "solver", "terms", "self_interaction", "stability_c", "outputs",
             "breit_pauli", "name", "workers"}


def spinor_for(direction) -> np.ndarray:
    """Two-component spinor whose spin points along ``direction``."""
    n = np.asarray(direction, dtype=float)
    r = np.linalg.norm(n)
    if n.shape != (3,) or r == 0:
        raise ConfigurationError("spin direction must be a non-zero 3-vector")
    n = n / r
    theta = math.acos(max(-1.0, min(1.0, n[2])))
    phi = math.atan2(n[1], n[0])
    return np.array([math.cos(theta / 2), np.exp(1j * phi) * math.sin(theta / 2)])


def gaussian_packet(grid: Grid3, center, width, wavevector=(0, 0, 0), spin=(0, 0, 1)):
    """Normalised spinor ``exp(-d^2/4 w^2 + i k.d) chi``.

    ``width`` is the standard deviation of the density; ``d`` is the
    minimum-image displacement from ``center``.
    """
    d = grid.displacement(center)
    k = np.asarray(wavevector, dtype=float)
    g = np.exp(-(d**2).sum(0) / (4 * width**2) + 1j * np.tensordot(k, d, axes=1))
    phi = spinor_for(spin)[:, None, None, None] * g[None]
    return phi / math.sqrt(norm(grid, phi))


@dataclass
class OrbitalSpec:
    center: tuple = (0.0, 0.0, 0.0)
    width: float = 1.0
    wavevector: tuple = (0.0, 0.0, 0.0)
    spin: tuple = (0.0, 0.0, 1.0)


@dataclass
class OutputSpec:
    """Output plan.

    ``every`` is the observables cadence in steps; ``snapshots`` the field
    snapshot cadence (0 disables); ``fields`` a subset of
    ``SNAPSHOT_FIELDS``; ``units`` the unit system of the CSV columns.
    """

    every: int = 1
    snapshots: int = 0
    fields: tuple = ("rho0", "spin")
    directory: str | None = None
    units: str = "si"


@dataclass
class BPSpec:
    """Settings for the two-route Breit-Pauli comparison."""

    a_ext: tuple = (0.0, 0.0, 0.0)
    softening: float = 0.0
    quadrature: str = "grid-convolution"
    padding_factor: int = 2
    tolerance: float = 1e-3


@dataclass
class Scenario:
    grid: Grid3
    orbitals: list
    dt: float
    t_end: float
    pulse: object = None
    toggles: dict = field(default_factory=parse_toggles)
    scf: SCFConfig = SCFConfig()
    solver: SolverConfig = SolverConfig()
    self_interaction: str = "exclude"
    stability_c: float = 0.18
    outputs: OutputSpec = field(default_factory=OutputSpec)
    breit_pauli: BPSpec = field(default_factory=BPSpec)
    name: str = "scenario"
    units: str = "si"
    raw: dict = field(default_factory=dict)

    def initial_orbitals(self) -> np.ndarray:
        phis = [gaussian_packet(self.grid, o.center, o.width, o.wavevector, o.spin)
                for o in self.orbitals]
        out = np.array(phis) if phis else np.zeros((0, 2) + self.grid.n, complex)
        if len(phis):
            boundary_leakage(self.grid, (np.abs(out) ** 2).sum((0, 1)))
        return out

    def propagator(self) -> Propagator:
        return Propagator(self.grid, self.pulse, self.toggles, self.solver,
                          self.self_interaction, self.scf, ATOMIC)

    @property
    def dt_limit(self) -> float:
        return stability_limit(self.grid, ATOMIC, self.stability_c)


def _vec(v, dim, units, what):
    if isinstance(v, (int, float, str)):
        raise ConfigurationError(f"{what} must be a list of three values")
    v = list(v)
    if len(v) != 3:
        raise ConfigurationError(f"{what} must have three components")
    return tuple(quantity(x, dim, units) for x in v)


def _get(d: dict, key, default=None, required=False):
    if key not in d:
        if required:
            raise ConfigurationError(f"missing required key {key!r}")
        return default
    return d[key]


def _pulse(d: dict, units: str):
    known = {"wavelength", "omega", "a0", "e0", "fluence", "polarization", "envelope",
             "duration", "center", "carrier_phase", "spatial", "direction"}
    extra = set(d) - known
    if extra:
        raise ConfigurationError(f"unknown pulse keys {sorted(extra)}")
    kw = {}
    if "wavelength" in d:
        kw["wavelength"] = quantity(d["wavelength"], "length", units)
    if "omega" in d:
        kw["omega"] = quantity(d["omega"], "frequency", units)
    for key in ("polarization", "direction"):
        if key in d:
            kw[key] = np.asarray(d[key], dtype=float)
    for key in ("envelope", "spatial"):
        if key in d:
            kw[key] = str(d[key])
    if "duration" in d:
        kw["duration"] = quantity(d["duration"], "time", units)
    if "center" in d:
        kw["center"] = quantity(d["center"], "time", units)
    if "carrier_phase" in d:
        kw["carrier_phase"] = float(d["carrier_phase"])
    amps = [k for k in ("a0", "e0", "fluence") if k in d]
    if len(amps) != 1:
        raise ConfigurationError("pulse needs exactly one of a0, e0, fluence")
    if "a0" in d:
        kw["a0"] = quantity(d["a0"], "vector potential", units)
    elif "fluence" in d:
        # bare fluence numbers are mJ/cm2 in either unit system
        val = d["fluence"]
        val = f"{val} mJ/cm2" if isinstance(val, (int, float)) else val
        kw["fluence"] = quantity(val, "fluence", units)
    pulse = LaserPulse(**kw)
    if "e0" in d:
        pulse.a0 = quantity(d["e0"], "electric field", units) / pulse.omega
    return pulse


def _static(d: dict, units: str):
    extra = set(d) - {"a", "e", "b", "phi"}
    if extra:
        raise ConfigurationError(f"unknown static_field keys {sorted(extra)}")
    kw = {}
    if "a" in d:
        kw["a"] = np.array(_vec(d["a"], "vector potential", units, "static_field.a"))
    if "e" in d:
        kw["e"] = np.array(_vec(d["e"], "electric field", units, "static_field.e"))
    if "b" in d:
        kw["b"] = np.array(_vec(d["b"], "magnetic field", units, "static_field.b"))
    if "phi" in d:
        kw["phi"] = quantity(d["phi"], "energy", units) / abs(ATOMIC.q)
    return StaticField(**kw)


def parse_scenario(data: dict) -> Scenario:
    """Build a :class:`Scenario` from a parsed YAML mapping."""
    if not isinstance(data, dict):
        raise ConfigurationError("scenario must be a mapping")
    extra = set(data) - _TOP_KEYS
    if extra:
        raise ConfigurationError(f"unknown scenario keys {sorted(extra)}")
    units = str(data.get("units", "si")).lower()
    if units not in ("si", "atomic"):
        raise ConfigurationError("units must be 'si' or 'atomic'")

    g = _get(data, "grid", required=True)
    n = g.get("n")
    box = g.get("box")
    if n is None or box is None:
        raise ConfigurationError("grid needs n and box")
    box = [quantity(b, "length", units) for b in np.atleast_1d(np.asarray(box, dtype=object))]
    grid = Grid3(tuple(np.broadcast_to(n, 3)), tuple(np.broadcast_to(box, 3)),
                 int(data.get("workers", 1)))
    hmin = min(grid.spacing)

    orbitals = []
    for i, o in enumerate(_get(data, "orbitals", [])):
        spec = OrbitalSpec(
            center=_vec(o.get("center", [0, 0, 0]), "length", units, f"orbitals[{i}].center"),
            width=quantity(_get(o, "width", required=True), "length", units),
            wavevector=_vec(o.get("wavevector", [0, 0, 0]), "wavenumber", units,
                            f"orbitals[{i}].wavevector"),
            spin=tuple(float(x) for x in o.get("spin", [0, 0, 1])))
        if spec.width < 2 * hmin * (1 - 1e-12):
            raise ConfigurationError(
                f"orbital {i} width {spec.width:.4g} is below two grid spacings ({2 * hmin:.4g})")
        spinor_for(spec.spin)
        orbitals.append(spec)

    pulse = None
    if data.get("pulse") and data.get("static_field"):
        raise ConfigurationError("give either pulse or static_field, not both")
    if data.get("pulse"):
        pulse = _pulse(data["pulse"], units)
    elif data.get("static_field"):
        pulse = _static(data["static_field"], units)

    dt = quantity(_get(data, "dt", required=True), "time", units)
    t_end = quantity(_get(data, "t_end", 0.0), "time", units)
    if t_end < 0:
        raise ConfigurationError("t_end must be non-negative")
    c_fac = float(data.get("stability_c", 0.18))
    check_dt(grid, dt, ATOMIC, c_fac)

    scf_d = data.get("scf") or {}
    scf = SCFConfig(bool(scf_d.get("refresh_every_substep", False)),
                    int(scf_d.get("fixed_point_iters", 0)), float(scf_d.get("tol", 1e-10)))
    sv = data.get("solver") or {}
    solver = SolverConfig(sv.get("method", "spectral-poisson"),
                          sv.get("zero_mode_policy", "drop"),
                          int(sv.get("padding_factor", 1)),
                          quantity(sv.get("softening", 0.0), "length", units))

    out_d = data.get("outputs") or {}
    fields = tuple(out_d.get("fields", ("rho0", "spin")))
    bad = set(fields) - set(SNAPSHOT_FIELDS)
    if bad:
        raise ConfigurationError(f"unknown snapshot fields {sorted(bad)}")
    outputs = OutputSpec(int(out_d.get("every", 1)), int(out_d.get("snapshots", 0)), fields,
                         out_d.get("directory"), str(out_d.get("units", units)))
    if outputs.units not in ("si", "atomic"):
        raise ConfigurationError("outputs.units must be 'si' or 'atomic'")

    bp = data.get("breit_pauli") or {}
    bpspec = BPSpec(_vec(bp.get("a_ext", [0, 0, 0]), "vector potential", units, "breit_pauli.a_ext"),
                    quantity(bp.get("softening", 0.0), "length", units),
                    str(bp.get("quadrature", "grid-convolution")),
                    int(bp.get("padding_factor", 2)), float(bp.get("tolerance", 1e-3)))

    return Scenario(grid=grid, orbitals=orbitals, dt=dt, t_end=t_end, pulse=pulse,
                    toggles=parse_toggles(data.get("terms")), scf=scf, solver=solver,
                    self_interaction=str(data.get("self_interaction", "exclude")),
                    stability_c=c_fac, outputs=outputs, breit_pauli=bpspec,
                    name=str(data.get("name", "scenario")), units=units, raw=data)


def load_scenario(path) -> Scenario:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as err:
        raise ConfigurationError(f"cannot read scenario {path}: {err}") from None
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as err:
        raise ConfigurationError(f"scenario {path} is not valid YAML: {err}") from None
    scn = parse_scenario(data)
    if scn.name == "scenario":
        scn.name = path.stem
    return scn
