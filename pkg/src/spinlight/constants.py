"""Physical constants and conversion between SI and Hartree atomic units.

Internally every quantity is expressed in Hartree atomic units
(hbar = m = e = 1, 4 pi eps0 = 1, c = 1/alpha).  Inputs and outputs may
carry explicit SI (or SI-prefixed) units which are converted here.
"""
from __future__ import annotations

import math
import re
from dataclasses import dataclass

from scipy import constants as sc

from .errors import ConfigurationError

__all__ = [
    "PhysicalConstants",
    "ATOMIC",
    "SI",
    "DIMENSIONS",
    "to_internal",
    "from_internal",
    "convert",
    "parse_quantity",
    "quantity",
]


@dataclass(frozen=True)
class PhysicalConstants:
    """Set of constants in one consistent unit system.

    Attributes
    ----------
    hbar, m, q, e, c, eps0, mu0 : float
        Reduced Planck constant, electron mass, signed electron charge
        (``q = -e``), elementary charge, speed of light, vacuum
        permittivity and permeability.
    system : str
        ``"atomic"`` or ``"si"``.
    """

    hbar: float
    m: float
    q: float
    e: float
    c: float
    eps0: float
    mu0: float
    system: str = "atomic"

    @property
    def h(self) -> float:
        return 2.0 * math.pi * self.hbar

    @property
    def lambda_C(self) -> float:
        """Compton wavelength h/(m c)."""
        return self.h / (self.m * self.c)

    @property
    def omega_C(self) -> float:
        """Compton angular frequency 2 pi c / lambda_C."""
        return 2.0 * math.pi * self.c / self.lambda_C

    @property
    def e2bar(self) -> float:
        """Coulomb coupling q^2 / (4 pi eps0)."""
        return self.q**2 / (4.0 * math.pi * self.eps0)

    @property
    def rest_energy(self) -> float:
        return self.m * self.c**2

    @classmethod
    def atomic(cls) -> "PhysicalConstants":
        c = 1.0 / sc.fine_structure
        eps0 = 1.0 / (4.0 * math.pi)
        return cls(hbar=1.0, m=1.0, q=-1.0, e=1.0, c=c, eps0=eps0,
                   mu0=1.0 / (eps0 * c * c), system="atomic")

    @classmethod
    def si(cls) -> "PhysicalConstants":
        return cls(hbar=sc.hbar, m=sc.m_e, q=-sc.e, e=sc.e, c=sc.c,
                   eps0=sc.epsilon_0, mu0=sc.mu_0, system="si")

    def as_dict(self) -> dict:
        return {k: getattr(self, k) for k in
                ("system", "hbar", "m", "q", "e", "c", "eps0", "mu0",
                 "lambda_C", "omega_C")}


ATOMIC = PhysicalConstants.atomic()
SI = PhysicalConstants.si()

_BOHR = sc.physical_constants["Bohr radius"][0]
_HARTREE = sc.physical_constants["Hartree energy"][0]
_AU_TIME = sc.physical_constants["atomic unit of time"][0]
_AU_FIELD = sc.physical_constants["atomic unit of electric field"][0]

# SI value of one atomic unit, per dimension
DIMENSIONS = {
    "length": _BOHR,
    "time": _AU_TIME,
    "energy": _HARTREE,
    "electric field": _AU_FIELD,
    "fluence": _HARTREE / _BOHR**2,
    "frequency": 1.0 / _AU_TIME,
    "wavenumber": 1.0 / _BOHR,
    "magnetic field": sc.physical_constants["atomic unit of mag. flux density"][0],
    "vector potential": _AU_FIELD * _AU_TIME,
}

# unit symbol -> (dimension, SI value of one unit)
_UNITS = {
    "m": ("length", 1.0),
    "cm": ("length", 1e-2),
    "mm": ("length", 1e-3),
    "um": ("length", 1e-6),
    "nm": ("length", 1e-9),
    "pm": ("length", 1e-12),
    "angstrom": ("length", 1e-10),
    "A": ("length", 1e-10),
    "bohr": ("length", _BOHR),
    "s": ("time", 1.0),
    "ps": ("time", 1e-12),
    "fs": ("time", 1e-15),
    "as": ("time", 1e-18),
    "au_time": ("time", _AU_TIME),
    "J": ("energy", 1.0),
    "eV": ("energy", sc.electron_volt),
    "meV": ("energy", 1e-3 * sc.electron_volt),
    "hartree": ("energy", _HARTREE),
    "V/m": ("electric field", 1.0),
    "V/nm": ("electric field", 1e9),
    "au_field": ("electric field", _AU_FIELD),
    "J/m2": ("fluence", 1.0),
    "mJ/cm2": ("fluence", 1e-3 / 1e-4),
    "J/cm2": ("fluence", 1.0 / 1e-4),
    "rad/s": ("frequency", 1.0),
    "1/s": ("frequency", 1.0),
    "rad/fs": ("frequency", 1e15),
    "Hz": ("frequency", 2.0 * math.pi),
    "THz": ("frequency", 2.0 * math.pi * 1e12),
    "au_frequency": ("frequency", 1.0 / _AU_TIME),
    "1/m": ("wavenumber", 1.0),
    "1/nm": ("wavenumber", 1e9),
    "1/A": ("wavenumber", 1e10),
    "1/bohr": ("wavenumber", 1.0 / _BOHR),
    "T": ("magnetic field", 1.0),
    "V*s/m": ("vector potential", 1.0),
    "au_vector_potential": ("vector potential", _AU_FIELD * _AU_TIME),
    "au_magnetic": ("magnetic field", sc.physical_constants["atomic unit of mag. flux density"][0]),
}
_ALIASES = {"Å": "angstrom", "Ang": "angstrom", "bohr_radius": "bohr",
            "a0": "bohr", "Eh": "hartree", "mJ/cm^2": "mJ/cm2",
            "J/m^2": "J/m2", "J/cm^2": "J/cm2", "µm": "um", "Vs/m": "V*s/m",
            "T*m": "V*s/m", "m^-1": "1/m", "nm^-1": "1/nm", "A^-1": "1/A",
            "bohr^-1": "1/bohr"}


def _lookup(unit: str):
    u = _ALIASES.get(unit.strip(), unit.strip())
    try:
        return _UNITS[u]
    except KeyError:
        raise ConfigurationError(f"unknown unit {unit!r}") from None


def to_internal(value, unit: str):
    """Convert ``value`` given in ``unit`` to atomic units."""
    dim, scale = _lookup(unit)
    return value * scale / DIMENSIONS[dim]


def from_internal(value, unit: str):
    """Convert an atomic-unit ``value`` to ``unit``."""
    dim, scale = _lookup(unit)
    return value * DIMENSIONS[dim] / scale


def convert(value, unit: str, target: str = "atomic", dimension: str | None = None):
    """Convert between an explicit unit and a unit system.

    Parameters
    ----------
    value : float or ndarray
    unit : str
        Unit of ``value`` (for example ``"nm"`` or ``"mJ/cm2"``).
    target : {"atomic", "si"}
        Unit system of the result.
    dimension : str, optional
        If given, checked against the dimension implied by ``unit``.
    """
    dim, scale = _lookup(unit)
    if dimension is not None and dimension != dim:
        if dimension not in DIMENSIONS:
            raise ConfigurationError(f"unknown dimension {dimension!r}")
        raise ConfigurationError(f"unit {unit!r} is a {dim}, not a {dimension}")
    if target == "atomic":
        return value * scale / DIMENSIONS[dim]
    if target == "si":
        return value * scale
    raise ConfigurationError(f"unknown unit system {target!r}")


_QTY = re.compile(r"^\s*([-+]?(?:\d+\.?\d*|\.\d+)(?:[eE][-+]?\d+)?)\s*(\S.*)?$")


def parse_quantity(text) -> tuple[float, str | None]:
    """Split ``"50fs"`` or ``"800 nm"`` into ``(50.0, "fs")``."""
    if isinstance(text, (int, float)):
        return float(text), None
    m = _QTY.match(str(text))
    if not m:
        raise ConfigurationError(f"cannot parse quantity {text!r}")
    unit = m.group(2).strip() if m.group(2) else None
    return float(m.group(1)), unit


def quantity(text, dimension: str, default_system: str = "atomic") -> float:
    """Parse ``text`` to an atomic-unit float.

    Bare numbers are interpreted in ``default_system`` (``"atomic"`` or
    ``"si"``); numbers with a unit suffix are converted explicitly.
    """
    if dimension not in DIMENSIONS:
        raise ConfigurationError(f"unknown dimension {dimension!r}")
    value, unit = parse_quantity(text)
    if unit is None:
        if default_system == "atomic":
            return value
        if default_system == "si":
            return value / DIMENSIONS[dimension]
        raise ConfigurationError(f"unknown unit system {default_system!r}")
    return convert(value, unit, "atomic", dimension)
