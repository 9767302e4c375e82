"""Analytic external fields: laser pulses and static fields."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .constants import ATOMIC, SI, PhysicalConstants, to_internal
from .errors import ConfigurationError
from .grid import Grid3

__all__ = ["ExternalFieldSample", "LaserPulse", "StaticField", "evaluate_pulse", "envelope"]

ENVELOPES = ("gaussian", "sin2", "flat")


@dataclass
class ExternalFieldSample:
    """External fields at one instant.

    ``a``, ``e`` and ``b`` are either length-3 arrays (uniform) or
    ``(3, nx, ny, nz)`` fields; ``phi`` and ``div_e`` are floats or scalar
    fields.
    """

    t: float = 0.0
    a: np.ndarray = field(default_factory=lambda: np.zeros(3))
    e: np.ndarray = field(default_factory=lambda: np.zeros(3))
    b: np.ndarray = field(default_factory=lambda: np.zeros(3))
    phi: float | np.ndarray = 0.0
    div_e: float | np.ndarray = 0.0

    def __post_init__(self):
        self.a = np.asarray(self.a, dtype=float)
        self.e = np.asarray(self.e, dtype=float)
        self.b = np.asarray(self.b, dtype=float)

    @property
    def uniform(self) -> bool:
        return self.a.shape == (3,) and self.e.shape == (3,) and self.b.shape == (3,)

    def is_zero(self) -> bool:
        return not (np.any(self.a) or np.any(self.e) or np.any(self.b)
                    or np.any(self.phi) or np.any(self.div_e))

    def scaled(self, s: float) -> "ExternalFieldSample":
        return ExternalFieldSample(self.t, s * self.a, s * self.e, s * self.b,
                                   s * self.phi, s * self.div_e)


def envelope(kind: str, t, center: float, duration: float):
    """Envelope value and time derivative.

    ``gaussian``: ``exp(-2 ln2 (t-t0)^2/dt^2)`` so that ``duration`` is the
    intensity FWHM.  ``sin2``: ``cos^2(pi (t-t0)/duration)`` on
    ``|t - t0| <= duration/2`` and zero outside, so ``duration`` is the full
    support.  ``flat``: 1.
    """
    t = np.asarray(t, dtype=float)
    if kind == "flat":
        return np.ones_like(t), np.zeros_like(t)
    if duration <= 0:
        raise ConfigurationError("pulse duration must be positive")
    x = t - center
    if kind == "gaussian":
        c = 2.0 * math.log(2.0) / duration**2
        f = np.exp(-c * x * x)
        return f, -2.0 * c * x * f
    if kind == "sin2":
        inside = np.abs(x) <= duration / 2
        arg = math.pi * x / duration
        f = np.where(inside, np.cos(arg) ** 2, 0.0)
        df = np.where(inside, -math.pi / duration * np.sin(2 * arg), 0.0)
        return f, df
    raise ConfigurationError(f"unknown envelope {kind!r}")


def _unit(v, what):
    v = np.asarray(v, dtype=float)
    n = np.linalg.norm(v)
    if v.shape != (3,) or n == 0:
        raise ConfigurationError(f"{what} must be a non-zero 3-vector")
    return v / n


@dataclass
class LaserPulse:
    """Linearly polarised pulse ``A = A0 f(t) cos(omega (t - t0) + phase) e``.

    All values are in atomic units.  ``omega`` may be replaced by
    ``wavelength`` (``omega = 2 pi c / lambda``), and ``a0`` by ``fluence``
    (peak field from the fluence relation, then ``A0 = E0/omega``).

    Parameters
    ----------
    a0 : float
        Vector potential amplitude.
    polarization : array_like
        Polarisation direction (normalised on construction).
    omega, wavelength : float
        Carrier angular frequency or wavelength.
    envelope : {"gaussian", "sin2", "flat"}
    duration, center : float
        Envelope duration and centre time.
    carrier_phase : float
    spatial : {"dipole", "plane-wave"}
        ``plane-wave`` evaluates the pulse at the retarded time
        ``t - k.x/c`` and requires ``direction`` orthogonal to the
        polarisation.
    direction : array_like
        Propagation direction for plane-wave mode.
    fluence : float, optional
        Fluence in atomic units (energy/area).
    """

    a0: float = 0.0
    polarization: np.ndarray = field(default_factory=lambda: np.array([1.0, 0.0, 0.0]))
    omega: float | None = None
    wavelength: float | None = None
    envelope: str = "gaussian"
    duration: float = 1.0
    center: float = 0.0
    carrier_phase: float = 0.0
    spatial: str = "dipole"
    direction: np.ndarray = field(default_factory=lambda: np.array([0.0, 0.0, 1.0]))
    fluence: float | None = None
    const: PhysicalConstants = ATOMIC

    def __post_init__(self):
        self.polarization = _unit(self.polarization, "polarization")
        self.direction = _unit(self.direction, "direction")
        if self.envelope not in ENVELOPES:
            raise ConfigurationError(f"unknown envelope {self.envelope!r}")
        if self.spatial not in ("dipole", "plane-wave"):
            raise ConfigurationError(f"unknown spatial dependence {self.spatial!r}")
        if self.omega is None and self.wavelength is None:
            raise ConfigurationError("pulse needs omega or wavelength")
        if self.omega is None:
            self.omega = 2 * math.pi * self.const.c / self.wavelength
        elif self.wavelength is None:
            self.wavelength = 2 * math.pi * self.const.c / self.omega
        elif not math.isclose(self.omega, 2 * math.pi * self.const.c / self.wavelength, rel_tol=1e-9):
            raise ConfigurationError("omega and wavelength are inconsistent")
        if self.spatial == "plane-wave" and abs(self.direction @ self.polarization) > 1e-12:
            raise ConfigurationError("plane-wave polarization must be transverse to the direction")
        if self.fluence is not None:
            from .analysis import fluence_to_field
            from .constants import from_internal
            e_si = fluence_to_field(from_internal(self.fluence, "mJ/cm2"),
                                    from_internal(self.duration, "s"))
            self.a0 = to_internal(e_si, "V/m") / self.omega

    @property
    def e0(self) -> float:
        """Peak field amplitude ``A0 omega`` (slowly varying envelope)."""
        return self.a0 * self.omega

    def _waveform(self, tau):
        f, df = envelope(self.envelope, tau, self.center, self.duration)
        theta = self.omega * (tau - self.center) + self.carrier_phase
        a = self.a0 * f * np.cos(theta)
        e = -self.a0 * (df * np.cos(theta) - self.omega * f * np.sin(theta))
        return a, e

    def sample(self, t: float, grid: Grid3 | None = None) -> ExternalFieldSample:
        eps = self.polarization
        if self.spatial == "dipole":
            a, e = self._waveform(float(t))
            return ExternalFieldSample(float(t), float(a) * eps, float(e) * eps, np.zeros(3))
        if grid is None:
            raise ConfigurationError("plane-wave pulses need a grid to be sampled")
        k = self.direction
        x, y, z = grid.coords
        tau = t - (k[0] * x + k[1] * y + k[2] * z) / self.const.c
        a, e = self._waveform(np.broadcast_to(tau, grid.n))
        avec = eps[:, None, None, None] * a[None]
        evec = eps[:, None, None, None] * e[None]
        kx = np.cross(k, eps)
        bvec = kx[:, None, None, None] * e[None] / self.const.c
        return ExternalFieldSample(float(t), avec, evec, bvec)


@dataclass
class StaticField:
    """Time-independent external fields (uniform vectors, atomic units)."""

    a: np.ndarray = field(default_factory=lambda: np.zeros(3))
    e: np.ndarray = field(default_factory=lambda: np.zeros(3))
    b: np.ndarray = field(default_factory=lambda: np.zeros(3))
    phi: float = 0.0

    def sample(self, t: float, grid: Grid3 | None = None) -> ExternalFieldSample:
        return ExternalFieldSample(float(t), np.array(self.a, float), np.array(self.e, float),
                                   np.array(self.b, float), float(self.phi))


def evaluate_pulse(pulse, t: float, grid: Grid3 | None = None) -> ExternalFieldSample:
    """External fields at time ``t``; ``None`` gives an all-zero sample."""
    if pulse is None:
        return ExternalFieldSample(float(t))
    return pulse.sample(t, grid)
