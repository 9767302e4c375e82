"""Periodic 3D grid, spectral differential operators and spinor bilinears.

Fields are plain numpy arrays whose trailing three axes are the grid axes:

* scalar field: ``(nx, ny, nz)``
* vector field: ``(3, nx, ny, nz)``
* spinor field: ``(2, nx, ny, nz)``
* orbital set: ``(N, 2, nx, ny, nz)``

Every operator checks the trailing shape against its grid and raises
:class:`GridMismatchError` on mismatch.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass
from functools import cached_property

import numpy as np
import scipy.fft as sfft

from .constants import ATOMIC, PhysicalConstants
from .errors import ConfigurationError, GridMismatchError

__all__ = [
    "Grid3",
    "PAULI",
    "probability_density",
    "spin_density",
    "momentum_apply",
    "sigma_dot",
    "norm",
    "boundary_leakage",
    "as_vector",
]

AXES = (-3, -2, -1)

PAULI = np.array([
    [[0, 1], [1, 0]],
    [[0, -1j], [1j, 0]],
    [[1, 0], [0, -1]],
], dtype=complex)


@dataclass(frozen=True)
class Grid3:
    """Uniform periodic grid on a box centred at the origin.

    Parameters
    ----------
    n : tuple of int
        Points per axis.
    box : tuple of float
        Box edge lengths (atomic units).
    workers : int
        Threads handed to ``scipy.fft``; 1 keeps evaluation serial.
    """

    n: tuple
    box: tuple
    workers: int = 1

    def __post_init__(self):
        n = tuple(int(v) for v in np.broadcast_to(self.n, 3))
        box = tuple(float(v) for v in np.broadcast_to(self.box, 3))
        if any(v < 1 for v in n) or any(b <= 0 for b in box):
            raise ConfigurationError(f"invalid grid n={n} box={box}")
        object.__setattr__(self, "n", n)
        object.__setattr__(self, "box", box)

    # geometry -------------------------------------------------------------
    @property
    def shape(self):
        return self.n

    @property
    def spacing(self):
        return tuple(b / k for b, k in zip(self.box, self.n))

    @property
    def dv(self) -> float:
        hx, hy, hz = self.spacing
        return hx * hy * hz

    @property
    def volume(self) -> float:
        return self.box[0] * self.box[1] * self.box[2]

    @property
    def is_cubic_cell(self) -> bool:
        h = self.spacing
        return max(h) - min(h) <= 1e-12 * max(h)

    @cached_property
    def axes(self):
        """1D coordinate arrays, ``x_i = -L/2 + i h``."""
        return tuple(-b / 2 + h * np.arange(k)
                     for b, h, k in zip(self.box, self.spacing, self.n))

    @cached_property
    def coords(self):
        """Broadcastable coordinate arrays ``(x, y, z)``."""
        x, y, z = self.axes
        return (x[:, None, None], y[None, :, None], z[None, None, :])

    def positions(self) -> np.ndarray:
        """Dense ``(3, nx, ny, nz)`` position array."""
        return np.stack(np.broadcast_arrays(*self.coords)).astype(float)

    def displacement(self, center) -> np.ndarray:
        """Minimum-image displacement ``x - center`` as a vector field."""
        out = []
        for c, L, x in zip(center, self.box, self.coords):
            d = x - c
            out.append(d - L * np.round(d / L))
        return np.stack(np.broadcast_arrays(*out)).astype(float)

    def padded(self, factor: int) -> "Grid3":
        """Grid with the same spacing and ``factor`` times more points per axis."""
        return Grid3(tuple(k * factor for k in self.n),
                     tuple(b * factor for b in self.box), self.workers)

    # spectral layout ------------------------------------------------------
    @cached_property
    def k1d(self):
        """Per-axis wavevectors ``2 pi fftfreq(n, h)``."""
        return tuple(2 * np.pi * np.fft.fftfreq(k, d=h)
                     for k, h in zip(self.n, self.spacing))

    @cached_property
    def kvec(self):
        kx, ky, kz = self.k1d
        return (kx[:, None, None], ky[None, :, None], kz[None, None, :])

    @cached_property
    def kvec_odd(self):
        """Wavevectors with the Nyquist entry zeroed, for odd derivatives."""
        out = []
        for k, n in zip(self.k1d, self.n):
            k = k.copy()
            if n % 2 == 0:
                k[n // 2] = 0.0
            out.append(k)
        kx, ky, kz = out
        return (kx[:, None, None], ky[None, :, None], kz[None, None, :])

    @cached_property
    def kstack_odd(self) -> np.ndarray:
        """Dense ``(3, nx, ny, nz)`` array of :attr:`kvec_odd`."""
        return np.stack(np.broadcast_arrays(*self.kvec_odd)).astype(float)

    def kfield(self, ndim: int) -> np.ndarray:
        """:attr:`kstack_odd` reshaped to broadcast against a ``(3, ...)`` stack of
        arrays with ``ndim`` dimensions (including the grid axes)."""
        return self.kstack_odd.reshape((3,) + (1,) * (ndim - 3) + self.n)

    @cached_property
    def k2(self) -> np.ndarray:
        kx, ky, kz = self.kvec
        return kx**2 + ky**2 + kz**2

    # checks -----------------------------------------------------------------
    def check(self, f, lead: tuple = ()) -> np.ndarray:
        f = np.asarray(f)
        if f.shape[-3:] != self.n or (lead and f.shape[:-3] != lead):
            raise GridMismatchError(
                f"field of shape {f.shape} does not match grid {lead + self.n}")
        return f

    def same(self, other: "Grid3") -> bool:
        return self.n == other.n and np.allclose(self.box, other.box, rtol=1e-12, atol=0)

    # transforms ---------------------------------------------------------------
    def fft(self, f):
        return sfft.fftn(f, axes=AXES, workers=self.workers)

    def ifft(self, fh):
        return sfft.ifftn(fh, axes=AXES, workers=self.workers)

    def _rfft_k(self):
        kx, ky, kz = self.kvec_odd
        return kx, ky, kz[..., : self.n[2] // 2 + 1]

    def _pair(self, f):
        """Forward transform plus the matching inverse and odd wavevectors.

        Real input uses the half-spectrum transforms."""
        if np.isrealobj(f):
            n = self.n
            fh = sfft.rfftn(f, axes=AXES, workers=self.workers)
            inv = lambda h: sfft.irfftn(h, s=n, axes=AXES, workers=self.workers)
            return fh, inv, self._rfft_k()
        return self.fft(f), self.ifft, self.kvec_odd

    # differential operators ---------------------------------------------------
    def gradient(self, f):
        """Spectral gradient of a scalar (or stack of scalars) -> leading axis 3."""
        f = self.check(f)
        fh, inv, (kx, ky, kz) = self._pair(f)
        k = np.stack(np.broadcast_arrays(kx, ky, kz))
        k = k.reshape((3,) + (1,) * (f.ndim - 3) + k.shape[1:])
        return inv(1j * k * fh[None])

    def divergence(self, v):
        v = self.check(v, (3,))
        vh, inv, (kx, ky, kz) = self._pair(v)
        return inv(1j * (kx * vh[0] + ky * vh[1] + kz * vh[2]))

    def curl(self, v):
        v = self.check(v, (3,))
        vh, inv, (kx, ky, kz) = self._pair(v)
        ch = 1j * np.stack(np.broadcast_arrays(
            ky * vh[2] - kz * vh[1], kz * vh[0] - kx * vh[2], kx * vh[1] - ky * vh[0]))
        return inv(ch)

    def laplacian(self, f):
        f = self.check(f)
        if np.isrealobj(f):
            fh = sfft.rfftn(f, axes=AXES, workers=self.workers)
            return sfft.irfftn(-self.k2[..., : self.n[2] // 2 + 1] * fh, s=self.n,
                               axes=AXES, workers=self.workers)
        return self.ifft(-self.k2 * self.fft(f))

    # integrals ----------------------------------------------------------------
    def integrate(self, f):
        """Integral over the box along the three trailing axes."""
        return np.asarray(f).sum(axis=AXES) * self.dv

    def inner(self, a, b) -> complex:
        """``<a|b>`` summed over all components."""
        self.check(a)
        self.check(b)
        return complex(np.vdot(a, b) * self.dv)

    def spectral_inner(self, a, b) -> complex:
        """``<a|b>`` evaluated from Fourier coefficients (Parseval)."""
        npts = np.prod(self.n)
        return complex(np.vdot(self.fft(a), self.fft(b)) * self.dv / npts)

    def as_dict(self) -> dict:
        return {"n": list(self.n), "box": list(self.box), "spacing": list(self.spacing)}


def probability_density(phi) -> np.ndarray:
    """``phi^dagger phi`` for a spinor ``(2, ...)`` or orbital set ``(N, 2, ...)``.

    An orbital set is summed over orbitals.
    """
    phi = np.asarray(phi)
    rho = (phi.real**2 + phi.imag**2).sum(axis=-4)
    return rho.sum(axis=0) if rho.ndim == 4 else rho


def spin_density(phi) -> np.ndarray:
    """``phi^dagger sigma phi`` as a real vector field (summed over orbitals)."""
    phi = np.asarray(phi)
    up, dn = phi[..., 0, :, :, :], phi[..., 1, :, :, :]
    cross = np.conj(up) * dn
    s = np.stack([2 * cross.real, 2 * cross.imag,
                  np.abs(up) ** 2 - np.abs(dn) ** 2], axis=-4)
    return s.sum(axis=0) if s.ndim == 5 else s


def momentum_apply(grid: Grid3, phi, const: PhysicalConstants = ATOMIC) -> np.ndarray:
    """``p phi = -i hbar grad phi`` for a spinor; returns shape ``(3, 2, ...)``."""
    phi = grid.check(phi, (2,))
    ph = grid.fft(phi)
    return np.stack([grid.ifft(const.hbar * k * ph) for k in grid.kvec_odd])


def sigma_dot(w, psi) -> np.ndarray:
    """Apply ``sigma . w`` to a spinor.

    ``w`` may be a real vector field ``(3, ...)`` acting on one spinor
    ``psi`` ``(2, ...)``, or ``psi`` may itself carry a Cartesian index
    ``(3, 2, ...)``, in which case ``sum_a sigma_a psi_a`` is returned and
    ``w`` must be ``None``.
    """
    if w is None:
        px, py, pz = psi
        return np.stack([pz[0] + px[1] - 1j * py[1],
                         px[0] + 1j * py[0] - pz[1]])
    wx, wy, wz = w
    up, dn = psi
    return np.stack([wz * up + (wx - 1j * wy) * dn,
                     (wx + 1j * wy) * up - wz * dn])


def norm(grid: Grid3, phi) -> np.ndarray:
    """Per-orbital norms of a spinor or orbital set."""
    phi = np.asarray(phi)
    return (np.abs(phi) ** 2).sum(axis=(-4, -3, -2, -1)) * grid.dv


def boundary_leakage(grid: Grid3, rho, threshold: float = 1e-8, warn: bool = True) -> float:
    """Ratio of the largest density on the box faces to its peak.

    Emits a ``RuntimeWarning`` when the ratio exceeds ``threshold``.
    """
    rho = np.abs(np.asarray(rho))
    peak = rho.max()
    if peak == 0:
        return 0.0
    faces = max(rho[0].max(), rho[:, 0].max(), rho[:, :, 0].max(),
                rho[-1].max(), rho[:, -1].max(), rho[:, :, -1].max())
    ratio = float(faces / peak)
    if warn and ratio > threshold:
        warnings.warn(f"density at the box boundary is {ratio:.2e} of peak; "
                      "enlarge the box", RuntimeWarning, stacklevel=2)
    return ratio


def as_vector(grid: Grid3, v) -> np.ndarray:
    """Return ``v`` broadcastable against vector fields on ``grid``.

    A length-3 sequence (uniform vector) becomes shape ``(3, 1, 1, 1)``; a
    vector field is shape-checked and returned unchanged.
    """
    v = np.asarray(v, dtype=float)
    if v.shape == (3,):
        return v.reshape(3, 1, 1, 1)
    if v.shape == (3, 1, 1, 1):
        return v
    return grid.check(v, (3,))


def cross(a, b) -> np.ndarray:
    """Pointwise cross product of vector fields along the leading axis."""
    return np.stack(np.broadcast_arrays(a[1] * b[2] - a[2] * b[1],
                                        a[2] * b[0] - a[0] * b[2],
                                        a[0] * b[1] - a[1] * b[0]))


def dot(a, b) -> np.ndarray:
    return a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
