"""Charge and current densities expanded to order 1/c^2.

All functions accept an orbital set of shape ``(N, 2, nx, ny, nz)`` and an
optional ``exclude`` argument (an index or a collection of indices) naming
orbitals left out of the sums.  Currents use the Hermitian form, so every
returned density is real.
"""
from __future__ import annotations

from dataclasses import dataclass, field, fields

import numpy as np
from scipy import fft as sp_fft

from .constants import ATOMIC, PhysicalConstants
from .errors import ConfigurationError
from .grid import Grid3, as_vector, cross, probability_density, spin_density

__all__ = [
    "SourceSet",
    "select",
    "charge_density0",
    "orbital_current",
    "spin_current",
    "field_current",
    "rho2_orbital",
    "rho2_spin",
    "rho2_field",
    "current2_diagnostic",
    "build_sources",
    "current_divergence",
]


def _as_set(grid: Grid3, orbitals) -> np.ndarray:
    orbitals = np.asarray(orbitals)
    if orbitals.ndim == 4:
        orbitals = orbitals[None]
    if orbitals.ndim != 5 or orbitals.shape[1] != 2:
        raise ConfigurationError(f"orbital set must have shape (N, 2, nx, ny, nz), got {orbitals.shape}")
    grid.check(orbitals)
    return orbitals


def select(grid: Grid3, orbitals, exclude=None) -> np.ndarray:
    """Orbitals that remain after removing the ``exclude`` indices."""
    orbitals = _as_set(grid, orbitals)
    if exclude is None:
        return orbitals
    idx = {int(exclude)} if np.isscalar(exclude) else {int(i) for i in exclude}
    n = orbitals.shape[0]
    bad = [i for i in idx if not 0 <= i < n]
    if bad:
        raise ConfigurationError(f"exclusion index {bad} out of range for {n} orbitals")
    keep = [i for i in range(n) if i not in idx]
    return orbitals[keep]


def _gradients(grid: Grid3, orbitals) -> np.ndarray:
    """Spectral gradient of every spinor component: ``(3, N, 2, ...)``."""
    oh = grid.fft(orbitals)
    return np.stack([grid.ifft(1j * k * oh) for k in grid.kvec_odd])


def charge_density0(grid: Grid3, orbitals, exclude=None) -> np.ndarray:
    """Leading-order density ``sum_i phi_i^dagger phi_i``."""
    return _density(grid, select(grid, orbitals, exclude))


def _orbital_current(orbs, grads, const):
    im = np.imag(np.conj(orbs)[None] * grads).sum(axis=(1, 2))
    return const.hbar / const.m * im


def orbital_current(grid: Grid3, orbitals, exclude=None,
                    const: PhysicalConstants = ATOMIC) -> np.ndarray:
    """``(hbar/m) Im(phi^dagger grad phi)`` summed over orbitals."""
    orbs = select(grid, orbitals, exclude)
    return _orbital_current(orbs, _gradients(grid, orbs), const)


def spin_current(grid: Grid3, orbitals, exclude=None,
                 const: PhysicalConstants = ATOMIC) -> np.ndarray:
    """``(hbar/2m) curl(phi^dagger sigma phi)``."""
    s = _spin(grid, select(grid, orbitals, exclude))
    return const.hbar / (2 * const.m) * grid.curl(s)


def field_current(grid: Grid3, orbitals, a_ext, exclude=None,
                  const: PhysicalConstants = ATOMIC) -> np.ndarray:
    """``-(q/m) rho0 A_ext``."""
    rho = _density(grid, select(grid, orbitals, exclude))
    a = as_vector(grid, a_ext)
    return np.broadcast_to(-(const.q / const.m) * rho[None] * a, (3,) + grid.n).copy()


def rho2_orbital(grid: Grid3, orbitals, exclude=None,
                 const: PhysicalConstants = ATOMIC) -> np.ndarray:
    """Darwin-type density ``(hbar^2/8 m^2 c^2) lap rho0``."""
    rho = _density(grid, select(grid, orbitals, exclude))
    return const.hbar**2 / (8 * const.m**2 * const.c**2) * grid.laplacian(rho)


def _spin_vorticity(orbs, grads):
    """``V_a = eps_abc Im(phi^dagger sigma_b d_c phi)`` summed over orbitals."""
    up, dn = np.conj(orbs[:, 0]), np.conj(orbs[:, 1])
    gu, gd = grads[:, :, 0], grads[:, :, 1]
    # M[b][c] = Im(phi^dagger sigma_b d_c phi)
    mx = np.imag(up * gd + dn * gu).sum(axis=1)
    my = np.imag(-1j * up * gd + 1j * dn * gu).sum(axis=1)
    mz = np.imag(up * gu - dn * gd).sum(axis=1)
    return np.stack([my[2] - mz[1], mz[0] - mx[2], mx[1] - my[0]])


def rho2_spin(grid: Grid3, orbitals, exclude=None,
              const: PhysicalConstants = ATOMIC) -> np.ndarray:
    """Spin-orbit density ``(hbar^2/4 m^2 c^2) div V``.

    ``V_a = eps_abc Im(phi^dagger sigma_b d_c phi)`` is the Hermitian
    spin-orbit vorticity of the orbital set.
    """
    orbs = select(grid, orbitals, exclude)
    v = _spin_vorticity(orbs, _gradients(grid, orbs))
    return const.hbar**2 / (4 * const.m**2 * const.c**2) * grid.divergence(v)


def rho2_field(grid: Grid3, orbitals, a_ext, exclude=None,
               const: PhysicalConstants = ATOMIC) -> np.ndarray:
    """Field-induced density ``-(q hbar/4 m^2 c^2) div(s x A_ext)``."""
    s = _spin(grid, select(grid, orbitals, exclude))
    a = as_vector(grid, a_ext)
    pref = -const.q * const.hbar / (4 * const.m**2 * const.c**2)
    return pref * grid.divergence(np.ascontiguousarray(cross(s, a)))


def _density(grid, orbs):
    return probability_density(orbs) if orbs.shape[0] else np.zeros(grid.n)


def _spin(grid, orbs):
    return spin_density(orbs) if orbs.shape[0] else np.zeros((3,) + grid.n)


def current2_diagnostic(grid: Grid3, orbitals, e_field, a_field, *, before=None,
                        after=None, dt=None, a_before=None, a_after=None,
                        time_terms: bool = True, exclude=None,
                        const: PhysicalConstants = ATOMIC) -> np.ndarray:
    """Order-1/c^2 current, for diagnostics only.

    ``j2 = -(q hbar/4m^2c^2) s x E - (hbar^2/8m^2c^2) d_t grad rho0
    - (hbar^2/4m^2c^2) d_t V + (q hbar/4m^2c^2) d_t (s x A)``

    Time derivatives are centred differences between the ``before`` and
    ``after`` snapshots (spanning ``2 dt``) or, when ``before`` is omitted,
    forward differences between ``orbitals`` and ``after`` (spanning
    ``dt``).  ``a_before``/``a_after`` give the vector potential at the
    snapshot times and default to ``a_field``.

    This current is never used as a field source.
    """
    orbs = select(grid, orbitals, exclude)
    pref = const.q * const.hbar / (4 * const.m**2 * const.c**2)
    e = as_vector(grid, e_field)
    s = _spin(grid, orbs)
    out = -pref * cross(s, e)
    out = np.broadcast_to(out, (3,) + grid.n).copy()
    if not time_terms:
        return out
    if after is None or dt is None:
        raise ConfigurationError("time-derivative terms need an 'after' snapshot and dt")
    a_after = a_field if a_after is None else a_after
    if before is None:
        first, span, a_first = orbs, dt, a_field
    else:
        first, span = select(grid, before, exclude), 2 * dt
        a_first = a_field if a_before is None else a_before
    last = select(grid, after, exclude)

    def quantities(o, a):
        rho = _density(grid, o)
        v = _spin_vorticity(o, _gradients(grid, o)) if o.shape[0] else np.zeros((3,) + grid.n)
        return grid.gradient(rho), v, cross(_spin(grid, o), as_vector(grid, a))

    g1, v1, sa1 = quantities(first, a_first)
    g2, v2, sa2 = quantities(last, a_after)
    c2 = const.m**2 * const.c**2
    out -= const.hbar**2 / (8 * c2) * (g2 - g1) / span
    out -= const.hbar**2 / (4 * c2) * (v2 - v1) / span
    out += pref * (sa2 - sa1) / span
    return out


@dataclass
class SourceSet:
    """Expanded densities of a set of orbitals.

    Attributes
    ----------
    rho0 : ndarray
        Leading-order density.
    j_orb, j_spin, j_field : ndarray
        Orbital, spin (curl) and field-induced currents.
    rho2_orb, rho2_spin, rho2_field : ndarray
        Order-1/c^2 densities.
    j2 : ndarray or None
        Diagnostic order-1/c^2 current.
    exclusion : tuple
        Orbital indices left out of the sums.
    """

    rho0: np.ndarray
    j_orb: np.ndarray
    j_spin: np.ndarray
    j_field: np.ndarray
    rho2_orb: np.ndarray
    rho2_spin: np.ndarray
    rho2_field: np.ndarray
    j2: np.ndarray | None = None
    exclusion: tuple = field(default=())

    _ARRAYS = ("rho0", "j_orb", "j_spin", "j_field", "rho2_orb", "rho2_spin", "rho2_field")

    @property
    def j0(self) -> np.ndarray:
        return self.j_orb + self.j_spin + self.j_field

    def __add__(self, other: "SourceSet") -> "SourceSet":
        kw = {k: getattr(self, k) + getattr(other, k) for k in self._ARRAYS}
        return SourceSet(**kw, exclusion=())

    @classmethod
    def zeros(cls, grid: Grid3) -> "SourceSet":
        s, v = np.zeros(grid.n), np.zeros((3,) + grid.n)
        return cls(s, v, v.copy(), v.copy(), s.copy(), s.copy(), s.copy())

    def integrals(self, grid: Grid3) -> dict:
        return {f.name: grid.integrate(getattr(self, f.name))
                for f in fields(self) if f.name in self._ARRAYS}


def build_sources(grid: Grid3, orbitals, a_ext=None, exclude=None,
                  const: PhysicalConstants = ATOMIC) -> SourceSet:
    """All seven densities of the selected orbitals, sharing one gradient pass."""
    orbs = select(grid, orbitals, exclude)
    excl = () if exclude is None else tuple(np.atleast_1d(exclude).tolist())
    if orbs.shape[0] == 0:
        out = SourceSet.zeros(grid)
        out.exclusion = excl
        return out
    a = as_vector(grid, np.zeros(3) if a_ext is None else a_ext)
    grads = _gradients(grid, orbs)
    rho = probability_density(orbs)
    s = spin_density(orbs)
    c2 = const.m**2 * const.c**2
    j_orb = _orbital_current(orbs, grads, const)
    j_spin = const.hbar / (2 * const.m) * grid.curl(s)
    j_field = np.broadcast_to(-(const.q / const.m) * rho[None] * a, (3,) + grid.n).copy()
    r2o = const.hbar**2 / (8 * c2) * grid.laplacian(rho)
    r2s = const.hbar**2 / (4 * c2) * grid.divergence(_spin_vorticity(orbs, grads))
    r2f = -const.q * const.hbar / (4 * c2) * grid.divergence(
        np.ascontiguousarray(np.broadcast_to(cross(s, a), (3,) + grid.n)))
    return SourceSet(rho, j_orb, j_spin, j_field, r2o, r2s, r2f, exclusion=excl)


def _upsample(grid: Grid3, f, fine: Grid3):
    """Trigonometric interpolation of ``f`` onto ``fine`` (twice the points).

    Axis by axis; the Nyquist coefficient of an even axis is split evenly
    between the two matching modes of the fine grid, which is the real
    interpolant of a real signal.
    """
    out = np.asarray(f, dtype=complex)
    for ax in (-3, -2, -1):
        n = out.shape[ax]
        fh = sp_fft.fft(out, axis=ax, workers=grid.workers)
        shape = list(fh.shape)
        shape[ax] = 2 * n
        big = np.zeros(shape, dtype=complex)
        h = n // 2
        lo = [slice(None)] * fh.ndim
        hi = [slice(None)] * fh.ndim
        lo[ax] = slice(0, n - h)
        hi[ax] = slice(n - h, n)
        big[tuple(lo)] = fh[tuple(lo)]
        dst = [slice(None)] * fh.ndim
        dst[ax] = slice(2 * n - h, 2 * n)
        big[tuple(dst)] = fh[tuple(hi)]
        if n % 2 == 0:
            nyq = [slice(None)] * fh.ndim
            nyq[ax] = h
            mirror = [slice(None)] * fh.ndim
            mirror[ax] = 2 * n - h
            big[tuple(nyq)] = 0.5 * fh[tuple(nyq)]
            big[tuple(mirror)] = 0.5 * fh[tuple(nyq)]
        out = sp_fft.ifft(big, axis=ax, workers=grid.workers) * 2
    return out


def current_divergence(grid: Grid3, orbitals, a_ext=None, exclude=None,
                       const: PhysicalConstants = ATOMIC) -> np.ndarray:
    """``div j0`` of the band-limited orbitals, free of product aliasing.

    The orbitals are interpolated onto a grid with twice the points per
    axis, where the quadratic currents are represented exactly; the
    divergence is taken there and sampled back at the original points.
    """
    orbs = select(grid, orbitals, exclude)
    if orbs.shape[0] == 0:
        return np.zeros(grid.n)
    fine = Grid3(tuple(2 * n for n in grid.n), grid.box, grid.workers)
    of = _upsample(grid, orbs, fine)
    if not np.iscomplexobj(orbitals):
        of = of.real
    j = _orbital_current(of, _gradients(fine, of), const)
    j = j + const.hbar / (2 * const.m) * fine.curl(spin_density(of))
    if a_ext is not None:
        a = np.asarray(a_ext, dtype=float)
        a = as_vector(fine, a) if a.shape == (3,) else _upsample(grid, a, fine).real
        j = j - (const.q / const.m) * probability_density(of)[None] * a
    return fine.divergence(j)[..., ::2, ::2, ::2]
