"""Pauli Hamiltonian at order 1/c^2, applied term by term.

Every term is one of four operator kinds acting on a spinor ``phi``:

``local``   ``V phi`` with a real scalar ``V``
``sigma``   ``sigma . W phi`` with a real vector ``W``
``ap``      ``(A.p + p.A)/2 phi`` (Weyl-symmetrised, Hermitian on the grid)
``soc``     ``sigma . [E x p - p x E]/2 phi`` (Hermitian part of ``sigma.(E x p)``)

The momentum is the spectral ``p = -i hbar grad`` with the Nyquist mode
removed, which is Hermitian on the periodic grid, so every term is
Hermitian to round-off.

The kinetic energy ``p^2/2m`` is not a toggleable term; it is always
applied by :func:`apply_hamiltonian`.  The rest energy ``m c^2`` is
dropped from the dynamics.
"""
from __future__ import annotations

import numpy as np

from .constants import ATOMIC, PhysicalConstants
from .errors import ConfigurationError
from .grid import Grid3, as_vector, cross, dot, sigma_dot
from .laser import ExternalFieldSample
from .solvers import PotentialSet
from .terms import COH, EXT, INT, TermId, parse_toggles

__all__ = [
    "apply_term",
    "apply_kinetic",
    "apply_external",
    "apply_internal",
    "apply_coherent",
    "apply_hamiltonian",
    "apply_total_fields",
    "term_energy",
    "term_energies",
    "expectation",
]


def _is_uniform(v) -> bool:
    return np.ndim(v) == 0 or v.shape[1:] == (1, 1, 1)


def _components(term: TermId, grid: Grid3, pot: PotentialSet | None,
                sample: ExternalFieldSample, const: PhysicalConstants):
    """``[(kind, field), ...]`` making up one term."""
    q, m, hb = const.q, const.m, const.hbar
    c2 = m * m * const.c**2
    T = TermId
    group = term.group
    if group != "ext" and pot is None:
        raise ConfigurationError(f"term {term.value!r} needs internal potentials")
    A = as_vector(grid, sample.a)
    if term is T.SCALAR:
        return [("local", q * sample.phi)]
    if term is T.DIPOLE_PA:
        return [("ap", -(q / m) * A)]
    if term is T.DIAMAGNETIC_AA:
        return [("local", q * q / (2 * m) * dot(A, A))]
    if term is T.ZEEMAN_EXT:
        return [("sigma", -(q * hb / (2 * m)) * as_vector(grid, sample.b))]
    if term is T.DARWIN_EXT:
        return [("local", -(q * hb * hb / (8 * c2)) * sample.div_e)]
    if term is T.SOC_EXT:
        # sigma.(E x (p - q A_ext)); the A part vanishes when E is parallel to A
        E = as_vector(grid, sample.e)
        pref = -(q * hb / (4 * c2))
        return [("soc", pref * E), ("sigma", -q * pref * cross(E, A))]

    if term is T.HARTREE:
        return [("local", q * pot.phi0)]
    if term is T.CONTACT_ORB:
        return [("local", q * pot.phi2_orb)]
    if term is T.CONTACT_DARWIN:
        return [("local", (q * hb * hb / (8 * c2)) * pot.lap_phi0)]
    if term is T.DIPOLAR_ORB:
        return [("ap", -(q / m) * pot.a2_orb)]
    if term is T.SOO_ZEEMAN_ORB:
        return [("sigma", -(q * hb / (2 * m)) * pot.b2_orb)]
    if term is T.SOO_PA_SPIN:
        return [("ap", -(q / m) * pot.a2_spin)]
    if term is T.SPIN_SPIN:
        return [("sigma", -(q * hb / (2 * m)) * pot.b2_spin)]
    if term is T.SOC_INT:
        return [("soc", (q * hb / (4 * c2)) * pot.grad_phi0)]
    if term is T.SOC_PHI2_SPIN:
        return [("local", q * pot.phi2_spin)]

    if term is T.PHI2_FIELD:
        return [("local", q * pot.phi2_field)]
    if term is T.PA_FIELD:
        return [("ap", -(q / m) * pot.a2_field)]
    if term is T.AA_ORB:
        return [("local", (q * q / m) * dot(A, pot.a2_orb))]
    if term is T.AA_FIELD:
        return [("local", (q * q / m) * dot(A, pot.a2_field))]
    if term is T.AA_SPIN:
        return [("local", (q * q / m) * dot(A, pot.a2_spin))]
    if term is T.ZEEMAN_FIELD:
        return [("sigma", -(q * hb / (2 * m)) * pot.b2_field)]
    if term is T.SOC_EXT_INT:
        return [("sigma", -(q * q * hb / (4 * c2)) * cross(pot.grad_phi0, A))]
    raise ConfigurationError(f"unknown term {term!r}")


class _Applier:
    """Applies operator kinds to one spinor, sharing ``p phi``.

    Methods return the real-space part of their result and add any part
    that ends with a momentum operator to ``acc`` (in Fourier space), so a
    sum of terms needs a single inverse transform.
    """

    def __init__(self, grid: Grid3, phi, const: PhysicalConstants):
        self.grid = grid
        self.phi = grid.check(phi, (2,))
        self.const = const
        self._ph = None
        self._pphi = None

    @property
    def phi_hat(self):
        if self._ph is None:
            self._ph = self.grid.fft(self.phi)
        return self._ph

    @property
    def pphi(self):
        if self._pphi is None:
            k = self.grid.kfield(4)
            self._pphi = self.grid.ifft(self.const.hbar * k * self.phi_hat[None])
        return self._pphi

    def new_acc(self):
        return np.zeros((2,) + self.grid.n, dtype=complex)

    def kinetic(self, acc=None):
        c = self.const.hbar**2 / (2 * self.const.m)
        if acc is None:
            return self.grid.ifft(c * self.grid.k2 * self.phi_hat)
        acc += c * self.grid.k2 * self.phi_hat
        return 0.0

    def local(self, v, acc=None):
        return v * self.phi

    def sigma(self, w, acc=None):
        return sigma_dot(w, self.phi)

    def ap(self, a, acc=None):
        pp = self.pphi
        direct = a[0] * pp[0] + a[1] * pp[1] + a[2] * pp[2]
        if _is_uniform(a):
            return direct
        own = acc is None
        acc = self.new_acc() if own else acc
        g = self.grid
        uh = g.fft(a[:, None] * self.phi[None])
        kx, ky, kz = g.kvec_odd
        acc += (0.5 * self.const.hbar) * (kx * uh[0] + ky * uh[1] + kz * uh[2])
        return 0.5 * direct + (g.ifft(acc) if own else 0.0)

    def soc(self, e, acc=None):
        pp = self.pphi
        exp_ = _cross3(e, pp)
        if _is_uniform(e):
            return sigma_dot(None, exp_)
        own = acc is None
        acc = self.new_acc() if own else acc
        g = self.grid
        uh = g.fft(e[:, None] * self.phi[None])
        # sigma is a constant matrix, so sigma.(p x (E phi)) is formed in k-space
        acc -= (0.5 * self.const.hbar) * sigma_dot(None, _cross3(g.kvec_odd, uh))
        return 0.5 * sigma_dot(None, exp_) + (g.ifft(acc) if own else 0.0)

    def apply(self, kind, f, acc=None):
        return getattr(self, kind)(f, acc)


def _cross3(a, b):
    """``a x b`` for a 3-vector ``a`` (arrays or broadcastable) and a stack ``b``
    with a leading Cartesian axis of spinors."""
    ax, ay, az = a[0], a[1], a[2]
    out = np.empty((3,) + np.broadcast_shapes(np.shape(b)[1:], np.shape(ax)),
                   dtype=np.result_type(b, ax))
    out[0] = ay * b[2] - az * b[1]
    out[1] = az * b[0] - ax * b[2]
    out[2] = ax * b[1] - ay * b[0]
    return out


def _zeros(grid):
    return np.zeros((2,) + grid.n, dtype=complex)


def _accumulate(comps, grid, app, kinetic=False):
    """Group components by kind and apply each kind once."""
    total = {}
    for kind, f in comps:
        total[kind] = f if kind not in total else total[kind] + f
    acc = app.new_acc()
    out = _zeros(grid)
    for kind, f in total.items():
        if np.any(f):
            out = out + app.apply(kind, f, acc)
    if kinetic:
        app.kinetic(acc)
    return out + grid.ifft(acc)


def _terms(group, toggles):
    toggles = parse_toggles(toggles)
    return [t for t in group if toggles[t]]


def _sample(sample):
    return ExternalFieldSample() if sample is None else sample


def apply_term(term, grid: Grid3, phi, potentials=None, sample=None,
               const: PhysicalConstants = ATOMIC) -> np.ndarray:
    """Apply a single :class:`TermId` to ``phi``."""
    term = TermId(term)
    app = _Applier(grid, phi, const)
    out = _zeros(grid)
    for kind, f in _components(term, grid, potentials, _sample(sample), const):
        if np.any(f):
            out = out + app.apply(kind, f)
    return out


def apply_kinetic(grid: Grid3, phi, const: PhysicalConstants = ATOMIC) -> np.ndarray:
    return _Applier(grid, phi, const).kinetic()


def _apply_group(group, grid, phi, potentials, sample, const, toggles):
    sample = _sample(sample)
    comps = []
    for t in _terms(group, toggles):
        comps.extend(_components(t, grid, potentials, sample, const))
    return _accumulate(comps, grid, _Applier(grid, phi, const))


def apply_external(grid: Grid3, phi, sample=None, const: PhysicalConstants = ATOMIC,
                   toggles=None) -> np.ndarray:
    """Single-electron terms in the external field, summed."""
    return _apply_group(EXT, grid, phi, None, sample, const, toggles)


def apply_internal(grid: Grid3, phi, potentials: PotentialSet,
                   const: PhysicalConstants = ATOMIC, toggles=None) -> np.ndarray:
    """Mean internal interaction terms, summed."""
    if potentials is None:
        raise ConfigurationError("internal terms need a PotentialSet")
    return _apply_group(INT, grid, phi, potentials, None, const, toggles)


def apply_coherent(grid: Grid3, phi, potentials: PotentialSet, sample=None,
                   const: PhysicalConstants = ATOMIC, toggles=None) -> np.ndarray:
    """Coherent light-induced mean-field terms, summed."""
    if potentials is None:
        raise ConfigurationError("coherent terms need a PotentialSet")
    return _apply_group(COH, grid, phi, potentials, sample, const, toggles)


def apply_hamiltonian(grid: Grid3, phi, potentials=None, sample=None,
                      const: PhysicalConstants = ATOMIC, toggles=None,
                      kinetic: bool = True) -> np.ndarray:
    """Kinetic energy plus every enabled term, grouped by operator kind."""
    sample = _sample(sample)
    groups = EXT + ((INT + COH) if potentials is not None else ())
    comps = []
    for t in _terms(groups, toggles):
        comps.extend(_components(t, grid, potentials, sample, const))
    return _accumulate(comps, grid, _Applier(grid, phi, const), kinetic)


def apply_total_fields(grid: Grid3, phi, potentials: PotentialSet, sample=None,
                       const: PhysicalConstants = ATOMIC) -> np.ndarray:
    """Full Hamiltonian assembled from total potentials, all terms on.

    ``(p - qA)^2/2m + q Phi - (q hbar/2m) sigma.B
    - (q hbar^2/8m^2c^2) div E - (q hbar/4m^2c^2) sigma.(E x (p - qA))``

    with ``A = A_ext + A_int``, ``Phi = Phi_ext + Phi_int``,
    ``B = B_ext + curl A_int`` and ``E = E_ext - grad Phi0``, truncated at
    order 1/c^2 (``A_int^2`` and ``A_int`` inside the spin-orbit term are
    dropped).  Independent grouping of the same physics as
    :func:`apply_hamiltonian`, used as a bookkeeping check.
    """
    sample = _sample(sample)
    q, m, hb = const.q, const.m, const.hbar
    c2 = m * m * const.c**2
    app = _Applier(grid, phi, const)
    a_ext = as_vector(grid, sample.a)
    a_int = potentials.a2_total
    a_tot = a_ext + a_int
    phi_tot = sample.phi + potentials.phi0 + potentials.phi2_total
    b_tot = as_vector(grid, sample.b) + potentials.b2_orb + potentials.b2_spin + potentials.b2_field
    e_tot = as_vector(grid, sample.e) - potentials.grad_phi0
    div_e = sample.div_e - potentials.lap_phi0
    out = app.kinetic()
    out = out + app.ap(-(q / m) * np.broadcast_to(a_tot, (3,) + grid.n))
    a2 = dot(a_ext, a_ext) + 2 * dot(a_ext, a_int)
    out = out + app.local(q * q / (2 * m) * a2 + q * phi_tot - q * hb * hb / (8 * c2) * div_e)
    out = out + app.sigma(-(q * hb / (2 * m)) * b_tot)
    soc = -(q * hb / (4 * c2))
    out = out + app.soc(soc * np.broadcast_to(e_tot, (3,) + grid.n))
    out = out + app.sigma(-q * soc * cross(e_tot, a_ext))
    return out


def expectation(grid: Grid3, phi, hphi) -> complex:
    return grid.inner(phi, hphi)


def term_energy(term, grid: Grid3, phi, potentials=None, sample=None,
                const: PhysicalConstants = ATOMIC) -> float:
    """``<phi|O_term|phi>`` (real part; the imaginary part is round-off)."""
    return grid.inner(phi, apply_term(term, grid, phi, potentials, sample, const)).real


def term_energies(grid: Grid3, phi, potentials=None, sample=None,
                  const: PhysicalConstants = ATOMIC, toggles=None,
                  groups=(EXT, INT, COH)) -> dict:
    """Energies of every enabled term plus ``"kinetic"``; disabled terms give 0.

    The momentum applied to ``phi`` is shared across all terms.
    """
    sample = _sample(sample)
    app = _Applier(grid, phi, const)
    enabled = set(_terms(tuple(t for g in groups for t in g), toggles))
    out = {"kinetic": grid.inner(phi, app.kinetic()).real}
    for g in groups:
        for t in g:
            if t not in enabled or (t.group != "ext" and potentials is None):
                out[t] = 0.0
                continue
            val = 0.0
            for kind, f in _components(t, grid, potentials, sample, const):
                if np.any(f):
                    val += grid.inner(phi, app.apply(kind, f)).real
            out[t] = val
    return out
