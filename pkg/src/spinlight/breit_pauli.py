"""Breit-Pauli pair interaction evaluated by direct kernel quadrature.

This is an independent route to the coherent light-induced mean field:
instead of solving field equations, every interaction is written as a
real-space kernel integral over the other electrons' densities

* ``D(r) = delta/r + r r/r^3`` for the momentum-momentum couplings,
* ``G(r) = r/r^3`` for the spin-orbit couplings,
* ``1/r`` and the dipolar tensor for the spin-free and spin-spin blocks,

and integrated with :mod:`spinlight.kernels` (zero-padded convolution, or
an explicit double sum on small grids).  Comparing the resulting term
energies with those of :mod:`spinlight.hamiltonian` (fields from
:mod:`spinlight.solvers`) validates every coherent term.

Momenta enter through the Hermitian densities ``Re(phi^+ p phi)`` and
``Re(phi^+ sigma_a p_c phi)``; the minimal substitution ``p -> p - qA``
shifts them by ``-q rho A`` and ``-q A_c s_a``.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np

from . import kernels
from .constants import ATOMIC, PhysicalConstants
from .errors import ConfigurationError, OutputError, QuadratureError
from .grid import Grid3, cross, dot, momentum_apply, norm, probability_density, spin_density
from .hamiltonian import term_energy
from .laser import ExternalFieldSample
from .solvers import SolverConfig, assemble_potentials
from .sources import build_sources
from .terms import COH, TermId

__all__ = ["PairConfiguration", "hartree_reduce", "oracle_term_energies", "route1_term_energies",
           "bp_pair_energy", "bp_field_corrections", "ADDEND_TERMS", "validate",
           "write_report", "softening_sensitivity", "SCALE_FLOOR"]

QUADRATURES = ("grid-convolution", "direct")
SCALE_FLOOR = 1e-12  # hartree

# Levi-Civita triples (a, b, c, sign)
_EPS = [(0, 1, 2, 1), (1, 2, 0, 1), (2, 0, 1, 1), (0, 2, 1, -1), (2, 1, 0, -1), (1, 0, 2, -1)]

# which coherent term each addend of the field-dressed pair operator becomes
# after Hartree reduction onto the first particle of the ordered pair
ADDEND_TERMS = {
    "p_i.qA/r": TermId.PA_FIELD,
    "qA.p_j/r": TermId.AA_ORB,
    "-qqAA/r": TermId.AA_FIELD,
    "sigma_j,2q_iA": TermId.AA_SPIN,
    "sigma_j,-q_jA": TermId.PHI2_FIELD,
    "sigma_i,-2q_jA": TermId.ZEEMAN_FIELD,
    "sigma_i,q_iA": TermId.SOC_EXT_INT,
}


@dataclass
class PairConfiguration:
    """Orbitals plus the settings of one oracle evaluation.

    Parameters
    ----------
    grid : Grid3
    orbitals : ndarray
        ``(N, 2, nx, ny, nz)`` normalised spinors; pair quantities need
        ``N = 2``.
    a_ext : array_like
        Uniform external vector potential (atomic units).
    quadrature : {"grid-convolution", "direct"}
        ``direct`` is the explicit double sum, capped at 24^3 points.
    softening : float
        Kernel softening length shared with the field route.
    padding_factor : int
        Zero padding of the convolution (2 gives the free-space sum).
    """

    grid: Grid3
    orbitals: np.ndarray
    a_ext: np.ndarray = None
    quadrature: str = "grid-convolution"
    softening: float = 0.0
    padding_factor: int = 2

    def __post_init__(self):
        self.orbitals = np.asarray(self.orbitals, dtype=complex)
        if self.orbitals.ndim != 5 or self.orbitals.shape[1] != 2:
            raise ConfigurationError("orbitals must have shape (N, 2, nx, ny, nz)")
        self.grid.check(self.orbitals[0], (2,))
        n = norm(self.grid, self.orbitals)
        if n.size and np.abs(n - 1).max() > 1e-6:
            raise ConfigurationError(f"orbitals are not normalised (norms {n})")
        self.a_ext = np.zeros(3) if self.a_ext is None else np.asarray(self.a_ext, dtype=float)
        if self.a_ext.shape != (3,):
            raise ConfigurationError("a_ext must be a uniform 3-vector")
        if self.quadrature in ("direct-sum", "double-sum"):
            self.quadrature = "direct"
        if self.quadrature not in QUADRATURES:
            raise ConfigurationError(f"unknown quadrature {self.quadrature!r}")
        if not self.softening >= 0:
            raise ConfigurationError("softening must be >= 0")

    @property
    def size(self) -> int:
        return self.orbitals.shape[0]

    def swapped(self) -> "PairConfiguration":
        return PairConfiguration(self.grid, self.orbitals[::-1].copy(), self.a_ext,
                                 self.quadrature, self.softening, self.padding_factor)

    def with_a(self, a_ext) -> "PairConfiguration":
        return PairConfiguration(self.grid, self.orbitals, a_ext, self.quadrature,
                                 self.softening, self.padding_factor)

    def solver_config(self) -> SolverConfig:
        """Field-route solver sharing this configuration's softening."""
        return SolverConfig(padding_factor=self.padding_factor, softening=self.softening)

    @classmethod
    def from_scenario(cls, scn) -> "PairConfiguration":
        bp = scn.breit_pauli
        return cls(scn.grid, scn.initial_orbitals(), np.array(bp.a_ext), bp.quadrature,
                   bp.softening, bp.padding_factor)

    def flags(self) -> list:
        h = min(self.grid.spacing)
        out = []
        if 0 < self.softening < 1.5 * h:
            out.append(f"softening {self.softening:.3g} is below 1.5 grid spacings; "
                       "the sampled kernel is under-resolved")
        if self.padding_factor < 2:
            out.append("padding_factor 1 includes periodic images")
        return out


def _smeared_delta() -> kernels.Kernel:
    """``3 a^2 / (4 pi s^5)``, the softened point contact."""
    def sample(dx, dy, dz, s):
        a2 = s**2 - (dx**2 + dy**2 + dz**2)
        return [3.0 * a2 / (4.0 * math.pi * s**5)]

    return kernels.Kernel("smeared_delta", 1, sample, lambda h: [0.0])


class _Quadrature:
    """Kernel integrals ``int K(x - x') f(x') dx'`` for one configuration."""

    def __init__(self, cfg: PairConfiguration):
        self.grid = cfg.grid
        self.a = float(cfg.softening)
        self.padding = cfg.padding_factor
        self.direct = cfg.quadrature == "direct"

    def __call__(self, f, kernel):
        if self.direct:
            return kernels.direct_sum(self.grid, f, kernel, self.a)
        return kernels.convolve(self.grid, f, kernel, self.a, self.padding)

    def coulomb(self, f):
        return self(f, kernels.coulomb())

    def field(self, f):
        """``int f(x') (x - x')/|x - x'|^3``, shape ``(3, ...)``."""
        return self(f, kernels.coulomb_field())

    def darwin(self, v):
        """``int D(x - x') . v(x')`` for a vector field ``v``."""
        out = np.zeros((3,) + self.grid.n)
        for a in range(3):
            for b in range(3):
                out[a] += self(v[b], kernels.darwin(a, b))
        return out

    def darwin_uniform(self, f, vec):
        """``int D(x - x') . vec f(x')`` for a constant vector ``vec``."""
        if not np.any(vec):
            return np.zeros((3,) + self.grid.n)
        return self(f, kernels.darwin_dot(vec))

    def spin_curl(self, s):
        """``C = int s(x') x (x - x')/|x - x'|^3``."""
        f = [self.field(s[b]) for b in range(3)]
        return np.stack([f[1][2] - f[2][1], f[2][0] - f[0][2], f[0][1] - f[1][0]])

    def dipolar(self, v):
        out = np.zeros((3,) + self.grid.n)
        for a in range(3):
            for b in range(3):
                out[a] += self(v[b], kernels.dipolar(a, b))
        return out


def _densities(grid: Grid3, phi, const: PhysicalConstants):
    """``rho``, ``s``, ``J = Re(phi^+ p phi)`` and ``T[a, c] = Re(phi^+ sigma_a p_c phi)``."""
    rho = probability_density(phi)
    s = spin_density(phi)
    pphi = momentum_apply(grid, phi, const)
    cj = np.conj(phi)
    J = np.stack([(cj * pphi[c]).real.sum(0) for c in range(3)])
    T = np.empty((3, 3) + grid.n)
    for c in range(3):
        u, d = pphi[c]
        T[0, c] = (cj[0] * d + cj[1] * u).real
        T[1, c] = (cj[0] * (-1j * d) + cj[1] * (1j * u)).real
        T[2, c] = (cj[0] * u - cj[1] * d).real
    return rho, s, J, T


def hartree_reduce(cfg: PairConfiguration, target: int = 0,
                   const: PhysicalConstants = ATOMIC) -> dict:
    """Mean fields felt by orbital ``target`` from every other orbital.

    Returns
    -------
    dict
        ``{TermId: (kind, field)}`` for the seven coherent terms, with
        ``kind`` one of ``"ap"`` (``(W.p + p.W)/2``), ``"local"`` or
        ``"sigma"`` as in :mod:`spinlight.hamiltonian`.
    """
    if not 0 <= target < cfg.size:
        raise ConfigurationError(f"target {target} out of range")
    g = cfg.grid
    others = [j for j in range(cfg.size) if j != target]
    zero_v = np.zeros((3,) + g.n)
    if not others:
        return {TermId.PA_FIELD: ("ap", zero_v), TermId.AA_ORB: ("local", np.zeros(g.n)),
                TermId.AA_FIELD: ("local", np.zeros(g.n)), TermId.AA_SPIN: ("local", np.zeros(g.n)),
                TermId.PHI2_FIELD: ("local", np.zeros(g.n)),
                TermId.ZEEMAN_FIELD: ("sigma", zero_v), TermId.SOC_EXT_INT: ("sigma", zero_v)}
    rho, s, J = np.zeros(g.n), np.zeros((3,) + g.n), np.zeros((3,) + g.n)
    for j in others:
        dr, ds, dj, _ = _densities(g, cfg.orbitals[j], const)
        rho, s, J = rho + dr, s + ds, J + dj
    quad = _Quadrature(cfg)
    q, hb = const.q, const.hbar
    A = cfg.a_ext
    Av = A.reshape(3, 1, 1, 1)
    pref = const.e2bar / (const.m**2 * const.c**2)
    k_rho_a = quad.darwin_uniform(rho, A)
    k_j = quad.darwin(J) if np.any(A) else zero_v
    C = quad.spin_curl(s) if np.any(A) else zero_v
    g_rho = quad.field(rho)
    return {
        TermId.PA_FIELD: ("ap", 0.5 * q * pref * k_rho_a),
        TermId.AA_ORB: ("local", 0.5 * q * pref * dot(Av, k_j)),
        TermId.AA_FIELD: ("local", -0.5 * q * q * pref * dot(Av, k_rho_a)),
        TermId.AA_SPIN: ("local", 0.5 * q * hb * pref * dot(Av, C)),
        TermId.PHI2_FIELD: ("local", -0.25 * q * hb * pref * dot(Av, C)),
        TermId.ZEEMAN_FIELD: ("sigma", -0.5 * q * hb * pref * cross(g_rho, Av)),
        TermId.SOC_EXT_INT: ("sigma", 0.25 * q * hb * pref * cross(g_rho, Av)),
    }


def _field_energy(grid, kind, f, rho, s, J):
    if kind == "local":
        return float(grid.integrate(f * rho))
    if kind == "sigma":
        return float(grid.integrate(dot(f, s)))
    return float(grid.integrate(dot(f, J)))


def oracle_term_energies(cfg: PairConfiguration, const: PhysicalConstants = ATOMIC) -> dict:
    """Coherent term energies ``sum_i <phi_i|V_i|phi_i>`` by kernel quadrature."""
    g = cfg.grid
    out = {t: 0.0 for t in COH}
    for i in range(cfg.size):
        rho, s, J, _ = _densities(g, cfg.orbitals[i], const)
        for term, (kind, f) in hartree_reduce(cfg, i, const).items():
            out[term] += _field_energy(g, kind, f, rho, s, J)
    return out


def route1_term_energies(cfg: PairConfiguration, const: PhysicalConstants = ATOMIC) -> dict:
    """Coherent term energies through sources, field solvers and the Hamiltonian.

    Each orbital sees the potentials of all the others (self-interaction
    excluded), computed with :meth:`PairConfiguration.solver_config`.
    """
    g = cfg.grid
    sample = ExternalFieldSample(a=cfg.a_ext)
    solver = cfg.solver_config()
    out = {t: 0.0 for t in COH}
    for i in range(cfg.size):
        src = build_sources(g, cfg.orbitals, cfg.a_ext, exclude=i, const=const)
        pot = assemble_potentials(g, src, solver, const)
        for t in COH:
            out[t] += term_energy(t, g, cfg.orbitals[i], pot, sample, const)
    return out


def _pair(cfg):
    if cfg.size != 2:
        raise ConfigurationError(f"pair quantities need exactly two orbitals, got {cfg.size}")


def bp_pair_energy(cfg: PairConfiguration, substitute: bool = False,
                   const: PhysicalConstants = ATOMIC) -> dict:
    """Expectation of the pair operator in the product state ``phi_0 phi_1``.

    Parameters
    ----------
    substitute : bool
        Apply ``p -> p - q A_ext`` to both particles (field-dressed pair).

    Returns
    -------
    dict
        ``contact``, ``orbit-orbit``, ``spin-orbit`` (spin-orbit plus
        spin-other-orbit) and ``spin-spin`` energies.
    """
    _pair(cfg)
    g = cfg.grid
    q, hb = const.q, const.hbar
    pref = const.e2bar / (const.m**2 * const.c**2)
    quad = _Quadrature(cfg)
    (r0, s0, j0, t0), (r1, s1, j1, t1) = (_densities(g, p, const) for p in cfg.orbitals)
    if substitute:
        A = cfg.a_ext.reshape(3, 1, 1, 1)
        j0, j1 = j0 - q * r0 * A, j1 - q * r1 * A
        t0 = t0 - q * A[None, :] * s0[:, None]
        t1 = t1 - q * A[None, :] * s1[:, None]

    contact = -math.pi * hb * hb * pref * g.integrate(r0 * r1)
    orbit = -0.5 * pref * g.integrate(dot(j0, quad.darwin(j1)))

    # i = 0, j = 1; r = x_i - x_j
    f_r1 = quad.field(r1)
    so = 0.0
    for a, b, c, sgn in _EPS:
        so += sgn * g.integrate(r0 * quad.field(t1[a, c])[b])          # sigma_j . G x p_j
        so -= 2 * sgn * g.integrate(j0[c] * quad.field(s1[a])[b])      # -2 sigma_j . G x p_i
        so -= sgn * g.integrate(t0[a, c] * f_r1[b])                    # -sigma_i . G x p_i
        so += 2 * sgn * g.integrate(s0[a] * quad.field(j1[c])[b])      # 2 sigma_i . G x p_j
    so *= 0.25 * hb * pref

    dip = g.integrate(dot(s0, quad.dipolar(s1)))
    if cfg.softening == 0:
        point = -(8 * math.pi / 3) * g.integrate(dot(s0, s1))
    else:
        # the softened dipolar kernel already carries -(4 pi/3) of the contact
        smear = np.stack([quad(s1[b], _smeared_delta()) for b in range(3)])
        point = -(4 * math.pi / 3) * g.integrate(dot(s0, smear))
    ss = -0.25 * hb * hb * pref * (point + dip)
    return {"contact": float(contact), "orbit-orbit": float(orbit),
            "spin-orbit": float(so), "spin-spin": float(ss)}


def bp_field_corrections(cfg: PairConfiguration, const: PhysicalConstants = ATOMIC) -> dict:
    """Every addend of the field-dressed pair operator, ordered pair ``(0, 1)``.

    Keys are listed in :data:`ADDEND_TERMS`, which also gives the coherent
    term each addend turns into when particle 0 is the target of the
    Hartree reduction.  The addends sum to
    ``bp_pair_energy(substitute=True) - bp_pair_energy()``.
    """
    _pair(cfg)
    g = cfg.grid
    q, hb = const.q, const.hbar
    pref = const.e2bar / (const.m**2 * const.c**2)
    quad = _Quadrature(cfg)
    A = cfg.a_ext
    Av = A.reshape(3, 1, 1, 1)
    (r0, s0, j0, _), (r1, s1, j1, _) = (_densities(g, p, const) for p in cfg.orbitals)
    if not np.any(A):
        return {k: 0.0 for k in ADDEND_TERMS}
    k_rho_a = quad.darwin_uniform(r1, A)
    c1 = quad.spin_curl(s1)
    gxa = cross(quad.field(r1), Av)
    spin = 0.25 * hb * pref
    out = {
        "p_i.qA/r": 0.5 * pref * q * g.integrate(dot(j0, k_rho_a)),
        "qA.p_j/r": 0.5 * pref * q * g.integrate(r0 * dot(Av, quad.darwin(j1))),
        "-qqAA/r": -0.5 * pref * q * q * g.integrate(r0 * dot(Av, k_rho_a)),
        "sigma_j,2q_iA": 2 * q * spin * g.integrate(r0 * dot(Av, c1)),
        "sigma_j,-q_jA": -q * spin * g.integrate(r0 * dot(Av, c1)),
        "sigma_i,-2q_jA": -2 * q * spin * g.integrate(dot(s0, gxa)),
        "sigma_i,q_iA": q * spin * g.integrate(dot(s0, gxa)),
    }
    return {k: float(v) for k, v in out.items()}


def validate(cfg: PairConfiguration, tolerance: float = 1e-3,
             const: PhysicalConstants = ATOMIC) -> tuple[list, list]:
    """Compare the seven coherent term energies of both routes.

    Returns
    -------
    rows : list of dict
        ``term``, ``route1``, ``route2``, ``relative_deviation`` and
        ``passed``; the deviation is ``|E1 - E2| / max(|E1|, SCALE_FLOOR)``.
    flags : list of str
        Quadrature warnings (under-resolved softening, periodic images).
    """
    e1 = route1_term_energies(cfg, const)
    e2 = oracle_term_energies(cfg, const)
    rows = []
    for t in COH:
        dev = abs(e1[t] - e2[t]) / max(abs(e1[t]), SCALE_FLOOR)
        rows.append({"term": t.value, "route1": e1[t], "route2": e2[t],
                     "relative_deviation": dev, "passed": bool(dev <= tolerance)})
    return rows, cfg.flags()


def softening_sensitivity(cfg: PairConfiguration, threshold: float = 1e-2,
                          const: PhysicalConstants = ATOMIC) -> float:
    """Relative change of the oracle energies when the softening grows by half a spacing.

    Raises :class:`QuadratureError` above ``threshold``.
    """
    h = min(cfg.grid.spacing)
    base = oracle_term_energies(cfg, const)
    alt = PairConfiguration(cfg.grid, cfg.orbitals, cfg.a_ext, cfg.quadrature,
                            cfg.softening + 0.5 * h, cfg.padding_factor)
    other = oracle_term_energies(alt, const)
    scale = max(max(abs(v) for v in base.values()), SCALE_FLOOR)
    change = max(abs(base[t] - other[t]) for t in base) / scale
    if change > threshold:
        raise QuadratureError(f"oracle energies change by {change:.2e} when the softening "
                              f"grows by h/2; refine the grid")
    return change


def write_report(rows, path):
    """CSV with columns ``term, route1, route2, relative_deviation, pass``."""
    try:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["term", "route1", "route2", "relative_deviation", "pass"])
            for r in rows:
                w.writerow([r["term"], repr(r["route1"]), repr(r["route2"]),
                            repr(r["relative_deviation"]), "PASS" if r["passed"] else "FAIL"])
    except OSError as err:
        raise OutputError(f"cannot write {path}: {err}") from None
