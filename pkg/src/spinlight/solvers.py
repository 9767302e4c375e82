"""Quasi-static internal field solvers.

Two routes are provided:

``spectral-poisson``
    Fourier-space division.  With ``padding_factor = 1`` the box is treated
    as periodic and the ``k = 0`` mode is dropped.  With padding 2 or 3 the
    source is embedded in a larger box and convolved with the free-space
    Green's function truncated at a radius ``R`` (the Fourier transform of
    the truncated kernel is smooth, so the result is the free-space field
    to spectral accuracy).  Padding 3 uses ``R = sqrt(3) L`` and is exact
    for arbitrary sources in the box; padding 2 uses ``R = L`` and is
    exact only when every source/observation pair is closer than ``L``.

``green-kernel``
    Direct real-space quadrature of the scalar ``1/r`` kernel and the two
    term vector kernel ``[j/r + r (r.j)/r^3]/2`` by zero-padded discrete
    convolution (see :mod:`spinlight.kernels`).

Vector potentials are built from the transverse part of the current
(Coulomb gauge).  In the isolated spectral mode this is done with the
free-space tensor kernel ``(delta/r + r r/r^3)/2``, which performs the
transverse projection implicitly.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field, fields

import numpy as np
import scipy.fft as sfft
from scipy import special

from . import kernels
from .constants import ATOMIC, PhysicalConstants
from .errors import ConfigurationError
from .grid import Grid3

__all__ = [
    "SolverConfig",
    "PotentialSet",
    "FieldSolver",
    "solve_scalar_poisson",
    "solve_vector_potential",
    "transverse_project",
    "greens_kernel_scalar",
    "greens_kernel_vector",
    "assemble_potentials",
]

AXES = (-3, -2, -1)
METHODS = ("spectral-poisson", "green-kernel")
ZERO_MODE = ("drop", "neutralizing-background")


@dataclass(frozen=True)
class SolverConfig:
    """Field solver settings.

    Attributes
    ----------
    method : {"spectral-poisson", "green-kernel"}
    zero_mode_policy : {"drop", "neutralizing-background"}
        Both discard the ``k = 0`` mode of a periodic solve; ``drop``
        additionally flags non-neutral sources.
    padding_factor : {1, 2, 3}
        1 is periodic; 2 and 3 give isolated-system solves.
    softening : float
        Coulomb softening length ``a``; ``r -> sqrt(r^2 + a^2)``.
    """

    method: str = "spectral-poisson"
    zero_mode_policy: str = "drop"
    padding_factor: int = 1
    softening: float = 0.0

    def __post_init__(self):
        if self.method not in METHODS:
            raise ConfigurationError(f"unknown solver method {self.method!r}")
        if self.zero_mode_policy not in ZERO_MODE:
            raise ConfigurationError(f"unknown zero_mode_policy {self.zero_mode_policy!r}")
        if self.padding_factor not in (1, 2, 3):
            raise ConfigurationError("padding_factor must be 1, 2 or 3")
        if not self.softening >= 0:
            raise ConfigurationError("softening must be >= 0")

    @property
    def isolated(self) -> bool:
        return self.padding_factor > 1


_SCALARS = ("phi0", "lap_phi0", "phi2_orb", "phi2_spin", "phi2_field")
_VECTORS = ("grad_phi0", "a2_orb", "a2_spin", "a2_field", "b2_orb", "b2_spin", "b2_field")


@dataclass
class PotentialSet:
    """Internal potentials acting on one orbital.

    Besides the potentials themselves the set stores the derived fields
    needed by the Hamiltonian, computed in the solver's Fourier space:
    ``grad_phi0``, ``lap_phi0`` and the curls ``b2_* = curl a2_*``.
    ``flags`` collects solver notes (for example non-neutral sources).
    """

    phi0: np.ndarray
    grad_phi0: np.ndarray
    lap_phi0: np.ndarray
    phi2_orb: np.ndarray
    phi2_spin: np.ndarray
    phi2_field: np.ndarray
    a2_orb: np.ndarray
    a2_spin: np.ndarray
    a2_field: np.ndarray
    b2_orb: np.ndarray
    b2_spin: np.ndarray
    b2_field: np.ndarray
    flags: list = field(default_factory=list)

    #: leading-order vector potential, zero by construction
    a0_int = 0.0

    @classmethod
    def zeros(cls, grid: Grid3) -> "PotentialSet":
        kw = {k: np.zeros(grid.n) for k in _SCALARS}
        kw.update({k: np.zeros((3,) + grid.n) for k in _VECTORS})
        return cls(**kw)

    def _arrays(self):
        return [f.name for f in fields(self) if f.name != "flags"]

    def __add__(self, other: "PotentialSet") -> "PotentialSet":
        kw = {k: getattr(self, k) + getattr(other, k) for k in self._arrays()}
        return PotentialSet(**kw, flags=sorted(set(self.flags) | set(other.flags)))

    def scaled(self, s: float) -> "PotentialSet":
        kw = {k: s * getattr(self, k) for k in self._arrays()}
        return PotentialSet(**kw, flags=list(self.flags))

    @property
    def a2_total(self) -> np.ndarray:
        return self.a2_orb + self.a2_spin + self.a2_field

    @property
    def phi2_total(self) -> np.ndarray:
        return self.phi2_orb + self.phi2_spin + self.phi2_field


def transverse_project(grid: Grid3, j) -> tuple[np.ndarray, np.ndarray]:
    """Helmholtz split ``j = j_T + j_L`` on the periodic grid.

    The ``k = 0`` (uniform) part is assigned to ``j_T``.
    """
    j = grid.check(j, (3,))
    jh = grid.fft(j)
    k = grid.kvec_odd
    k2 = k[0] ** 2 + k[1] ** 2 + k[2] ** 2
    with np.errstate(divide="ignore", invalid="ignore"):
        kj = np.where(k2 > 0, (k[0] * jh[0] + k[1] * jh[1] + k[2] * jh[2]) / k2, 0.0)
    jl_h = np.stack(np.broadcast_arrays(k[0] * kj, k[1] * kj, k[2] * kj))
    jl = grid.ifft(jl_h)
    jt = grid.ifft(jh - jl_h)
    if np.isrealobj(j):
        jl, jt = jl.real, jt.real
    return jt, jl


# --------------------------------------------------------------------------
# Fourier-space kernels


def _g1(x):
    """``x K1(x)`` with the limit 1 at ``x = 0``."""
    x = np.asarray(x, dtype=float)
    out = np.ones_like(x)
    nz = x > 0
    out[nz] = x[nz] * special.k1(x[nz])
    return out


def _g0(x):
    """``x^2 K0(x)/2`` with the limit 0 at ``x = 0``."""
    x = np.asarray(x, dtype=float)
    out = np.zeros_like(x)
    nz = x > 0
    out[nz] = 0.5 * x[nz] ** 2 * special.k0(x[nz])
    return out


def _truncated_tensor(u):
    """Tensor coefficients of ``(delta/r + r r/r^3)/2`` cut at ``r = R``, over ``R^2``.

    ``tA = (2 - cos u - sin u/u)/2u^2`` and ``tB = (3 sin u/u - cos u - 2)/2u^2``
    with ``u = kR``; series below ``u = 0.1``.
    """
    u = np.asarray(u, dtype=float)
    ta, tb = np.empty_like(u), np.empty_like(u)
    small = u < 0.1
    u2 = u[small] ** 2
    ta[small] = 1.0 / 3.0 - u2 / 40.0 + u2**2 / 1260.0
    tb[small] = -u2 / 120.0 + u2**2 / 2520.0
    ul = u[~small]
    sinc, cos = np.sin(ul) / ul, np.cos(ul)
    ta[~small] = (2.0 - cos - sinc) / (2.0 * ul**2)
    tb[~small] = (3.0 * sinc - cos - 2.0) / (2.0 * ul**2)
    return ta, tb


def _spherical_j(x):
    """``(j0(x), j1(x)/x, j2(x))`` with small-argument series."""
    x = np.asarray(x, dtype=float)
    small = x < 1e-3
    xs = np.where(small, 1.0, x)
    s, c = np.sin(xs), np.cos(xs)
    j0 = s / xs
    j1x = (s / xs - c) / xs**2
    j2 = (3.0 / xs**2 - 1.0) * s / xs - 3.0 * c / xs**2
    x2 = x * x
    j0 = np.where(small, 1 - x2 / 6.0, j0)
    j1x = np.where(small, 1.0 / 3.0 - x2 / 30.0, j1x)
    j2 = np.where(small, x2 / 15.0, j2)
    return j0, j1x, j2


def _radial_nodes(radius, kmax, a):
    """Gauss-Legendre nodes/weights on ``[0, radius]`` resolving ``kmax`` and ``a``."""
    width = min(math.pi / (2.0 * max(kmax, 1e-12)), radius)
    edges = [0.0]
    if a > 0:
        r = a / 16.0
        while r < min(4 * a, radius) and r < width:
            edges.append(r)
            r *= 2.0
    npan = max(1, int(math.ceil((radius - edges[-1]) / width)))
    edges.extend(np.linspace(edges[-1], radius, npan + 1)[1:].tolist())
    x, w = np.polynomial.legendre.leggauss(12)
    nodes, weights = [], []
    for lo, hi in zip(edges[:-1], edges[1:]):
        nodes.append(0.5 * (hi - lo) * x + 0.5 * (hi + lo))
        weights.append(0.5 * (hi - lo) * w)
    return np.concatenate(nodes), np.concatenate(weights)


def _radial_transforms(kvals, radius, a, chunk=256):
    """Numerical transforms of the truncated softened kernels.

    Returns ``(G, A, B)`` per wavenumber with
    ``G = int_0^R r^2 j0(kr)/s dr`` and the tensor coefficients of
    ``(delta/s + r r/s^3)/2``:
    ``A = (1/2) int r^2 [j0/s + (r^2/s^3) j1(kr)/(kr)] dr``,
    ``B = -(1/2) int r^2 (r^2/s^3) j2(kr) dr``.
    """
    kvals = np.asarray(kvals, dtype=float)
    r, w = _radial_nodes(radius, kvals.max() if kvals.size else 1.0, a)
    s = np.sqrt(r * r + a * a)
    alpha = w * r * r / s
    beta = w * r**4 / s**3
    G = np.empty_like(kvals)
    A = np.empty_like(kvals)
    B = np.empty_like(kvals)
    for i in range(0, kvals.size, chunk):
        k = kvals[i:i + chunk, None]
        j0, j1x, j2 = _spherical_j(k * r[None, :])
        G[i:i + chunk] = j0 @ alpha
        A[i:i + chunk] = 0.5 * (j0 @ alpha + j1x @ beta)
        B[i:i + chunk] = -0.5 * (j2 @ beta)
    return G, A, B


class FieldSolver:
    """Precomputed Fourier multipliers for one grid and configuration.

    Parameters
    ----------
    grid : Grid3
    cfg : SolverConfig
    const : PhysicalConstants
    """

    def __init__(self, grid: Grid3, cfg: SolverConfig = SolverConfig(),
                 const: PhysicalConstants = ATOMIC):
        self.grid = grid
        self.cfg = cfg
        self.const = const
        p = cfg.padding_factor if cfg.method == "spectral-poisson" else 1
        self.work = grid.padded(p) if p > 1 else grid
        w = self.work
        self.m = w.n
        kx = 2 * np.pi * np.fft.fftfreq(w.n[0], w.spacing[0])
        ky = 2 * np.pi * np.fft.fftfreq(w.n[1], w.spacing[1])
        kz = 2 * np.pi * np.fft.rfftfreq(w.n[2], w.spacing[2])
        self.k = (kx[:, None, None], ky[None, :, None], kz[None, None, :])
        odd = [kx.copy(), ky.copy(), kz.copy()]
        for d, n in enumerate(w.n):
            if n % 2 == 0:
                odd[d][n // 2] = 0.0
        self.k_odd = (odd[0][:, None, None], odd[1][None, :, None], odd[2][None, None, :])
        self.k2 = self.k[0] ** 2 + self.k[1] ** 2 + self.k[2] ** 2
        self._build()

    # multipliers ------------------------------------------------------------
    def _build(self):
        a = self.cfg.softening
        k2 = self.k2
        kk = np.sqrt(k2)
        if not self.cfg.isolated:
            with np.errstate(divide="ignore", invalid="ignore"):
                inv = np.where(k2 > 0, 1.0 / k2, 0.0)
            if a > 0:
                g1, g0 = _g1(kk * a), _g0(kk * a)
                self.G = inv * g1
                self.TA, self.TB = inv * g1, -inv * (g1 + g0)
            else:
                self.G = inv
                self.TA, self.TB = inv, -inv
            self.radius = None
            return
        L = max(self.grid.box)
        R = math.sqrt(3.0) * L if self.cfg.padding_factor == 3 else L
        self.radius = R
        if a == 0:
            u = kk * R
            with np.errstate(divide="ignore", invalid="ignore"):
                G = np.where(k2 > 0, 2.0 * np.sin(u / 2) ** 2 / k2, R * R / 2.0)
            self.G = G
            ta, tb = _truncated_tensor(u)
            self.TA, self.TB = R * R * ta, R * R * tb
            return
        key = np.round(k2 / k2.max() * 2**40) if k2.max() > 0 else k2
        uniq, inverse = np.unique(key, return_inverse=True)
        kv = np.zeros(uniq.size)
        flat = kk.reshape(-1)
        kv[inverse.reshape(-1)] = flat
        G, A, B = _radial_transforms(kv, R, a)
        shape = k2.shape
        self.G = G[inverse].reshape(shape)
        self.TA = A[inverse].reshape(shape)
        self.TB = B[inverse].reshape(shape)

    # transforms -------------------------------------------------------------
    def _fwd(self, f):
        return sfft.rfftn(f, s=self.m, axes=AXES, workers=self.grid.workers)

    def _inv(self, fh):
        out = sfft.irfftn(fh, s=self.m, axes=AXES, workers=self.grid.workers)
        if self.cfg.isolated:
            out = out[(Ellipsis,) + tuple(slice(0, n) for n in self.grid.n)]
        return np.ascontiguousarray(out)

    def _flag_neutrality(self, total, scale, flags, label):
        if not self.cfg.isolated and abs(total) > 1e-10 * max(scale, 1e-300):
            if self.cfg.zero_mode_policy == "drop":
                flags.append(f"non-neutral {label}: uniform background implied")

    # public solves ------------------------------------------------------------
    def scalar(self, source, gradient=False, laplacian=False, flags=None):
        """Potential with ``-lap Phi = (q/eps0) source``.

        Returns ``(phi, grad_phi or None, lap_phi or None)``.
        """
        source = self.grid.check(np.asarray(source, dtype=float))
        sh = self._fwd(source)
        if flags is not None:
            self._flag_neutrality(sh[(Ellipsis, 0, 0, 0)].real * self.grid.dv,
                                  np.abs(source).sum() * self.grid.dv, flags, "charge")
        ph = (self.const.q / self.const.eps0) * self.G * sh
        phi = self._inv(ph)
        grad = lap = None
        if gradient:
            grad = self._inv(1j * np.stack(np.broadcast_arrays(*[k * ph for k in self.k_odd])))
        if laplacian:
            lap = self._inv(-self.k2 * ph)
        return phi, grad, lap

    def vector(self, j, curl=False, flags=None):
        """Coulomb-gauge potential with ``-lap A = q mu0 j_T``.

        Returns ``(A, curl_A or None)``.
        """
        j = self.grid.check(np.asarray(j, dtype=float), (3,))
        jh = self._fwd(j)
        if flags is not None and not self.cfg.isolated:
            self._flag_neutrality(np.abs(jh[(Ellipsis, 0, 0, 0)]).max() * self.grid.dv,
                                  np.abs(j).sum() * self.grid.dv, flags, "current")
        kx, ky, kz = self.k_odd
        k2o = kx**2 + ky**2 + kz**2
        with np.errstate(divide="ignore", invalid="ignore"):
            kdotj = np.where(k2o > 0, (kx * jh[0] + ky * jh[1] + kz * jh[2]) / k2o, 0.0)
        pref = self.const.q * self.const.mu0
        ah = [pref * (self.TA * jh[d] + self.TB * k * kdotj) for d, k in enumerate(self.k_odd)]
        if not curl:
            return self._inv(np.stack(ah)), None
        out = self._inv(np.stack(ah + [1j * (ky * ah[2] - kz * ah[1]),
                                       1j * (kz * ah[0] - kx * ah[2]),
                                       1j * (kx * ah[1] - ky * ah[0])]))
        return np.ascontiguousarray(out[:3]), np.ascontiguousarray(out[3:])


_SOLVERS: dict = {}


def _solver(grid: Grid3, cfg: SolverConfig, const: PhysicalConstants) -> FieldSolver:
    key = (grid.n, grid.box, cfg, const)
    s = _SOLVERS.get(key)
    if s is None:
        if len(_SOLVERS) > 8:
            _SOLVERS.clear()
        s = _SOLVERS[key] = FieldSolver(grid, cfg, const)
    return s


def solve_scalar_poisson(grid: Grid3, source, cfg: SolverConfig = SolverConfig(),
                         const: PhysicalConstants = ATOMIC) -> np.ndarray:
    """Solve ``-lap Phi = (q/eps0) source`` (spectral route)."""
    return _solver(grid, cfg, const).scalar(source)[0]


def solve_vector_potential(grid: Grid3, j, cfg: SolverConfig = SolverConfig(),
                           const: PhysicalConstants = ATOMIC) -> np.ndarray:
    """Solve ``-lap A = q mu0 j_T`` (spectral route, Coulomb gauge)."""
    return _solver(grid, cfg, const).vector(j)[0]


def greens_kernel_scalar(grid: Grid3, source, cfg: SolverConfig = SolverConfig(padding_factor=2),
                         const: PhysicalConstants = ATOMIC) -> np.ndarray:
    """``(q/4 pi eps0) int source(x')/|x - x'| dx'`` by discrete convolution."""
    pad = max(cfg.padding_factor, 1)
    if pad == 1:
        _check_decay(grid, source)
    conv = kernels.convolve(grid, source, kernels.coulomb(), cfg.softening, pad)
    return const.q / (4 * math.pi * const.eps0) * conv


def greens_kernel_vector(grid: Grid3, j, cfg: SolverConfig = SolverConfig(padding_factor=2),
                         const: PhysicalConstants = ATOMIC) -> np.ndarray:
    """``(q mu0/4 pi) int [j/2r + r (r.j)/2r^3] dx'`` by discrete convolution.

    The two kernel terms are evaluated separately, as written.
    """
    j = grid.check(np.asarray(j, dtype=float), (3,))
    pad = max(cfg.padding_factor, 1)
    if pad == 1:
        _check_decay(grid, j)
    a = cfg.softening
    first = kernels.convolve(grid, j, kernels.coulomb(), a, pad)
    second = np.zeros_like(first)
    for i in range(3):
        for k in range(i, 3):
            # r_i r_k / r^3 part only: subtract the delta/r piece of the darwin kernel
            conv_ik = kernels.convolve(grid, j[k], _rr_kernel(i, k), a, pad)
            second[i] += conv_ik
            if k != i:
                second[k] += kernels.convolve(grid, j[i], _rr_kernel(i, k), a, pad)
    return const.q * const.mu0 / (4 * math.pi) * 0.5 * (first + second)


def _rr_kernel(i, k):
    def sample(dx, dy, dz, s):
        d = (dx, dy, dz)
        return [d[i] * d[k] / s**3]

    def weight(h):
        return [kernels.ZETA / (3.0 * h) if i == k else 0.0]

    return kernels.Kernel(f"rr{i}{k}", 1, sample, weight)


def _check_decay(grid, f, threshold=1e-8):
    f = np.abs(np.asarray(f))
    peak = f.max()
    if peak == 0:
        return
    edge = max(f[..., 0, :, :].max(), f[..., -1, :, :].max(), f[..., :, 0, :].max(),
               f[..., :, -1, :].max(), f[..., 0].max(), f[..., -1].max())
    if edge > threshold * peak:
        warnings.warn("source has not decayed at the box boundary; the periodic "
                      "kernel wrap-around is not negligible", RuntimeWarning, stacklevel=3)


def assemble_potentials(grid: Grid3, sources, cfg: SolverConfig = SolverConfig(),
                        const: PhysicalConstants = ATOMIC) -> PotentialSet:
    """Internal potentials of a :class:`SourceSet`.

    ``Phi0`` from ``rho0``, each ``Phi2_k`` from ``rho2_k`` and each
    ``A2_l`` from ``j_l`` with the ``mu0 = 1/(eps0 c^2)`` prefactor.  The
    order-1/c^2 current never enters.
    """
    flags: list = []
    if cfg.method == "green-kernel":
        return _assemble_kernel_route(grid, sources, cfg, const)
    s = _solver(grid, cfg, const)
    phi0, grad, lap = s.scalar(sources.rho0, gradient=True, laplacian=True, flags=flags)
    phi2 = {k: s.scalar(getattr(sources, f"rho2_{k}"))[0] for k in ("orb", "spin", "field")}
    avec, bvec = {}, {}
    for k in ("orb", "spin", "field"):
        avec[k], bvec[k] = s.vector(getattr(sources, f"j_{k}"), curl=True)
    return PotentialSet(phi0=phi0, grad_phi0=grad, lap_phi0=lap,
                        phi2_orb=phi2["orb"], phi2_spin=phi2["spin"], phi2_field=phi2["field"],
                        a2_orb=avec["orb"], a2_spin=avec["spin"], a2_field=avec["field"],
                        b2_orb=bvec["orb"], b2_spin=bvec["spin"], b2_field=bvec["field"],
                        flags=flags)


def _assemble_kernel_route(grid, sources, cfg, const):
    phi0 = greens_kernel_scalar(grid, sources.rho0, cfg, const)
    out = {"phi0": phi0, "grad_phi0": grid.gradient(phi0), "lap_phi0": grid.laplacian(phi0)}
    for k in ("orb", "spin", "field"):
        out[f"phi2_{k}"] = greens_kernel_scalar(grid, getattr(sources, f"rho2_{k}"), cfg, const)
        a = greens_kernel_vector(grid, getattr(sources, f"j_{k}"), cfg, const)
        out[f"a2_{k}"] = a
        out[f"b2_{k}"] = grid.curl(a)
    return PotentialSet(**out, flags=["green-kernel route: derivatives taken spectrally on the box"])
