"""Real-space integral kernels evaluated by zero-padded discrete convolution.

A kernel ``K(r)`` is sampled on the displacement lattice of the grid and
convolved with a field by FFT (Hockney's method), which equals the direct
double sum ``h^3 sum_j K(x_i - x_j) f(x_j)`` to round-off.

Unsoftened kernels (``a = 0``) are singular at ``r = 0``.  The self-cell
weight is then fixed by the corrected trapezoidal rule for ``1/r``
singularities on a cubic lattice, whose constant is the lattice sum

    ZETA = -sum'_{n in Z^3} 1/|n|  (analytically continued) = 2.83729...

so that ``int f/r ~ h^3 sum' f/r + ZETA h^2 f(0)`` with an
``O(h^3)`` error for smooth ``f``.  Tensor and odd kernels receive the
matching cubic-symmetric weights.
"""
from __future__ import annotations

import warnings
from functools import lru_cache

import numpy as np
import scipy.fft as sfft

from .errors import ConfigurationError
from .grid import Grid3

__all__ = [
    "ZETA",
    "Kernel",
    "coulomb",
    "darwin",
    "darwin_dot",
    "coulomb_field",
    "dipolar",
    "convolve",
    "direct_sum",
]

ZETA = 2.8372974794806

AXES = (-3, -2, -1)


class Kernel:
    """Sampled kernel description.

    Parameters
    ----------
    name : str
        Cache key.
    components : int
        Number of output components per input component (1 for scalar
        kernels, 3 for ``r/r^3``).
    sample : callable
        ``sample(dx, dy, dz, s)`` returning a list of component arrays,
        with ``s = sqrt(r^2 + a^2)``; the origin may produce inf or nan
        and is overwritten by ``self_weight``.
    self_weight : callable
        ``self_weight(h)`` returning the values assigned at the origin when
        ``a = 0`` (already divided by the cell volume).
    gradient_correction : float
        Coefficient ``c`` of the ``c h^2 grad f`` correction applied to
        odd kernels when ``a = 0``.
    """

    def __init__(self, name, components, sample, self_weight, gradient_correction=0.0):
        self.name = name
        self.components = components
        self.sample = sample
        self.self_weight = self_weight
        self.gradient_correction = gradient_correction


def coulomb() -> Kernel:
    """``1/r`` (``1/sqrt(r^2+a^2)`` when softened)."""
    return Kernel("coulomb", 1, lambda dx, dy, dz, s: [1.0 / s],
                  lambda h: [ZETA / h])


def darwin(i: int, j: int) -> Kernel:
    """Component ``(i, j)`` of ``delta_ij/r + r_i r_j/r^3``."""
    def sample(dx, dy, dz, s):
        d = (dx, dy, dz)
        return [(1.0 if i == j else 0.0) / s + d[i] * d[j] / s**3]

    def weight(h):
        return [4.0 * ZETA / (3.0 * h) if i == j else 0.0]

    return Kernel(f"darwin{i}{j}", 1, sample, weight)


def darwin_dot(v) -> Kernel:
    """Vector kernel ``(delta/r + r r/r^3) . v`` for a fixed vector ``v``."""
    v = tuple(float(x) for x in v)

    def sample(dx, dy, dz, s):
        rv = (dx * v[0] + dy * v[1] + dz * v[2]) / s**3
        return [v[0] / s + dx * rv, v[1] / s + dy * rv, v[2] / s + dz * rv]

    def weight(h):
        return [4.0 * ZETA / (3.0 * h) * x for x in v]

    return Kernel(f"darwin_dot{v}", 3, sample, weight)


def coulomb_field() -> Kernel:
    """Odd vector kernel ``r/r^3`` (``r/s^3`` softened)."""
    return Kernel("coulomb_field", 3,
                  lambda dx, dy, dz, s: [dx / s**3, dy / s**3, dz / s**3],
                  lambda h: [0.0, 0.0, 0.0],
                  gradient_correction=-ZETA / 3.0)


def dipolar(i: int, j: int) -> Kernel:
    """``d_i d_j (1/s)``; for ``a = 0`` the principal-value part
    ``(3 r_i r_j - delta_ij r^2)/r^5`` with zero self weight."""
    def sample(dx, dy, dz, s):
        d = (dx, dy, dz)
        return [(3.0 * d[i] * d[j] - (1.0 if i == j else 0.0) * s**2) / s**5]

    return Kernel(f"dipolar{i}{j}", 1, sample, lambda h: [0.0])


@lru_cache(maxsize=32)
def _kernel_hat(n, spacing, padding, softening, kernel_name, _kref):
    kernel = _kref[0]
    m = tuple(k * padding for k in n)
    disp = []
    for mi, h in zip(m, spacing):
        idx = np.arange(mi)
        idx = np.where(idx < (mi + 1) // 2, idx, idx - mi)
        disp.append(idx * h)
    dx = disp[0][:, None, None]
    dy = disp[1][None, :, None]
    dz = disp[2][None, None, :]
    s = np.sqrt(dx**2 + dy**2 + dz**2 + softening**2)
    with np.errstate(divide="ignore", invalid="ignore"):
        comps = kernel.sample(dx, dy, dz, s)
    w0 = kernel.self_weight(spacing[0])
    out = []
    for c, w in zip(comps, w0):
        c = np.array(np.broadcast_to(c, m), dtype=float)
        if softening == 0:
            c[0, 0, 0] = w
        out.append(sfft.rfftn(c, axes=AXES))
    return np.stack(out)


class _Ref(tuple):
    """Tuple wrapper hashed by kernel name so lru_cache can key on it."""

    def __hash__(self):
        return hash(self[0].name)

    def __eq__(self, other):
        return isinstance(other, _Ref) and self[0].name == other[0].name


def convolve(grid: Grid3, f, kernel: Kernel, softening: float = 0.0,
             padding: int = 2, workers: int | None = None) -> np.ndarray:
    """``h^3 sum_j K(x_i - x_j) f(x_j)`` for every grid point ``x_i``.

    Parameters
    ----------
    grid : Grid3
    f : ndarray
        Real field; leading axes are carried through.
    kernel : Kernel
    softening : float
        Softening length ``a``.
    padding : int
        2 (or more) gives the free-space sum; 1 wraps the kernel
        periodically and warns.

    Returns
    -------
    ndarray
        Shape ``(kernel.components,) + f.shape`` for vector kernels and
        ``f.shape`` otherwise.
    """
    f = grid.check(np.asarray(f, dtype=float))
    if softening < 0:
        raise ConfigurationError("softening must be >= 0")
    if softening == 0 and not grid.is_cubic_cell:
        raise ConfigurationError("unsoftened kernel quadrature needs cubic cells")
    if padding < 1:
        raise ConfigurationError("padding must be >= 1")
    if padding == 1:
        warnings.warn("padding_factor=1 wraps the free-space kernel periodically",
                      RuntimeWarning, stacklevel=2)
    workers = grid.workers if workers is None else workers
    kh = _kernel_hat(grid.n, grid.spacing, padding, float(softening), kernel.name, _Ref((kernel,)))
    m = tuple(k * padding for k in grid.n)
    fh = sfft.rfftn(f, s=m, axes=AXES, workers=workers)
    out = []
    for c in range(kh.shape[0]):
        full = sfft.irfftn(fh * kh[c], s=m, axes=AXES, workers=workers)
        out.append(full[(Ellipsis,) + tuple(slice(0, k) for k in grid.n)] * grid.dv)
    res = np.stack(out) if kernel.components > 1 else out[0]
    if kernel.gradient_correction and softening == 0:
        h = grid.spacing[0]
        res = res + kernel.gradient_correction * h**2 * grid.gradient(f)
    return res


def direct_sum(grid: Grid3, f, kernel: Kernel, softening: float = 0.0,
               max_points: int = 24**3, chunk: int = 512) -> np.ndarray:
    """Reference O(M^2) evaluation of :func:`convolve` (no periodic images).

    Limited to ``max_points`` grid points.
    """
    f = grid.check(np.asarray(f, dtype=float))
    if f.ndim != 3:
        raise ConfigurationError("direct_sum takes a single scalar field")
    npts = int(np.prod(grid.n))
    if npts > max_points:
        raise ConfigurationError(f"direct double sum capped at {max_points} points, got {npts}")
    pos = grid.positions().reshape(3, -1)
    fv = f.reshape(-1)
    h = grid.spacing[0]
    w0 = kernel.self_weight(h)
    out = np.zeros((kernel.components, npts))
    for start in range(0, npts, chunk):
        sl = slice(start, min(start + chunk, npts))
        d = pos[:, sl, None] - pos[:, None, :]
        s = np.sqrt((d**2).sum(axis=0) + softening**2)
        with np.errstate(divide="ignore", invalid="ignore"):
            comps = kernel.sample(d[0], d[1], d[2], s)
        for c, (kc, w) in enumerate(zip(comps, w0)):
            kc = np.array(np.broadcast_to(kc, s.shape), dtype=float)
            if softening == 0:
                kc[s == 0] = w
            out[c, sl] = kc @ fv * grid.dv
    out = out.reshape((kernel.components,) + grid.n)
    if kernel.gradient_correction and softening == 0:
        out = out + kernel.gradient_correction * h**2 * grid.gradient(f)
    return out if kernel.components > 1 else out[0]
