"""Self-consistent time propagation of the orbital set.

Each step refreshes the sources and internal potentials from the current
orbitals (quasi-static fields), then advances ``i hbar d phi/dt = H phi``
with classical fourth-order Runge-Kutta.  By default the potentials are
frozen across the four stages (a one-step lag); they can instead be
refreshed at every stage or iterated to a fixed point at the midpoint.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import hamiltonian as ham
from .constants import ATOMIC, PhysicalConstants
from .errors import ConfigurationError, StabilityError
from .grid import Grid3, norm, probability_density, spin_density
from .laser import evaluate_pulse
from .solvers import PotentialSet, SolverConfig, assemble_potentials
from .sources import SourceSet, build_sources, current_divergence
from .terms import COH, EXT, INT, TermId, parse_toggles

__all__ = ["SCFConfig", "State", "FieldState", "Observables", "Propagator",
           "Trajectory", "run", "check_dt", "stability_limit", "fd_weights"]

NORM_ABORT = 1e-4
RK4_IMAG_LIMIT = 2.0 * math.sqrt(2.0)


@dataclass(frozen=True)
class SCFConfig:
    """Self-consistency policy.

    Attributes
    ----------
    refresh_every_substep : bool
        Recompute potentials at each Runge-Kutta stage.
    fixed_point_iters : int
        Extra iterations of each step with potentials rebuilt from the
        midpoint orbitals (0 keeps the one-step lag).
    tol : float
        Fixed-point stopping tolerance on the max orbital change.
    """

    refresh_every_substep: bool = False
    fixed_point_iters: int = 0
    tol: float = 1e-10


@dataclass
class State:
    orbitals: np.ndarray
    t: float = 0.0
    step: int = 0


@dataclass
class FieldState:
    """Sources and potentials seen by each orbital at one instant."""

    sources: list
    potentials: list
    flags: list = field(default_factory=list)


@dataclass
class Observables:
    """One output row.  Energies are per term, summed over orbitals."""

    time: float
    step: int
    norms: np.ndarray
    magnetization: np.ndarray
    dipole: np.ndarray
    energies: dict
    energy_total: float
    rest_energy: float
    continuity_residual: float = float("nan")

    @property
    def magnetization_total(self) -> np.ndarray:
        return self.magnetization.sum(axis=0)


def stability_limit(grid: Grid3, const: PhysicalConstants = ATOMIC, c_factor: float = 0.18) -> float:
    """Largest allowed step, ``C m h^2/hbar`` with ``h`` the smallest spacing.

    For the spectral Laplacian the free-particle spectrum reaches
    ``hbar/2m * sum_d (pi/h_d)^2``; RK4 is stable on the imaginary axis up
    to ``2 sqrt 2``, i.e. ``C ~ 0.19`` on a cubic grid.
    """
    h = min(grid.spacing)
    limit = c_factor * const.m * h * h / const.hbar
    omega_max = const.hbar / (2 * const.m) * sum((math.pi / s) ** 2 for s in grid.spacing)
    return min(limit, 0.999 * RK4_IMAG_LIMIT / omega_max)


def check_dt(grid: Grid3, dt: float, const: PhysicalConstants = ATOMIC, c_factor: float = 0.18):
    """Raise :class:`ConfigurationError` if ``dt`` exceeds the stability limit."""
    if not dt > 0:
        raise ConfigurationError("dt must be positive")
    limit = stability_limit(grid, const, c_factor)
    if dt > limit * (1 + 1e-12):
        raise ConfigurationError(
            f"dt={dt:.6g} exceeds the RK4 stability limit {limit:.6g} (C={c_factor}, "
            f"h={min(grid.spacing):.4g})")
    return limit


def fd_weights(offsets) -> np.ndarray:
    """First-derivative finite-difference weights on integer ``offsets``."""
    x = np.asarray(offsets, dtype=float)
    n = x.size
    v = np.vander(x, n, increasing=True).T
    rhs = np.zeros(n)
    rhs[1] = 1.0
    return np.linalg.solve(v, rhs)


class Propagator:
    """Time stepper for one orbital set.

    Parameters
    ----------
    grid : Grid3
    pulse : LaserPulse, StaticField or None
    toggles : mapping, optional
        Partial ``{TermId or key: bool}``; unspecified terms are on.
    solver : SolverConfig
    self_interaction : {"exclude", "include"}
    scf : SCFConfig
    const : PhysicalConstants
    """

    def __init__(self, grid: Grid3, pulse=None, toggles=None,
                 solver: SolverConfig = SolverConfig(), self_interaction: str = "exclude",
                 scf: SCFConfig = SCFConfig(), const: PhysicalConstants = ATOMIC):
        if self_interaction not in ("exclude", "include"):
            raise ConfigurationError(f"self_interaction must be 'exclude' or 'include'")
        self.grid = grid
        self.pulse = pulse
        self.toggles = parse_toggles(toggles)
        self.solver = solver
        self.self_interaction = self_interaction
        self.scf = scf
        self.const = const
        self.needs_fields = any(self.toggles[t] for t in INT + COH)

    # fields -----------------------------------------------------------------
    def sample(self, t):
        return evaluate_pulse(self.pulse, t, self.grid)

    def refresh_fields(self, orbitals, sample) -> FieldState:
        """Sources and potentials for every orbital from the current state."""
        g = self.grid
        n = orbitals.shape[0]
        if not self.needs_fields:
            zero = PotentialSet.zeros(g)
            return FieldState([], [zero] * n)
        single = [build_sources(g, orbitals[i:i + 1], sample.a, const=self.const) for i in range(n)]
        pots = [assemble_potentials(g, s, self.solver, self.const) for s in single]
        flags = sorted({f for p in pots for f in p.flags})
        if self.self_interaction == "include":
            total_p = _sum(pots) if n else PotentialSet.zeros(g)
            total_s = _sum(single) if n else SourceSet.zeros(g)
            return FieldState([total_s], [total_p] * n, flags)
        srcs, out = [], []
        for i in range(n):
            others = [j for j in range(n) if j != i]
            out.append(_sum([pots[j] for j in others]) if others else PotentialSet.zeros(g))
            src = _sum([single[j] for j in others]) if others else SourceSet.zeros(g)
            src.exclusion = (i,)
            srcs.append(src)
        return FieldState(srcs, out, flags)

    # dynamics ---------------------------------------------------------------
    def rhs(self, orbitals, t, potentials) -> np.ndarray:
        """``-i/hbar H phi`` for every orbital."""
        sample = self.sample(t)
        pots = potentials if self.needs_fields else [None] * orbitals.shape[0]
        out = np.empty_like(orbitals)
        for i in range(orbitals.shape[0]):
            out[i] = ham.apply_hamiltonian(self.grid, orbitals[i], pots[i], sample,
                                           self.const, self.toggles)
        return (-1j / self.const.hbar) * out

    def _rk4(self, phi, t, dt, potentials):
        refresh = self.scf.refresh_every_substep and self.needs_fields

        def pots_at(y, tt, default):
            return self.refresh_fields(y, self.sample(tt)).potentials if refresh else default

        k1 = self.rhs(phi, t, potentials)
        y2 = phi + 0.5 * dt * k1
        k2 = self.rhs(y2, t + 0.5 * dt, pots_at(y2, t + 0.5 * dt, potentials))
        y3 = phi + 0.5 * dt * k2
        k3 = self.rhs(y3, t + 0.5 * dt, pots_at(y3, t + 0.5 * dt, potentials))
        y4 = phi + dt * k3
        k4 = self.rhs(y4, t + dt, pots_at(y4, t + dt, potentials))
        return phi + dt / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)

    def step(self, state: State, dt: float, fields: FieldState | None = None) -> State:
        """Advance one step; ``fields`` are the potentials at ``state`` if known."""
        phi, t = state.orbitals, state.t
        if fields is None:
            fields = self.refresh_fields(phi, self.sample(t))
        new = self._rk4(phi, t, dt, fields.potentials)
        if self.needs_fields and not self.scf.refresh_every_substep:
            for _ in range(self.scf.fixed_point_iters):
                mid = 0.5 * (phi + new)
                pots = self.refresh_fields(mid, self.sample(t + 0.5 * dt)).potentials
                again = self._rk4(phi, t, dt, pots)
                change = np.abs(again - new).max()
                new = again
                if change < self.scf.tol:
                    break
        n_old, n_new = norm(self.grid, phi), norm(self.grid, new)
        drift = np.abs(n_new - n_old).max() if n_old.size else 0.0
        if not np.all(np.isfinite(n_new)) or drift > NORM_ABORT:
            raise StabilityError(
                f"norm drift {drift:.3e} in one step at t={t + dt:.6g} exceeds {NORM_ABORT:g}; "
                f"reduce dt (limit {stability_limit(self.grid, self.const):.4g})", time=t + dt)
        return State(new, t + dt, state.step + 1)

    # observables --------------------------------------------------------------
    def observe(self, state: State, fields: FieldState) -> Observables:
        g, c = self.grid, self.const
        phi = state.orbitals
        sample = self.sample(state.t)
        norms = norm(g, phi)
        mag = np.array([g.integrate(spin_density(p)) for p in phi]).reshape(-1, 3)
        x = g.positions()
        rho = probability_density(phi) if phi.shape[0] else np.zeros(g.n)
        dipole = c.q * g.integrate(x * rho[None])
        energies = {k: 0.0 for k in ["kinetic"] + list(TermId)}
        pair = 0.0
        for i in range(phi.shape[0]):
            pot = fields.potentials[i] if self.needs_fields else None
            e = ham.term_energies(g, phi[i], pot, sample, c, self.toggles)
            for k, v in e.items():
                energies[k] += v
            pair += sum(e[t] for t in INT + COH)
        one_body = energies["kinetic"] + sum(energies[t] for t in EXT)
        total = one_body + 0.5 * pair
        return Observables(state.t, state.step, norms, mag, dipole, energies, total,
                           phi.shape[0] * c.rest_energy)

    def continuity_terms(self, state: State):
        """Total density and ``div j0`` (orbital + spin + field currents)."""
        sample = self.sample(state.t)
        return (probability_density(state.orbitals),
                current_divergence(self.grid, state.orbitals, sample.a, const=self.const))


def _sum(items):
    out = items[0]
    for it in items[1:]:
        out = out + it
    return out


class ContinuityTracker:
    """Relative residual of the continuity equation at output steps.

    ``d rho/dt`` at step ``s`` uses the five-point stencil ``s-2..s+2``
    when those densities exist.  Near the start of a run the one-sided
    window ``0..4`` is used instead; at the end, whatever points remain
    (up to five nearest) are used.
    """

    def __init__(self, dt: float):
        self.dt = dt
        self.history: dict = {}
        self.pending: dict = {}

    def add(self, step: int, rho):
        self.history[step] = rho

    def request(self, step: int, div_j, callback):
        self.pending[step] = (div_j, callback)

    def _offsets(self, s, final):
        have = self.history
        first = min(have)
        window = range(s - 2, s + 3) if s - 2 >= first else range(first, first + 5)
        if all(k in have for k in window):
            return [k - s for k in window]
        if not final:
            return None
        pts = sorted((k for k in have if abs(k - s) <= 4), key=lambda k: (abs(k - s), k))[:5]
        return sorted(k - s for k in pts)

    def resolve(self, final: bool = False):
        for s in sorted(self.pending):
            offsets = self._offsets(s, final)
            if offsets is None:
                continue
            div_j, cb = self.pending.pop(s)
            if len(offsets) < 2:
                cb(float("nan"))
                continue
            w = fd_weights(offsets)
            drho = sum(wi * self.history[s + o] for wi, o in zip(w, offsets)) / self.dt
            den = np.linalg.norm(drho)
            res = np.linalg.norm(drho + div_j)
            cb(float(res / den) if den > 0 else float(res))
        keep = min(self.pending, default=max(self.history, default=0)) - 4
        first = min(self.history, default=0)
        for k in [k for k in self.history if k < keep and k > first + 4]:
            del self.history[k]


@dataclass
class Trajectory:
    observables: list
    dt: float
    steps: int
    flags: list = field(default_factory=list)

    def column(self, name):
        return np.array([getattr(o, name) for o in self.observables])


def run(prop: Propagator, orbitals, dt: float, t_end: float, every: int = 1,
        t0: float = 0.0, continuity: bool = True, on_output=None) -> Trajectory:
    """Propagate ``orbitals`` from ``t0`` to ``t0 + t_end``.

    The step is shrunk to ``t_end / ceil(t_end/dt)`` so the horizon is hit
    exactly.  Observables are recorded at step 0 and every ``every`` steps
    (and at the last step).  ``on_output(state, fields, obs)`` is called at
    each output step, before the continuity residual is known.
    """
    if t_end < 0:
        raise ConfigurationError("t_end must be non-negative")
    if every < 1:
        raise ConfigurationError("output cadence must be at least 1")
    nsteps = int(math.ceil(t_end / dt - 1e-9)) if t_end > 0 else 0
    if nsteps:
        dt = t_end / nsteps
    state = State(np.array(orbitals, dtype=complex), t0, 0)
    fields = prop.refresh_fields(state.orbitals, prop.sample(t0))
    flags = set(fields.flags)
    tracker = ContinuityTracker(dt) if continuity and nsteps else None
    out = []

    def record(st, fl):
        obs = prop.observe(st, fl)
        out.append(obs)
        if tracker is not None:
            rho, div_j = prop.continuity_terms(st)
            tracker.add(st.step, rho)
            tracker.request(st.step, div_j,
                            lambda v, o=obs: setattr(o, "continuity_residual", v))
        if on_output is not None:
            on_output(st, fl, obs)

    record(state, fields)
    for k in range(1, nsteps + 1):
        try:
            state = prop.step(state, dt, fields)
        except StabilityError as err:
            if tracker is not None:
                tracker.resolve(final=True)
            raise err
        state.t = t0 + k * dt
        fields = prop.refresh_fields(state.orbitals, prop.sample(state.t))
        flags.update(fields.flags)
        if k % every == 0 or k == nsteps:
            record(state, fields)
        elif tracker is not None:
            tracker.add(k, probability_density(state.orbitals))
        if tracker is not None:
            tracker.resolve()
    if tracker is not None:
        tracker.resolve(final=True)
    return Trajectory(out, dt, nsteps, sorted(flags))
