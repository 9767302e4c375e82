import numpy as np
import pytest

from spinlight.constants import ATOMIC
from spinlight.errors import ConfigurationError
from spinlight.grid import Grid3, probability_density
from spinlight.scenario import gaussian_packet
from spinlight.sources import (build_sources, current2_diagnostic, current_divergence, field_current,
                               orbital_current, rho2_field, rho2_orbital, rho2_spin, spin_current)

from conftest import random_spinor

C = ATOMIC
C2 = C.m**2 * C.c**2


@pytest.fixture(scope="module")
def packet():
    g = Grid3(32, 20.0)
    w, k = 1.2, 2 * np.pi / 20 * np.array([1.0, -1.0, 2.0])
    phi = gaussian_packet(g, (0.0, 0.0, 0.0), w, k, (0, 0, 1))[None]
    d = g.positions()
    rho = np.exp(-(d**2).sum(0) / (2 * w * w)) / (2 * np.pi * w * w) ** 1.5
    return g, phi, w, k, d, rho


def test_density_matches_analytic(packet):
    g, phi, w, k, d, rho = packet
    assert np.abs(probability_density(phi) - rho).max() < 1e-10 * rho.max()


def test_orbital_current_is_velocity_times_density(packet):
    g, phi, w, k, d, rho = packet
    j = orbital_current(g, phi)
    assert np.abs(j - (C.hbar / C.m) * k[:, None, None, None] * rho).max() < 1e-8 * rho.max()


def test_rho2_orbital_analytic(packet):
    g, phi, w, k, d, rho = packet
    r2 = (d**2).sum(0)
    lap = rho * (r2 / w**4 - 3 / w**2)
    ref = C.hbar**2 / (8 * C2) * lap
    assert np.abs(rho2_orbital(g, phi) - ref).max() < 1e-8 * np.abs(ref).max()


def test_rho2_field_analytic(packet):
    g, phi, w, k, d, rho = packet
    a = np.array([0.3, -0.5, 0.4])
    # s = rho z, div(s x A) = grad(rho) . (z x A)
    zxa = np.cross([0, 0, 1.0], a)
    ref = -C.q * C.hbar / (4 * C2) * np.tensordot(zxa, -d / w**2, 1) * rho
    assert np.abs(rho2_field(g, phi, a) - ref).max() < 1e-8 * np.abs(ref).max()


def test_field_current(packet):
    g, phi, w, k, d, rho = packet
    a = np.array([0.1, 0.2, -0.3])
    ref = -(C.q / C.m) * a[:, None, None, None] * rho
    assert np.allclose(field_current(g, phi, a), ref, atol=1e-12)


def test_spin_current_divergence_free(pair, small_grid):
    g = small_grid
    js = spin_current(g, pair)
    assert np.abs(g.divergence(js)).max() < 1e-12 * np.abs(js).max() * 100


def test_second_order_densities_integrate_to_zero(pair, small_grid):
    g = small_grid
    src = build_sources(g, pair, [0.3, -0.5, 0.4])
    for name in ("rho2_orb", "rho2_spin", "rho2_field"):
        total = g.integrate(getattr(src, name))
        scale = g.integrate(np.abs(getattr(src, name)))
        assert abs(total) <= 1e-12 * scale, name


def test_build_sources_matches_single_functions(pair, small_grid):
    g = small_grid
    a = np.array([0.2, 0.0, -0.1])
    src = build_sources(g, pair, a)
    assert np.allclose(src.j_orb, orbital_current(g, pair))
    assert np.allclose(src.j_spin, spin_current(g, pair))
    assert np.allclose(src.j_field, field_current(g, pair, a))
    assert np.allclose(src.rho2_orb, rho2_orbital(g, pair))
    assert np.allclose(src.rho2_spin, rho2_spin(g, pair))
    assert np.allclose(src.rho2_field, rho2_field(g, pair, a))


def test_sources_additive_over_orbitals(pair, small_grid):
    g = small_grid
    a = [0.1, 0.3, 0.0]
    both = build_sources(g, pair, a)
    summed = build_sources(g, pair[:1], a) + build_sources(g, pair[1:], a)
    for name in both._ARRAYS:
        assert np.allclose(getattr(both, name), getattr(summed, name))
    excl = build_sources(g, pair, a, exclude=0)
    assert excl.exclusion == (0,)
    assert np.allclose(excl.rho0, probability_density(pair[1:]))


def test_exclude_everything_gives_zeros(pair, small_grid):
    src = build_sources(small_grid, pair, exclude=[0, 1])
    assert not np.any(src.rho0) and not np.any(src.j0)


def test_rho2_field_linear_in_a(pair, small_grid):
    g = small_grid
    a = np.array([0.3, -0.1, 0.2])
    r1 = rho2_field(g, pair, a)
    assert np.allclose(rho2_field(g, pair, 2.5 * a), 2.5 * r1)
    assert not np.any(rho2_field(g, pair, np.zeros(3)))


def test_spin_vorticity_density_vanishes_without_momentum():
    g = Grid3(16, 12.0)
    phi = gaussian_packet(g, (0, 0, 0), 1.5, (0, 0, 0), (1, 1, 0))[None]
    assert np.abs(rho2_spin(g, phi)).max() < 1e-14


def test_current_divergence_exact_for_band_limited(rng):
    g = Grid3(16, 10.0)
    phi = random_spinor(rng, g, 2)
    lhs = (C.hbar / C.m) * np.imag(np.conj(phi) * g.laplacian(phi)).sum((0, 1))
    rhs = current_divergence(g, phi)
    assert np.abs(lhs - rhs).max() < 1e-10 * np.abs(lhs).max()


def test_current_divergence_of_packet(packet):
    g, phi, w, k, d, rho = packet
    ref = (C.hbar / C.m) * np.tensordot(k, -d / w**2, 1) * rho
    assert np.abs(current_divergence(g, phi) - ref).max() < 1e-8 * np.abs(ref).max()


def test_current2_static_part(packet):
    g, phi, w, k, d, rho = packet
    e = np.array([0.0, 0.2, 0.0])
    j2 = current2_diagnostic(g, phi, e, np.zeros(3), time_terms=False)
    ref = -(C.q * C.hbar / (4 * C2)) * np.cross([0, 0, 1.0], e)[:, None, None, None] * rho
    assert np.allclose(j2, ref, atol=1e-14)
    with pytest.raises(ConfigurationError):
        current2_diagnostic(g, phi, e, np.zeros(3))


def test_current2_time_terms_vanish_for_static_state(packet):
    g, phi, w, k, d, rho = packet
    e = np.array([0.0, 0.2, 0.0])
    static = current2_diagnostic(g, phi, e, np.zeros(3), time_terms=False)
    full = current2_diagnostic(g, phi, e, np.zeros(3), before=phi, after=phi, dt=0.1)
    assert np.allclose(full, static)
