import math

import numpy as np
import pytest

from spinlight.analysis import fluence_to_field
from spinlight.constants import ATOMIC, to_internal
from spinlight.errors import ConfigurationError
from spinlight.grid import Grid3
from spinlight.laser import ExternalFieldSample, LaserPulse, StaticField, envelope, evaluate_pulse


@pytest.mark.parametrize("kind", ["gaussian", "sin2"])
def test_field_is_minus_time_derivative_of_a(kind):
    p = LaserPulse(a0=0.7, omega=0.5, envelope=kind, duration=12.0, center=8.0,
                   carrier_phase=0.3, polarization=(1, 1, 0))
    h = 1e-4
    for t in np.linspace(3.0, 13.0, 11):
        da = (p.sample(t + h).a - p.sample(t - h).a) / (2 * h)
        assert np.allclose(p.sample(t).e, -da, atol=1e-7)


def test_polarization_normalised():
    p = LaserPulse(a0=1.0, omega=1.0, polarization=(3, 4, 0), envelope="flat")
    assert np.isclose(np.linalg.norm(p.polarization), 1.0)
    s = p.sample(0.0)
    assert np.allclose(s.a, [0.6, 0.8, 0.0])


def test_gaussian_envelope_fwhm():
    f, _ = envelope("gaussian", np.array([5.0 - 2.0, 5.0, 5.0 + 2.0]), 5.0, 4.0)
    # duration is the intensity FWHM
    assert np.allclose(f[[0, 2]] ** 2, 0.5)
    assert f[1] == 1.0


def test_sin2_support():
    t = np.array([-0.01, 0.0, 5.0, 10.0, 10.01])
    f, df = envelope("sin2", t, 5.0, 10.0)
    assert f[0] == 0.0 and f[-1] == 0.0
    assert f[2] == 1.0
    assert np.isclose(f[1], 0.0) and np.isclose(f[3], 0.0)


def test_wavelength_and_omega():
    lam = to_internal(800.0, "nm")
    p = LaserPulse(a0=1.0, wavelength=lam)
    assert math.isclose(p.omega, 2 * math.pi * ATOMIC.c / lam)
    assert math.isclose(p.e0, p.a0 * p.omega)
    with pytest.raises(ConfigurationError):
        LaserPulse(a0=1.0, omega=1.0, wavelength=lam)
    with pytest.raises(ConfigurationError):
        LaserPulse(a0=1.0)


def test_fluence_sets_peak_field():
    lam = to_internal(800.0, "nm")
    dur = to_internal(50.0, "fs")
    p = LaserPulse(wavelength=lam, duration=dur, fluence=to_internal(1.0, "mJ/cm2"))
    e_si = fluence_to_field(1.0, 50e-15)
    assert math.isclose(p.e0, to_internal(e_si, "V/m"), rel_tol=1e-9)


def test_bad_configuration():
    with pytest.raises(ConfigurationError):
        LaserPulse(a0=1.0, omega=1.0, envelope="boxcar")
    with pytest.raises(ConfigurationError):
        LaserPulse(a0=1.0, omega=1.0, polarization=(0, 0, 0))
    with pytest.raises(ConfigurationError):
        LaserPulse(a0=1.0, omega=1.0, spatial="plane-wave", polarization=(0, 0, 1), direction=(0, 0, 1))
    with pytest.raises(ConfigurationError):
        envelope("gaussian", 0.0, 0.0, 0.0)


def test_plane_wave_fields():
    g = Grid3(8, 4.0)
    p = LaserPulse(a0=0.5, omega=0.3, envelope="flat", spatial="plane-wave",
                   polarization=(1, 0, 0), direction=(0, 0, 1))
    s = p.sample(1.0, g)
    assert s.a.shape == (3,) + g.n
    # transverse wave: B = k x E / c
    assert np.allclose(s.b[1], s.e[0] / ATOMIC.c)
    assert np.allclose(s.b[0], 0) and np.allclose(s.b[2], 0)
    # along z the phase is retarded by z/c
    dip = LaserPulse(a0=0.5, omega=0.3, envelope="flat")
    z = g.axes[2][3]
    assert np.isclose(s.a[0, 0, 0, 3], dip.sample(1.0 - z / ATOMIC.c).a[0])
    with pytest.raises(ConfigurationError):
        p.sample(0.0)


def test_static_and_missing_pulse():
    sf = StaticField(b=np.array([0, 0, 0.1]))
    s = evaluate_pulse(sf, 3.0)
    assert s.t == 3.0 and np.allclose(s.b, [0, 0, 0.1])
    z = evaluate_pulse(None, 1.0)
    assert z.is_zero() and z.uniform


def test_sample_scaling():
    s = ExternalFieldSample(0.0, [1, 2, 3], [0, 1, 0], [0, 0, 1], 0.5, 0.1)
    t = s.scaled(2.0)
    assert np.allclose(t.a, [2, 4, 6]) and t.phi == 1.0 and t.div_e == 0.2
