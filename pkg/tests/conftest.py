import numpy as np
import pytest

from spinlight.grid import Grid3
from spinlight.laser import ExternalFieldSample
from spinlight.perf import tune_allocator
from spinlight.scenario import gaussian_packet

tune_allocator()


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture(scope="session")
def small_grid():
    return Grid3((16, 16, 16), (12.0, 12.0, 12.0))


@pytest.fixture(scope="session")
def pair(small_grid):
    """Two spin-polarised moving packets on the small grid."""
    g = small_grid
    return np.array([
        gaussian_packet(g, (-1.0, 0.0, 0.0), 1.2, (0.5, 0.2, 0.0), (1, 0, 0)),
        gaussian_packet(g, (1.0, 0.5, 0.0), 1.2, (0.0, 0.5, 0.0), (0, 1, 1)),
    ])


@pytest.fixture(scope="session")
def field_sample():
    return ExternalFieldSample(0.0, [0.3, 0.1, -0.2], [0.05, 0.1, 0.02], [0.01, 0.02, 0.05])


def random_spinor(rng, grid, count=None):
    """Band-limited random spinor(s); the Nyquist planes are cleared."""
    shape = ((count,) if count else ()) + (2,) + grid.n
    fh = rng.normal(size=shape) + 1j * rng.normal(size=shape)
    for ax in (-3, -2, -1):
        n = shape[ax]
        if n % 2 == 0:
            idx = [slice(None)] * len(shape)
            idx[ax] = n // 2
            fh[tuple(idx)] = 0
    return np.fft.ifftn(fh, axes=(-3, -2, -1))


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import RESULTS
    except ImportError:
        return
    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in RESULTS:
            terminalreporter.write_line(line)
