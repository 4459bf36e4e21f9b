import numpy as np
import pytest

from groupnls import Grid, NlsParameters
from groupnls.ground_state import ground_state


@pytest.fixture(scope="session")
def p1():
    return NlsParameters(1, 7.0, 1.0)


@pytest.fixture(scope="session")
def grid1():
    return Grid(1, 512, 40.0)


@pytest.fixture(scope="session")
def Q1(p1, grid1):
    return ground_state(p1, grid1)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def random_field(grid, rng, width=None):
    """Smooth random complex field decayed at the box edge."""
    from groupnls.fields import ComplexField

    width = width or grid.length / 10
    env = np.exp(-grid.r2 / (2 * width**2))
    noise = rng.standard_normal(grid.shape) + 1j * rng.standard_normal(grid.shape)
    # low-pass the noise so derivatives stay tame
    kcut = np.exp(-grid.k2 * width**2 / 4)
    smooth = np.fft.ifftn(np.fft.fftn(noise) * kcut)
    return ComplexField(grid, env * smooth / np.max(np.abs(smooth)))


# one line per acceptance criterion, printed after the run
ACCEPTANCE_LINES: dict = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(ACCEPTANCE_LINES[n])
