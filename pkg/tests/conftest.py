import numpy as np
import pytest

from srpedge import build_grid, default_array, n_samp, tdoa_table

ACCEPTANCE_LINES = []


@pytest.fixture(scope="session")
def array():
    return default_array()


@pytest.fixture(scope="session")
def grid():
    return build_grid(8, 16)


@pytest.fixture(scope="session")
def tdoa(array, grid):
    return tdoa_table(array, grid, 16000)


@pytest.fixture(scope="session")
def bounds(array):
    return n_samp(array, 16000)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def random_phat(rng, n_pairs, K):
    """Unit-magnitude cross-spectra with real DC and Nyquist bins."""
    G = np.exp(1j * rng.uniform(-np.pi, np.pi, size=(n_pairs, K // 2 + 1)))
    G[:, 0] = np.sign(G[:, 0].real)
    G[:, -1] = np.sign(G[:, -1].real)
    return G


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
