import numpy as np
import pytest

from weaktime.grid import TemporalGrid
from weaktime.states import DensityMatrix, PureState, gaussian_pulse, mix, pure_to_density, superpose

_ACCEPTANCE: dict[int, str] = {}


@pytest.fixture
def report():
    """Record a one-line pass/fail verdict for an acceptance criterion."""

    def _report(number: int, title: str, ok: bool, detail: str) -> bool:
        _ACCEPTANCE[number] = f"[{'PASS' if ok else 'FAIL'}] {number:2d}. {title}: {detail}"
        print(_ACCEPTANCE[number])
        return ok

    return _report


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(_ACCEPTANCE):
        terminalreporter.write_line(_ACCEPTANCE[k])


@pytest.fixture
def grid64():
    return TemporalGrid(64, 0.25)


@pytest.fixture
def grid128():
    return TemporalGrid(128, 0.2)


@pytest.fixture
def chirped(grid128):
    return gaussian_pulse(grid128, 0.4, 1.0, chirp=0.3)


@pytest.fixture
def two_pulse(grid128):
    a = gaussian_pulse(grid128, 2.0, 0.7)
    b = gaussian_pulse(grid128, -2.0, 0.7)
    return superpose([(a, 1.0), (b, 0.6 * np.exp(0.8j))])


@pytest.fixture
def mixed(grid128):
    a = pure_to_density(gaussian_pulse(grid128, 1.5, 0.8, chirp=0.2))
    b = pure_to_density(gaussian_pulse(grid128, -1.5, 1.0))
    return mix([(a, 0.6), (b, 0.4)])


def random_pure(grid: TemporalGrid, rng) -> PureState:
    v = rng.normal(size=grid.n_points) + 1j * rng.normal(size=grid.n_points)
    return PureState(grid, v / np.sqrt(np.sum(np.abs(v) ** 2) * grid.dt))


def random_density(grid: TemporalGrid, rng, rank: int = 3) -> DensityMatrix:
    a = rng.normal(size=(grid.n_points, rank)) + 1j * rng.normal(size=(grid.n_points, rank))
    r = a @ a.conj().T
    r /= np.trace(r).real
    return DensityMatrix(grid, r / grid.dt)
