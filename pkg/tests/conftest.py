import numpy as np
import pytest

from mtcdeblur import oracle
from mtcdeblur.model import LaplacianOp, PeriodicModel, Psf
from mtcdeblur.synthetic import standard_problem


def random_psf(rng, shape=(3, 3)):
    return Psf.from_array(rng.random(shape) + 0.05)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def periodic_4x4():
    """Tiny periodic problem with its dense matrices."""
    rng = np.random.default_rng(4)
    psf = random_psf(rng)
    y = 100 * rng.random((4, 4))
    A = oracle.dense_periodic_convolution(psf, (4, 4))
    L = oracle.dense_laplacian((4, 4), "periodic")
    return psf, y, A, L


@pytest.fixture(scope="session")
def problem_8x8():
    x, psf, y = standard_problem(8, gamma=0.25, seed=0)
    return x, psf, y


@pytest.fixture(scope="session")
def dirichlet_small():
    """6x6 observed window, border 1, with dense matrices."""
    x, psf, y = standard_problem(6, sigma=1.0, gamma=0.25, seed=2, boundary="dirichlet", border=1)
    A = oracle.dense_zero_padded_convolution(psf, y.shape, 1)
    L = oracle.dense_laplacian((8, 8), "dirichlet")
    return psf, y, A, L


def periodic_parts(psf, shape):
    model = PeriodicModel(psf, shape)
    return model, LaplacianOp(shape)


_ACCEPTANCE = {}


@pytest.fixture
def acceptance_report():
    """Record one pass/fail line per acceptance criterion."""

    def record(number, title, ok, detail):
        line = f"criterion {number:>2} [{'PASS' if ok else 'FAIL'}] {title}: {detail}"
        _ACCEPTANCE[number] = line
        print(line)
        return ok

    return record


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for number in sorted(_ACCEPTANCE):
            terminalreporter.write_line(_ACCEPTANCE[number])
