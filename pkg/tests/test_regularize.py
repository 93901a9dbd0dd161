import numpy as np
import pytest

from mtcdeblur import oracle
from mtcdeblur.exceptions import DomainError, NoCornerError, SingularSystemError
from mtcdeblur.model import LaplacianOp, PeriodicModel, Psf, ZeroPaddedModel
from mtcdeblur.regularize import (
    LCurve,
    build_lcurve,
    default_lambda_grid,
    lcurve_corner,
    solve_gendeconv,
)
from mtcdeblur.solvers import TIGHT_SOLVER
from mtcdeblur.synthetic import standard_problem


def test_periodic_solve_matches_dense(periodic_4x4):
    psf, y, A, L = periodic_4x4
    m = PeriodicModel(psf, (4, 4))
    for lam in (1e-4, 0.3, 50.0):
        x = solve_gendeconv(m, LaplacianOp((4, 4)), lam, y)
        np.testing.assert_allclose(x.ravel(), oracle.dense_gendeconv(A, L, y.ravel(), lam), rtol=1e-9)


def test_zero_padded_solve_matches_dense(dirichlet_small):
    psf, y, A, L = dirichlet_small
    m = ZeroPaddedModel(psf, y.shape, 1)
    lap = LaplacianOp(m.latent_shape, "dirichlet")
    x = solve_gendeconv(m, lap, 0.05, y, TIGHT_SOLVER)
    np.testing.assert_allclose(x.ravel(), oracle.dense_gendeconv(A, L, y.ravel(), 0.05), rtol=1e-6)


def test_singular_and_domain_errors():
    m = PeriodicModel(Psf(np.array([[0.5, 0.5]]), (0, 0)), (4, 4))
    with pytest.raises(SingularSystemError):
        solve_gendeconv(m, LaplacianOp((4, 4)), 0.0, np.ones((4, 4)))
    with pytest.raises(DomainError):
        solve_gendeconv(m, LaplacianOp((4, 4)), -1.0, np.ones((4, 4)))


def test_lcurve_monotone_and_matches_direct():
    _, psf, y = standard_problem(16, seed=3)
    m = PeriodicModel(psf, y.shape)
    lap = LaplacianOp(y.shape)
    grid = default_lambda_grid(m, lap, size=30)
    assert grid.size == 30 and np.all(np.diff(grid) > 0)
    curve = build_lcurve(m, lap, y, grid)
    assert np.all(np.diff(curve.residual_norms) >= -1e-9)
    assert np.all(np.diff(curve.seminorms) <= 1e-9)
    k = 11
    x = solve_gendeconv(m, lap, grid[k], y)
    np.testing.assert_allclose(curve.residual_norms[k], np.linalg.norm(m.forward(x) - y), rtol=1e-9)
    np.testing.assert_allclose(curve.seminorms[k], np.sqrt(lap.quadratic(x)), rtol=1e-9)
    assert 0 < curve.corner_index < 29


def test_lcurve_zero_padded(dirichlet_small):
    psf, y, _, _ = dirichlet_small
    m = ZeroPaddedModel(psf, y.shape, 1)
    lap = LaplacianOp(m.latent_shape, "dirichlet")
    curve = build_lcurve(m, lap, y, np.logspace(-4, 1, 8), TIGHT_SOLVER)
    assert np.all(np.diff(curve.residual_norms) >= -1e-6)


def test_corner_of_synthetic_l():
    rho = np.concatenate([np.full(5, 1.0) * np.geomspace(1, 1.01, 5), np.geomspace(1.02, 100, 5)])
    eta = np.concatenate([np.geomspace(100, 1.02, 5), np.geomspace(1.01, 1, 5)])
    curve = LCurve(np.arange(1.0, 11.0), rho, eta, 0)
    lam, idx = lcurve_corner(curve)
    assert idx in (4, 5) and lam == idx + 1


def test_corner_errors():
    line = LCurve(np.arange(1.0, 6.0), np.geomspace(1, 10, 5), np.geomspace(10, 1, 5), 0)
    with pytest.raises(NoCornerError):
        lcurve_corner(line)
    with pytest.raises(NoCornerError):
        lcurve_corner(LCurve(np.ones(2), np.ones(2), np.ones(2), 0))
    with pytest.raises(DomainError):
        build_lcurve(PeriodicModel(Psf.delta(), (2, 2)), LaplacianOp((2, 2)), np.ones((2, 2)), [2.0, 1.0])


def test_lcurve_csv(tmp_path):
    curve = LCurve(np.array([0.1, 1.0]), np.array([1.0, 2.0]), np.array([3.0, 0.5]), 0)
    curve.write_csv(tmp_path / "l.csv")
    lines = (tmp_path / "l.csv").read_text().splitlines()
    assert lines[0] == "lambda,residual,seminorm" and lines[1] == "0.1,1.0,3.0"
