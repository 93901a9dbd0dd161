import numpy as np
import pytest

from mtcdeblur.exceptions import ConvergenceError, ParameterError
from mtcdeblur.solvers import DEFAULT_SOLVER, IterativeSolverConfig, iterative_solve


def _spd(rng, n, cond=100.0):
    Q, _ = np.linalg.qr(rng.standard_normal((n, n)))
    return Q @ np.diag(np.geomspace(1, cond, n)) @ Q.T


@pytest.mark.parametrize("method", ["gmres", "cg"])
def test_solves_to_tolerance(method, rng):
    M = _spd(rng, 30)
    b = rng.standard_normal((5, 6))
    cfg = IterativeSolverConfig(rel_tol=1e-9, method=method, max_iters=5000)
    x, res, its = iterative_solve(lambda v: (M @ v.ravel()).reshape(5, 6), b, cfg)
    assert x.shape == b.shape
    np.testing.assert_allclose(x.ravel(), np.linalg.solve(M, b.ravel()), rtol=1e-6)
    assert res <= 10 * 1e-9 * np.linalg.norm(b)
    assert its > 0


def test_zero_rhs_and_nonfinite(rng):
    x, res, its = iterative_solve(lambda v: v, np.zeros(4))
    assert its == 0 and res == 0 and not x.any()
    with pytest.raises(ValueError):
        iterative_solve(lambda v: v, np.array([1.0, np.nan]))


def test_preconditioner_and_warm_start(rng):
    M = _spd(rng, 40, cond=1e4)
    b = rng.standard_normal(40)
    Minv = np.linalg.inv(M)
    cfg = IterativeSolverConfig(rel_tol=1e-10, method="cg", preconditioner=lambda v: Minv @ v)
    _, _, its = iterative_solve(lambda v: M @ v, b, cfg)
    assert its <= 2
    exact = np.linalg.solve(M, b)
    _, _, its0 = iterative_solve(lambda v: M @ v, b, IterativeSolverConfig(rel_tol=1e-6), x0=exact)
    assert its0 <= 1


def test_nonconvergence_carries_best_iterate(rng):
    M = _spd(rng, 50, cond=1e6)
    b = rng.standard_normal(50)
    cfg = IterativeSolverConfig(rel_tol=1e-12, max_iters=3, restart=3)
    with pytest.raises(ConvergenceError) as exc:
        iterative_solve(lambda v: M @ v, b, cfg)
    assert exc.value.best.shape == b.shape
    assert exc.value.residual > 0


def test_config_validation():
    assert DEFAULT_SOLVER.restart == 25 and DEFAULT_SOLVER.rel_tol == 1e-3 and DEFAULT_SOLVER.max_iters == 2500
    for kw in ({"restart": 0}, {"rel_tol": 0.0}, {"rel_tol": 1.0}, {"max_iters": 0}, {"method": "lu"}):
        with pytest.raises(ParameterError):
            IterativeSolverConfig(**kw)
