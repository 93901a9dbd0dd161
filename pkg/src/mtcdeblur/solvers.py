"""Matrix-free Krylov solves for symmetric positive-definite operators."""

import math
from dataclasses import dataclass

import numpy as np
import scipy.sparse.linalg as spla

from .exceptions import ConvergenceError, ParameterError


@dataclass(frozen=True)
class IterativeSolverConfig:
    """Restarted Krylov settings.

    Parameters
    ----------
    restart : int
        GMRES cycle length.
    rel_tol : float
        Stop when ``||op(x) - rhs|| <= rel_tol * ||rhs||``.
    max_iters : int
        Total inner iterations across restarts.
    method : {"gmres", "cg"}
    preconditioner : callable or None
        Optional hook ``M(v)`` approximating ``op^{-1} v``.
    """

    restart: int = 25
    rel_tol: float = 1e-3
    max_iters: int = 2500
    method: str = "gmres"
    preconditioner: object = None

    def __post_init__(self):
        if self.restart < 1:
            raise ParameterError("restart must be >= 1")
        if not 0 < self.rel_tol < 1:
            raise ParameterError("rel_tol must lie in (0, 1)")
        if self.max_iters < 1:
            raise ParameterError("max_iters must be >= 1")
        if self.method not in ("gmres", "cg"):
            raise ParameterError(f"unknown method {self.method!r}")


RESIDUAL_SLACK = 10.0

DEFAULT_SOLVER = IterativeSolverConfig()
TIGHT_SOLVER = IterativeSolverConfig(rel_tol=1e-8, max_iters=20000, method="cg")


@dataclass(frozen=True)
class SolveResult:
    solution: np.ndarray
    residual_norm: float
    iterations: int

    def __iter__(self):
        return iter((self.solution, self.residual_norm, self.iterations))


def iterative_solve(op, rhs, config=DEFAULT_SOLVER, x0=None):
    """Solve ``op(x) = rhs`` for a matrix-free SPD ``op``.

    ``rhs`` may have any shape; ``op`` is called on arrays of that shape.
    Returns ``(solution, residual_norm, iterations)``.  Raises
    :class:`ConvergenceError` (with the best iterate attached) if the
    tolerance is not met within ``config.max_iters``.
    """
    rhs = np.asarray(rhs, dtype=float)
    shape = rhs.shape
    b = rhs.ravel()
    n = b.size
    bnorm = float(np.linalg.norm(b))
    if not np.all(np.isfinite(b)):
        raise ValueError("right-hand side is not finite")
    if bnorm == 0.0:
        return SolveResult(np.zeros(shape), 0.0, 0)

    count = [0]

    def matvec(v):
        return np.array(op(v.reshape(shape)), dtype=float).ravel()  # op may alias v

    def callback(_):
        count[0] += 1

    A = spla.LinearOperator((n, n), matvec=matvec, dtype=float)
    M = None
    if config.preconditioner is not None:
        pre = config.preconditioner
        M = spla.LinearOperator((n, n), matvec=lambda v: np.asarray(pre(v.reshape(shape))).ravel())
    guess = None if x0 is None else np.asarray(x0, dtype=float).ravel()
    if config.method == "gmres":
        restart = min(config.restart, n)
        x, info = spla.gmres(
            A, b, x0=guess, rtol=config.rel_tol, atol=0.0, restart=restart,
            maxiter=math.ceil(config.max_iters / restart), M=M,
            callback=callback, callback_type="pr_norm",
        )
    else:
        x, info = spla.cg(A, b, x0=guess, rtol=config.rel_tol, atol=0.0,
                          maxiter=config.max_iters, M=M, callback=callback)
    res = float(np.linalg.norm(matvec(x) - b))
    # the Krylov recursions track an updated residual; allow for its drift
    if info != 0 or res > RESIDUAL_SLACK * config.rel_tol * bnorm:
        raise ConvergenceError(
            f"{config.method} stopped after {count[0]} iterations with relative residual "
            f"{res / bnorm:.3e} > {config.rel_tol:g}",
            best=x.reshape(shape),
            residual=res,
        )
    return SolveResult(x.reshape(shape), res, count[0])
