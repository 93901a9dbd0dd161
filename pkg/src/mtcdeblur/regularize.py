"""Regularized deconvolution and L-curve selection of the regularization parameter."""

import csv
from dataclasses import dataclass

import numpy as np
import scipy.signal

from .exceptions import DimensionError, DomainError, NoCornerError, SingularSystemError
from .model import PeriodicModel
from .solvers import DEFAULT_SOLVER, iterative_solve

DEFAULT_GRID_SIZE = 200


def _periodic_parts(model, laplacian, y):
    if laplacian.shape != model.shape:
        raise DimensionError("Laplacian and model shapes differ")
    y = np.asarray(y, dtype=float)
    if y.shape != model.shape:
        raise DimensionError(f"data has shape {y.shape}, expected {model.shape}")
    A2 = np.abs(model.Ahat) ** 2
    return A2, laplacian.spectrum(), np.conj(model.Ahat) * np.fft.fft2(y)


def solve_gendeconv(model, laplacian, lam, y, solver_config=DEFAULT_SOLVER, x0=None):
    """Solve ``(A^T A + lam L) x = A^T y``.

    Periodic models are solved exactly mode by mode; zero-padded models use
    the matrix-free Krylov solver with ``solver_config``.
    """
    lam = float(lam)
    if not lam >= 0:
        raise DomainError(f"lambda must be nonnegative, got {lam!r}")
    if isinstance(model, PeriodicModel):
        A2, Lhat, qhat = _periodic_parts(model, laplacian, y)
        denom = A2 + lam * Lhat
        if np.any(denom == 0):
            raise SingularSystemError(
                f"A^T A + {lam:g} L is singular ({int(np.sum(denom == 0))} zero modes)"
            )
        return np.fft.ifft2(qhat / denom).real
    if lam == 0:
        raise SingularSystemError("A^T A is singular for the zero-padded model")
    rhs = model.adjoint(y)
    x, _, _ = iterative_solve(
        lambda v: model.normal(v) + lam * laplacian.apply(v), rhs, solver_config, x0=x0
    )
    return x


@dataclass
class LCurve:
    lambdas: np.ndarray
    residual_norms: np.ndarray
    seminorms: np.ndarray
    corner_index: int

    @property
    def corner_lambda(self):
        return float(self.lambdas[self.corner_index])

    def write_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["lambda", "residual", "seminorm"])
            for row in zip(self.lambdas, self.residual_norms, self.seminorms):
                w.writerow([repr(float(v)) for v in row])


def default_lambda_grid(model, laplacian=None, size=DEFAULT_GRID_SIZE):
    """Log-spaced grid on ``[1e-8, 1e2] * ||A^T A||_1 / ||L||_1``.

    Both operators are (restrictions of) convolutions, so their 1-norms are
    the absolute sums of their stencils: ``||k * k~||_1`` and 8.
    """
    k = model.psf.kernel
    ata = scipy.signal.correlate(k, k, mode="full")
    scale = np.abs(ata).sum() / 8.0
    return np.logspace(np.log10(1e-8 * scale), np.log10(1e2 * scale), int(size))


def build_lcurve(model, laplacian, y, lambda_grid=None, solver_config=DEFAULT_SOLVER):
    """Residual and seminorm of the regularized solution at each grid point."""
    lambdas = np.asarray(
        default_lambda_grid(model, laplacian) if lambda_grid is None else lambda_grid, dtype=float
    )
    if lambdas.ndim != 1 or lambdas.size == 0 or np.any(lambdas <= 0):
        raise DomainError("lambda grid must be a non-empty vector of positive values")
    if np.any(np.diff(lambdas) <= 0):
        raise DomainError("lambda grid must be strictly increasing")
    K = lambdas.size
    res = np.empty(K)
    semi = np.empty(K)
    if isinstance(model, PeriodicModel):
        # Parseval: no inverse transforms needed
        A2, Lhat, qhat = _periodic_parts(model, laplacian, y)
        yhat = np.fft.fft2(np.asarray(y, dtype=float))
        n = model.n
        for k, lam in enumerate(lambdas):
            xhat = qhat / (A2 + lam * Lhat)
            res[k] = np.sqrt(np.sum(np.abs(model.Ahat * xhat - yhat) ** 2) / n)
            semi[k] = np.sqrt(np.sum(Lhat * np.abs(xhat) ** 2) / n)
    else:
        x = None
        for k, lam in enumerate(lambdas):
            x = solve_gendeconv(model, laplacian, lam, y, solver_config, x0=x)
            res[k] = np.linalg.norm(model.forward(x) - y)
            semi[k] = np.sqrt(max(laplacian.quadratic(x), 0.0))
    curve = LCurve(lambdas, res, semi, 0)
    if K >= 3:
        try:
            curve.corner_index = lcurve_corner(curve)[1]
        except NoCornerError:
            curve.corner_index = 0
    return curve


def _menger(P1, P2, P3):
    """Signed curvature of the circle through three points."""
    a = P2 - P1
    b = P3 - P2
    c = P3 - P1
    cross = a[..., 0] * b[..., 1] - a[..., 1] * b[..., 0]
    denom = np.linalg.norm(a, axis=-1) * np.linalg.norm(b, axis=-1) * np.linalg.norm(c, axis=-1)
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.where(denom > 0, 2.0 * cross / denom, 0.0)


def lcurve_corner(curve, collinear_tol=1e-8):
    """Grid point of maximum signed Menger curvature of the log-log L-curve.

    Points that break monotonicity (residual must not decrease, seminorm must
    not increase along the grid) are dropped first.  Returns ``(lambda, index)``
    with ``index`` into the original grid.
    """
    lam = np.asarray(curve.lambdas, dtype=float)
    rho = np.asarray(curve.residual_norms, dtype=float)
    eta = np.asarray(curve.seminorms, dtype=float)
    if lam.size < 3:
        raise NoCornerError("need at least 3 points")
    keep = [0]
    for i in range(1, lam.size):
        j = keep[-1]
        if rho[i] >= rho[j] and eta[i] <= eta[j] and (rho[i], eta[i]) != (rho[j], eta[j]):
            keep.append(i)
    keep = np.array(keep)
    if keep.size < 3 or np.any(rho[keep] <= 0) or np.any(eta[keep] <= 0):
        raise NoCornerError("fewer than 3 usable monotone points")
    P = np.column_stack([np.log(rho[keep]), np.log(eta[keep])])
    kappa = _menger(P[:-2], P[1:-1], P[2:])
    best = int(np.argmax(kappa))
    if not kappa[best] > collinear_tol:
        raise NoCornerError("L-curve is collinear; no corner")
    idx = int(keep[best + 1])
    return float(lam[idx]), idx


__all__ = [
    "solve_gendeconv",
    "LCurve",
    "default_lambda_grid",
    "build_lcurve",
    "lcurve_corner",
]
