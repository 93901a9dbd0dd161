"""Dense brute-force references for testing.

Everything here assembles explicit matrices and factorizes them, so it is
only usable for small problems (n, m up to a few hundred).  The convolution
and Laplacian matrices are built by explicit index loops, independently of
the FFT and stencil code in :mod:`mtcdeblur.model`.  Production code never
imports this module.
"""

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .exceptions import GridTooSmallError, SingularSystemError

_SYM_TOL = 1e-10


def dense_periodic_convolution(psf, shape):
    """``A[i, j]`` for circular convolution of a ``shape`` image with ``psf``."""
    p, q = shape
    n = p * q
    A = np.zeros((n, n))
    kh, kw = psf.kernel.shape
    ar, ac = psf.anchor
    for r in range(p):
        for c in range(q):
            i = r * q + c
            for u in range(kh):
                for v in range(kw):
                    # (Ax)[r, c] += k[u, v] * x[r - (u - ar), c - (v - ac)]
                    rr = (r - (u - ar)) % p
                    cc = (c - (v - ac)) % q
                    A[i, rr * q + cc] += psf.kernel[u, v]
    return A


def dense_zero_padded_convolution(psf, observed_shape, border):
    """``A`` for the bordered latent image observed on its central window."""
    p, q = observed_shape
    P, Q = p + 2 * border, q + 2 * border
    A = np.zeros((p * q, P * Q))
    kh, kw = psf.kernel.shape
    ar, ac = psf.anchor
    for r in range(p):
        for c in range(q):
            i = r * q + c
            R, C = r + border, c + border
            for u in range(kh):
                for v in range(kw):
                    rr, cc = R - (u - ar), C - (v - ac)
                    if 0 <= rr < P and 0 <= cc < Q:
                        A[i, rr * Q + cc] += psf.kernel[u, v]
    return A


def dense_laplacian(shape, boundary="periodic"):
    """Dense 5-point graph Laplacian; ``"dirichlet"`` keeps diagonal 4 at the border."""
    p, q = shape
    n = p * q
    L = np.zeros((n, n))
    for r in range(p):
        for c in range(q):
            i = r * q + c
            for dr, dc in ((-1, 0), (1, 0), (0, -1), (0, 1)):
                rr, cc = r + dr, c + dc
                if boundary == "periodic":
                    rr, cc = rr % p, cc % q
                    L[i, i] += 1
                    L[i, rr * q + cc] -= 1
                else:
                    L[i, i] += 1
                    if 0 <= rr < p and 0 <= cc < q:
                        L[i, rr * q + cc] -= 1
    return L


def _check_sym_psd(M, name, definite=False):
    M = np.asarray(M, dtype=float)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise ValueError(f"{name} must be square")
    scale = max(np.abs(M).max(), 1.0)
    if not np.allclose(M, M.T, rtol=0, atol=_SYM_TOL * scale):
        raise ValueError(f"{name} is not symmetric")
    ev = np.linalg.eigvalsh(M)
    if ev.min() < -_SYM_TOL * scale or (definite and ev.min() <= 0):
        raise ValueError(f"{name} is not positive {'definite' if definite else 'semidefinite'}")
    return M


@dataclass
class DenseModel:
    """``y | x ~ N(Ax, Sigma)``, ``x ~ N(mu, Q^{-1})`` (Q may be singular)."""

    A: np.ndarray
    Sigma: np.ndarray
    Q: np.ndarray
    mu: np.ndarray
    y: np.ndarray
    L: np.ndarray = None

    def __post_init__(self):
        self.A = np.atleast_2d(np.asarray(self.A, dtype=float))
        m, n = self.A.shape
        self.Sigma = _check_sym_psd(np.atleast_2d(self.Sigma), "Sigma", definite=True)
        self.Q = _check_sym_psd(np.atleast_2d(self.Q), "Q")
        self.mu = np.asarray(self.mu, dtype=float).reshape(n)
        self.y = np.asarray(self.y, dtype=float).reshape(m)
        if self.Sigma.shape != (m, m) or self.Q.shape != (n, n):
            raise ValueError("inconsistent dense model dimensions")

    @classmethod
    def hierarchical(cls, A, L, y, gamma, delta):
        """``Sigma = I / gamma``, ``Q = delta L``, ``mu = 0``."""
        A = np.atleast_2d(np.asarray(A, dtype=float))
        m, n = A.shape
        return cls(A, np.eye(m) / gamma, delta * np.asarray(L, dtype=float), np.zeros(n), y, L=L)


def _logdet_spd(M):
    try:
        c = scipy.linalg.cho_factor(M, lower=True)
    except np.linalg.LinAlgError as exc:
        raise SingularSystemError(str(exc)) from exc
    return 2.0 * np.sum(np.log(np.diag(c[0]))), c


def _pseudo_logdet(Q, rtol=1e-10):
    ev, V = np.linalg.eigh(Q)
    tol = rtol * max(abs(ev).max(), 1e-300)
    keep = ev > tol
    return float(np.sum(np.log(ev[keep]))), V[:, ~keep]


@dataclass(frozen=True)
class MarginalInfo:
    value: float
    pseudo_determinant: bool
    null_dim: int


def log_marginal_general(dense, prior_logdensity=0.0, nugget=None, return_info=False):
    """``log pi(theta | y)`` up to a theta-independent constant (no ``2 pi`` factors).

    ``log sqrt(det(Sigma^-1) det(Q) / det(Q + A^T Sigma^-1 A))
    - 1/2 (y^T Sigma^-1 y + mu^T Q mu - b^T (Q + A^T Sigma^-1 A)^-1 b) + log prior``
    with ``b = A^T Sigma^-1 y + Q mu``.

    A singular ``Q`` uses its pseudo-determinant (flagged in the info).  With
    ``nugget`` set, ``nugget * P`` is added to ``Q`` where ``P`` projects onto
    its null space, which makes the result exact for the regularized prior.
    """
    A, Sigma, Q, mu, y = dense.A, dense.Sigma, dense.Q.copy(), dense.mu, dense.y
    ld_Q, null = _pseudo_logdet(Q)
    k = null.shape[1]
    if k and nugget is not None:
        Q = Q + nugget * (null @ null.T)
        ld_Q += k * np.log(nugget)
        k_flag = False
    else:
        k_flag = k > 0
    ld_S, cS = _logdet_spd(Sigma)
    SiA = scipy.linalg.cho_solve(cS, A)
    Siy = scipy.linalg.cho_solve(cS, y)
    M = Q + A.T @ SiA
    ld_M, cM = _logdet_spd(M)
    b = A.T @ Siy + Q @ mu
    quad = y @ Siy + mu @ Q @ mu - b @ scipy.linalg.cho_solve(cM, b)
    if callable(prior_logdensity):
        raise TypeError("pass the prior log-density value, not a callable")
    value = 0.5 * (-ld_S + ld_Q - ld_M) - 0.5 * quad + float(prior_logdensity)
    if return_info:
        return MarginalInfo(float(value), bool(k_flag), int(k))
    return float(value)


def hierarchical_log_marginal(A, L, y, gamma, delta, prior=None, nugget=None):
    """Oracle marginal for the ``(gamma, delta)`` model; ``prior`` is a callable or object with ``logpdf``."""
    dense = DenseModel.hierarchical(A, L, y, gamma, delta)
    lp = 0.0
    if prior is not None:
        lp = prior.logpdf(gamma, delta) if hasattr(prior, "logpdf") else prior(gamma, delta)
    return log_marginal_general(dense, lp, nugget=None if nugget is None else nugget * delta)


def conditional_moments(dense):
    """Mean and covariance of ``x | y, theta``."""
    A, Sigma, Q, mu, y = dense.A, dense.Sigma, dense.Q, dense.mu, dense.y
    cS = scipy.linalg.cho_factor(Sigma, lower=True)
    M = Q + A.T @ scipy.linalg.cho_solve(cS, A)
    try:
        cM = scipy.linalg.cho_factor(M, lower=True)
    except np.linalg.LinAlgError as exc:
        raise SingularSystemError("posterior precision is singular") from exc
    mean = mu + scipy.linalg.cho_solve(cM, A.T @ scipy.linalg.cho_solve(cS, y - A @ mu))
    cov = scipy.linalg.cho_solve(cM, np.eye(M.shape[0]))
    return mean, 0.5 * (cov + cov.T)


def dense_f(A, L, y, lam):
    """``y^T y - q^T (A^T A + lam L)^{-1} q`` with ``q = A^T y``."""
    q = A.T @ y
    B = A.T @ A + lam * L
    return float(y @ y - q @ np.linalg.solve(B, q))


def dense_g(A, L, lam):
    """``log det(A^T A + lam L)`` by Cholesky."""
    return float(_logdet_spd(A.T @ A + lam * L)[0])


def dense_traces(A, L, lam, order):
    """Exact ``tr((B^{-1} L)^r)``, ``r = 1..order``, ``B = A^T A + lam L``."""
    F = np.linalg.solve(A.T @ A + lam * L, L)
    out = np.empty(order)
    P = np.eye(F.shape[0])
    for r in range(order):
        P = P @ F
        out[r] = np.trace(P)
    return out


def dense_gendeconv(A, L, y, lam):
    return np.linalg.solve(A.T @ A + lam * L, A.T @ y)


@dataclass(frozen=True)
class QuadratureTable:
    """Normalized posterior mass on a ``(gamma, delta)`` tensor grid."""

    gammas: np.ndarray
    deltas: np.ndarray
    mass: np.ndarray

    def _moment(self, values, power=1):
        return float(np.sum(self.mass * values ** power))

    def mean(self, which):
        return self._moment(self._values(which))

    def var(self, which):
        v = self._values(which)
        return self._moment(v, 2) - self._moment(v) ** 2

    def _values(self, which):
        G, D = np.meshgrid(self.gammas, self.deltas, indexing="ij")
        return {"gamma": G, "delta": D, "lambda": D / G}[which]


def _trapezoid_weights(x):
    x = np.asarray(x, dtype=float)
    if x.size == 1:
        return np.ones(1)
    w = np.zeros_like(x)
    d = np.diff(x)
    w[:-1] += 0.5 * d
    w[1:] += 0.5 * d
    return w


def quadrature_marginal(log_density, gammas, deltas, boundary_tol=1e-6):
    """Tabulate ``exp(log_density(gamma, delta))`` on a grid and normalize.

    ``log_density`` is called once per grid node.  Raises
    :class:`GridTooSmallError` when the outermost ring holds more than
    ``boundary_tol`` of the mass.
    """
    gammas = np.asarray(gammas, dtype=float)
    deltas = np.asarray(deltas, dtype=float)
    logp = np.array([[log_density(g, d) for d in deltas] for g in gammas])
    logp -= logp.max()
    mass = np.exp(logp) * np.outer(_trapezoid_weights(gammas), _trapezoid_weights(deltas))
    mass /= mass.sum()
    ring = mass[0].sum() + mass[-1].sum() + mass[1:-1, 0].sum() + mass[1:-1, -1].sum()
    if ring > boundary_tol:
        raise GridTooSmallError(f"boundary mass {ring:.3g} exceeds {boundary_tol:g}")
    return QuadratureTable(gammas, deltas, mass)
