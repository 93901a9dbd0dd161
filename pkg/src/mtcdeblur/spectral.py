"""Transform-domain precomputation for the periodic model and fast evaluation
of the two scalar functions that carry all hyperparameter dependence:

    f(lam) = y^T y - (A^T y)^T (A^T A + lam L)^{-1} A^T y
           = sum_i w_i * lam Z_i / (1 + lam Z_i)
    g(lam) = log det(A^T A + lam L)
           = a + sum_i log(1 + lam Z_i)

with ``Z_i = Lhat_i / |Ahat_i|^2`` and ``w_i = |yhat_i|^2 / n``.

:func:`f_fast` and :func:`g_fast` split the sorted ``lam Z_i`` into a head
(``< c``), an exact middle band, and a tail (``> 1/c``); head and tail are
summed by truncated geometric/log series from cumulative tables, so the
per-call work is the middle band plus ``O(s + log n)``.  The truncation error
is certified: at most ``eps``.

Modes where ``|Ahat_i| <= zero_tol * max|Ahat|`` are flagged and get
``Z_i = inf``.  They contribute ``w_i`` to ``f`` (the ``lam Z -> inf`` limit)
and ``log(lam * Lhat_i)`` to ``g``; ``g`` is refused only when a flagged
mode also lies in the null space of ``L``.
"""

import struct
import warnings
from dataclasses import dataclass

import numpy as np

from . import kernels
from .exceptions import DomainError, FlaggedModeError, ParameterError
from .model import LaplacianOp, PeriodicModel, Psf

DEFAULT_ORDER = 8
ZERO_TOL = 1e-12


@dataclass(frozen=True)
class SpectralCache:
    """DFT diagonalization of the periodic problem plus the sorted ``Z`` spectrum.

    ``Ahat``, ``Lhat``, ``yhat`` are in DFT order with the image shape.
    ``Z``, ``w`` are flat and sorted ascending (``inf`` last); ``perm[k]`` is
    the flat DFT index of sorted entry ``k``.
    """

    shape: tuple
    Ahat: np.ndarray
    Lhat: np.ndarray
    yhat: np.ndarray
    Z: np.ndarray
    w: np.ndarray
    perm: np.ndarray
    ydoty: float
    a: float
    n_fin: int
    w_flag: float
    flagged: np.ndarray
    singular: np.ndarray

    @property
    def n(self):
        return int(self.Z.shape[0])


@dataclass(frozen=True)
class CumulantTables:
    """Prefix/suffix power sums over the sorted spectrum.

    Row ``q`` of every table covers sorted entries ``[0, q)`` (prefix tables
    ``S``, ``U``) or ``[q, n)`` (suffix tables ``T``, ``V``, ``b``); column
    ``r - 1`` (``r`` for ``T``) holds the power ``r``:

    ``S[q, r-1] = sum_{j<q} w_j Z_j^r``, ``T[q, r] = sum_{j>=q} w_j Z_j^-r``,
    ``U[q, r-1] = sum_{j<q} Z_j^r``, ``V[q, r-1] = sum_{j>=q} Z_j^-r``,
    ``b[q] = sum_{j>=q} log Z_j`` (flagged modes contribute 0 here, their
    ``log Lhat`` lives in ``a``).
    """

    order: int
    S: np.ndarray
    T: np.ndarray
    U: np.ndarray
    V: np.ndarray
    b: np.ndarray


def build_spectral_cache(psf, y, zero_tol=ZERO_TOL):
    """Diagonalize the periodic problem for data ``y``.

    ``psf`` may be a :class:`Psf` or a :class:`PeriodicModel`.
    """
    y = np.asarray(y, dtype=float)
    model = psf if isinstance(psf, PeriodicModel) else PeriodicModel(psf, y.shape)
    if model.shape != y.shape:
        raise ValueError(f"model shape {model.shape} does not match data {y.shape}")
    Ahat = np.array(model.Ahat)
    Lhat = LaplacianOp(y.shape).spectrum()
    yhat = np.fft.fft2(y)
    return cache_from_spectra(Ahat, Lhat, yhat, ydoty=float(np.sum(y * y)), zero_tol=zero_tol)


def cache_from_spectra(Ahat, Lhat, yhat, ydoty=None, zero_tol=ZERO_TOL):
    """Build a cache from transform-domain arrays (any common shape)."""
    Ahat = np.asarray(Ahat, dtype=complex)
    Lhat = np.asarray(Lhat, dtype=float)
    yhat = np.asarray(yhat, dtype=complex)
    n = Ahat.size
    A2 = (Ahat.real ** 2 + Ahat.imag ** 2).ravel()
    absA = np.sqrt(A2)
    flagged_mask = absA <= zero_tol * absA.max()
    Lflat = Lhat.ravel()
    with np.errstate(divide="ignore", invalid="ignore"):
        Z = np.where(flagged_mask, np.inf, Lflat / np.where(flagged_mask, 1.0, A2))
    perm = np.argsort(Z, kind="stable")
    Zs = Z[perm]
    ws = (np.abs(yhat.ravel()) ** 2 / n)[perm]
    n_fin = int(np.count_nonzero(np.isfinite(Zs)))
    flagged = np.flatnonzero(flagged_mask)
    singular = flagged[Lflat[flagged] <= 0]
    with np.errstate(divide="ignore"):
        a = float(np.sum(np.log(A2[~flagged_mask])) + np.sum(np.log(Lflat[flagged])))
    if flagged.size:
        warnings.warn(
            f"{flagged.size} spectral zero(s) of the PSF flagged; treated by their lam*Z -> inf limit",
            RuntimeWarning,
            stacklevel=3,
        )
    if ydoty is None:
        ydoty = float(ws.sum())
    for arr in (Ahat, Lhat, yhat, Zs, ws, perm):
        arr.setflags(write=False)
    return SpectralCache(
        shape=Ahat.shape,
        Ahat=Ahat,
        Lhat=Lhat,
        yhat=yhat,
        Z=np.ascontiguousarray(Zs),
        w=np.ascontiguousarray(ws),
        perm=perm,
        ydoty=float(ydoty),
        a=a,
        n_fin=n_fin,
        w_flag=float(ws[n_fin:].sum()),
        flagged=flagged,
        singular=singular,
    )


def build_tables(cache, order=DEFAULT_ORDER):
    """Cumulative power-sum tables for expansion order ``order`` (O(order * n))."""
    if order < 1:
        raise ParameterError("expansion order must be >= 1")
    Z, w, n = cache.Z, cache.w, cache.n
    r = np.arange(1, order + 1, dtype=float)
    r0 = np.arange(0, order + 1, dtype=float)
    with np.errstate(all="ignore"):
        Zp = Z[:, None] ** r
        Zm = Z[:, None] ** (-r0)
        Zm[~np.isfinite(Z), 1:] = 0.0
        Zm[~np.isfinite(Z), 0] = 1.0
        S = np.zeros((n + 1, order))
        np.cumsum(w[:, None] * Zp, axis=0, out=S[1:])
        U = np.zeros((n + 1, order))
        np.cumsum(Zp, axis=0, out=U[1:])
        T = np.zeros((n + 1, order + 1))
        T[:n] = np.cumsum((w[:, None] * Zm)[::-1], axis=0)[::-1]
        V = np.zeros((n + 1, order))
        V[:n] = np.cumsum(Zm[::-1, 1:], axis=0)[::-1]
        logZ = np.where(np.isfinite(Z), np.log(Z), 0.0)
        b = np.zeros(n + 1)
        b[:n] = np.cumsum(logZ[::-1])[::-1]
    for arr in (S, T, U, V, b):
        arr.setflags(write=False)
    return CumulantTables(order=int(order), S=S, T=T, U=U, V=V, b=b)


def _check_lambda(lam, strict):
    lam = float(lam)
    if not np.isfinite(lam) or lam < 0 or (strict and lam == 0):
        raise DomainError(f"lambda must be {'positive' if strict else 'nonnegative'}, got {lam!r}")
    return lam


def _check_g(cache, strict=False):
    if strict and cache.flagged.size:
        raise FlaggedModeError(
            f"flagged spectral zeros at modes {cache.flagged.tolist()}", cache.flagged
        )
    if cache.singular.size:
        raise FlaggedModeError(
            f"log det(A^T A + lam L) is infinite: modes {cache.singular.tolist()} "
            "are zeros of both the PSF and the Laplacian spectrum",
            cache.singular,
        )


def f_direct(cache, lam):
    """O(n) evaluation of ``f``; ``f(0) = 0`` when the PSF has no spectral zeros."""
    lam = _check_lambda(lam, strict=False)
    if lam == 0.0:
        return cache.w_flag
    return kernels.f_direct(cache.Z, cache.w, cache.n_fin, cache.w_flag, lam)


def g_direct(cache, lam, strict=False):
    """O(n) evaluation of ``g = log det(A^T A + lam L)``.

    Flagged modes enter through their finite limit ``log(lam * Lhat_i)``;
    ``strict=True`` refuses them instead.
    """
    lam = _check_lambda(lam, strict=True)
    _check_g(cache, strict)
    return kernels.g_direct(cache.Z, cache.n_fin, cache.a, lam)


def f_threshold(cache, tables, eps):
    """``c_f`` with ``c_f^(s+1) * ||y||^2 = eps``."""
    if not eps > 0:
        raise ParameterError("eps must be positive")
    c = (eps / cache.ydoty) ** (1.0 / (tables.order + 1)) if cache.ydoty > 0 else 0.0
    if not c < 1.0:
        raise ParameterError(f"eps={eps} too large: c_f={c} >= 1")
    return c


def g_threshold(cache, tables, eps):
    """``c_g`` with ``c_g^(s+1) * n = eps``."""
    if not eps > 0:
        raise ParameterError("eps must be positive")
    c = (eps / cache.n) ** (1.0 / (tables.order + 1))
    if not c < 1.0:
        raise ParameterError(f"eps={eps} too large: c_g={c} >= 1")
    return c


def f_fast(cache, tables, lam, eps):
    """``f(lam)`` within ``eps`` using the truncated head/tail series."""
    lam = _check_lambda(lam, strict=True)
    c = f_threshold(cache, tables, eps)
    if c == 0.0:
        return 0.0
    return kernels.f_fast(cache.Z, cache.w, cache.n_fin, tables.S, tables.T, lam, c, tables.order)


def g_fast(cache, tables, lam, eps, strict=False):
    """``g(lam)`` within ``eps`` using the truncated head/tail series."""
    lam = _check_lambda(lam, strict=True)
    _check_g(cache, strict)
    c = g_threshold(cache, tables, eps)
    return kernels.g_fast(
        cache.Z, cache.n_fin, tables.U, tables.V, tables.b, cache.a, lam, c, tables.order
    )


def band(cache, lam, c):
    """Sorted-index split ``(m1, m2)`` for threshold ``c``; middle is ``[m1, m2)``."""
    lam = _check_lambda(lam, strict=True)
    return kernels.band(cache.Z, cache.n_fin, lam, c)


def middle_band_size(cache, tables, lam, eps, which="f"):
    """Number of exactly-summed terms in one fast evaluation."""
    c = f_threshold(cache, tables, eps) if which == "f" else g_threshold(cache, tables, eps)
    m1, m2 = band(cache, lam, c)
    return m2 - m1


_MAGIC = b"MTCSPEC\x00"
_VERSION = 1


def save_cache(path, cache):
    """Little-endian binary dump with a versioned header."""
    rows, cols = cache.shape
    with open(path, "wb") as fh:
        fh.write(_MAGIC)
        fh.write(struct.pack("<IIIIdd", _VERSION, rows, cols, cache.n_fin, cache.ydoty, cache.a))
        fh.write(struct.pack("<II", cache.flagged.size, cache.singular.size))
        for arr, dt in (
            (cache.Ahat, "<c16"),
            (cache.Lhat, "<f8"),
            (cache.yhat, "<c16"),
            (cache.Z, "<f8"),
            (cache.w, "<f8"),
            (cache.perm, "<i8"),
            (cache.flagged, "<i8"),
            (cache.singular, "<i8"),
        ):
            np.ascontiguousarray(arr, dtype=dt).tofile(fh)


def load_cache(path):
    with open(path, "rb") as fh:
        if fh.read(len(_MAGIC)) != _MAGIC:
            raise ValueError(f"{path}: not a spectral cache file")
        version, rows, cols, n_fin, ydoty, a = struct.unpack("<IIIIdd", fh.read(32))
        if version != _VERSION:
            raise ValueError(f"{path}: unsupported cache version {version}")
        nflag, nsing = struct.unpack("<II", fh.read(8))
        n = rows * cols

        def take(dt, count, shape=None):
            arr = np.fromfile(fh, dtype=dt, count=count)
            if arr.size != count:
                raise ValueError(f"{path}: truncated")
            arr = arr.astype(np.dtype(dt).newbyteorder("="))
            return arr.reshape(shape) if shape else arr

        Ahat = take("<c16", n, (rows, cols))
        Lhat = take("<f8", n, (rows, cols))
        yhat = take("<c16", n, (rows, cols))
        Z = take("<f8", n)
        w = take("<f8", n)
        perm = take("<i8", n).astype(np.intp)
        flagged = take("<i8", nflag).astype(np.intp)
        singular = take("<i8", nsing).astype(np.intp)
    return SpectralCache(
        shape=(rows, cols), Ahat=Ahat, Lhat=Lhat, yhat=yhat, Z=Z, w=w, perm=perm,
        ydoty=ydoty, a=a, n_fin=n_fin, w_flag=float(w[n_fin:].sum()),
        flagged=flagged, singular=singular,
    )


__all__ = [
    "SpectralCache",
    "CumulantTables",
    "build_spectral_cache",
    "cache_from_spectra",
    "build_tables",
    "f_direct",
    "g_direct",
    "f_fast",
    "g_fast",
    "f_threshold",
    "g_threshold",
    "band",
    "middle_band_size",
    "save_cache",
    "load_cache",
    "Psf",
]
