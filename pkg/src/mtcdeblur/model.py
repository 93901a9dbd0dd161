"""Point-spread functions, forward convolution operators and the lattice
Laplacian used as prior precision.

Images are plain 2-D float arrays in row-major order.  Two forward maps are
provided: :class:`PeriodicModel` (circular convolution, diagonalized by the
2-D DFT) and :class:`ZeroPaddedModel` (direct convolution of a latent image
that carries a border of nuisance pixels, with zeros beyond it, restricted to
the observed window).

DFT convention throughout: unnormalized forward transform, ``1/n`` on the
inverse (numpy's default), so ``sum(|fft2(x)|**2) / n == sum(x**2)``.
"""

from dataclasses import dataclass

import numpy as np

from .exceptions import DegeneratePsfError, DimensionError, DomainError

PERIODIC = "periodic"
DIRICHLET = "dirichlet"
GRAPH = "graph"


@dataclass(frozen=True)
class Psf:
    """Normalized, nonnegative blur kernel with the pixel that maps onto itself.

    Parameters
    ----------
    kernel : array_like, shape (h, w)
        Kernel values; must be nonnegative and sum to one within 1e-12.
    anchor : tuple of int
        ``(row, col)`` of the kernel origin inside ``kernel``.
    """

    kernel: np.ndarray
    anchor: tuple

    def __post_init__(self):
        k = np.array(self.kernel, dtype=float)
        if k.ndim != 2 or k.size == 0:
            raise DimensionError(f"PSF kernel must be a non-empty 2-D array, got shape {k.shape}")
        if not np.all(np.isfinite(k)):
            raise ValueError("PSF kernel has non-finite entries")
        if np.any(k < 0):
            raise ValueError("PSF kernel has negative entries")
        if abs(k.sum() - 1.0) > 1e-12:
            raise ValueError(f"PSF kernel sums to {k.sum()!r}, expected 1")
        r, c = (int(v) for v in self.anchor)
        if not (0 <= r < k.shape[0] and 0 <= c < k.shape[1]):
            raise DimensionError(f"anchor {(r, c)} outside kernel of shape {k.shape}")
        k.setflags(write=False)
        object.__setattr__(self, "kernel", k)
        object.__setattr__(self, "anchor", (r, c))

    @classmethod
    def from_array(cls, kernel, anchor=None):
        """Normalize ``kernel`` to unit sum; anchor defaults to the brightest pixel."""
        k = np.asarray(kernel, dtype=float)
        total = k.sum()
        if not total > 0:
            raise DegeneratePsfError("kernel has no positive mass")
        k = k / total
        if anchor is None:
            anchor = np.unravel_index(int(np.argmax(k)), k.shape)
        return cls(k, tuple(anchor))

    @classmethod
    def delta(cls):
        return cls(np.ones((1, 1)), (0, 0))

    @classmethod
    def gaussian(cls, sigma, radius=None):
        """Isotropic Gaussian blur sampled on a ``(2*radius+1)``-square grid."""
        if sigma <= 0:
            raise DomainError("sigma must be positive")
        if radius is None:
            radius = int(np.ceil(3 * sigma))
        t = np.arange(-radius, radius + 1, dtype=float)
        g = np.exp(-0.5 * (t / sigma) ** 2)
        return cls.from_array(np.outer(g, g), (radius, radius))

    @classmethod
    def box(cls, size):
        """Uniform ``size x size`` kernel anchored at its (upper-left) center."""
        return cls.from_array(np.ones((size, size)), ((size - 1) // 2, (size - 1) // 2))

    @property
    def shape(self):
        return self.kernel.shape

    def is_point_symmetric(self, atol=0.0):
        """True when k(anchor + d) == k(anchor - d) for every offset d."""
        kh, kw = self.kernel.shape
        ar, ac = self.anchor
        rows = 2 * ar - np.arange(kh)
        cols = 2 * ac - np.arange(kw)
        inside = (rows[:, None] >= 0) & (rows[:, None] < kh) & (cols[None, :] >= 0) & (cols[None, :] < kw)
        mirrored = np.zeros_like(self.kernel)
        rr, cc = np.nonzero(inside)
        mirrored[rr, cc] = self.kernel[rows[rr], cols[cc]]
        # mass that would mirror outside the kernel breaks symmetry
        return bool(np.allclose(mirrored, self.kernel, rtol=0, atol=atol)) and bool(
            np.all(self.kernel[~inside] <= atol)
        )


def embed_kernel(psf, shape):
    """Place ``psf`` on a periodic grid of ``shape`` with its anchor at (0, 0).

    Kernels larger than the grid wrap around and accumulate.
    """
    kh, kw = psf.kernel.shape
    ar, ac = psf.anchor
    out = np.zeros(shape)
    rows = (np.arange(kh) - ar) % shape[0]
    cols = (np.arange(kw) - ac) % shape[1]
    np.add.at(out, (rows[:, None], cols[None, :]), psf.kernel)
    return out


def _check_shape(arr, shape, what):
    arr = np.asarray(arr, dtype=float)
    if arr.shape != tuple(shape):
        raise DimensionError(f"{what} has shape {arr.shape}, expected {tuple(shape)}")
    return arr


class PeriodicModel:
    """Circular convolution on a ``shape`` torus; m = n = number of pixels."""

    variant = PERIODIC

    def __init__(self, psf, shape):
        self.psf = psf
        self.shape = tuple(int(s) for s in shape)
        if len(self.shape) != 2 or min(self.shape) < 1:
            raise DimensionError(f"bad image shape {shape}")
        self.latent_shape = self.shape
        self.observed_shape = self.shape
        self.Ahat = np.fft.fft2(embed_kernel(psf, self.shape))
        self.Ahat.setflags(write=False)

    @property
    def n(self):
        return self.shape[0] * self.shape[1]

    @property
    def m(self):
        return self.n

    def forward(self, x):
        x = _check_shape(x, self.shape, "latent image")
        return np.fft.ifft2(self.Ahat * np.fft.fft2(x)).real

    def adjoint(self, y):
        y = _check_shape(y, self.shape, "data image")
        return np.fft.ifft2(np.conj(self.Ahat) * np.fft.fft2(y)).real

    def normal(self, x):
        """Apply ``A^T A``."""
        x = _check_shape(x, self.shape, "latent image")
        return np.fft.ifft2(np.abs(self.Ahat) ** 2 * np.fft.fft2(x)).real

    def laplacian(self):
        return LaplacianOp(self.shape, PERIODIC)

    def __repr__(self):
        return f"PeriodicModel(shape={self.shape}, psf={self.psf.shape})"


class ZeroPaddedModel:
    """Direct convolution of a bordered latent image, observed on the interior.

    The latent image has shape ``(p + 2*border, q + 2*border)``; pixels beyond
    it are zero.  The data window is the central ``(p, q)`` block.
    """

    variant = DIRICHLET

    def __init__(self, psf, observed_shape, border):
        if border < 0:
            raise DomainError("border must be nonnegative")
        self.psf = psf
        self.border = int(border)
        self.observed_shape = tuple(int(s) for s in observed_shape)
        b = self.border
        self.latent_shape = (self.observed_shape[0] + 2 * b, self.observed_shape[1] + 2 * b)
        ar, ac = psf.anchor
        p, q = self.observed_shape
        self._window = (slice(b + ar, b + ar + p), slice(b + ac, b + ac + q))
        kh, kw = psf.kernel.shape
        self._full_shape = (self.latent_shape[0] + kh - 1, self.latent_shape[1] + kw - 1)
        # the full linear convolution fits the FFT grid, so nothing wraps
        self._khat = np.fft.rfft2(psf.kernel, self._full_shape)

    @property
    def n(self):
        return self.latent_shape[0] * self.latent_shape[1]

    @property
    def m(self):
        return self.observed_shape[0] * self.observed_shape[1]

    def forward(self, x):
        x = _check_shape(x, self.latent_shape, "latent image")
        full = np.fft.irfft2(self._khat * np.fft.rfft2(x, self._full_shape), self._full_shape)
        return full[self._window].copy()

    def adjoint(self, y):
        y = _check_shape(y, self.observed_shape, "data image")
        ext = np.zeros(self._full_shape)
        ext[self._window] = y
        corr = np.fft.irfft2(np.conj(self._khat) * np.fft.rfft2(ext), self._full_shape)
        return corr[: self.latent_shape[0], : self.latent_shape[1]].copy()

    def normal(self, x):
        return self.adjoint(self.forward(x))

    def laplacian(self):
        return LaplacianOp(self.latent_shape, DIRICHLET)

    def __repr__(self):
        return (
            f"ZeroPaddedModel(observed={self.observed_shape}, border={self.border}, "
            f"psf={self.psf.shape})"
        )


def apply_forward(model, x):
    """Blur ``x`` with ``model``: returns ``A x``."""
    return model.forward(x)


def apply_adjoint(model, y):
    """Exact adjoint of :func:`apply_forward`: returns ``A^T y``."""
    return model.adjoint(y)


class LaplacianOp:
    """Graph Laplacian of the 4-neighbour lattice, or of an explicit graph.

    ``(Lx)_i = |N(i)| x_i - sum_{j in N(i)} x_j``.  With ``DIRICHLET`` boundary
    the missing neighbours of border pixels are fixed zeros, so the diagonal
    stays 4 and ``L`` is positive definite.  Each missing neighbour is kept as
    an *anchored* half-edge (a clique of one pixel) so that
    ``L = D^T D`` with one row of ``D`` per edge or half-edge.
    """

    def __init__(self, shape, boundary=PERIODIC):
        if boundary not in (PERIODIC, DIRICHLET):
            raise ValueError(f"unknown boundary {boundary!r}")
        self.shape = tuple(int(s) for s in shape)
        self.boundary = boundary
        self._edges = None
        self._anchored = None

    @classmethod
    def from_edges(cls, n, edges, anchored=()):
        """Laplacian of an arbitrary graph on ``n`` nodes."""
        op = cls.__new__(cls)
        op.shape = (int(n),)
        op.boundary = GRAPH
        edges = np.asarray(edges, dtype=np.intp).reshape(-1, 2)
        anchored = np.asarray(anchored, dtype=np.intp).ravel()
        if edges.size and (edges.min() < 0 or edges.max() >= n):
            raise DimensionError("edge index out of range")
        op._edges = edges
        op._anchored = anchored
        return op

    @property
    def n(self):
        return int(np.prod(self.shape))

    def _build_lattice(self):
        idx = np.arange(self.n).reshape(self.shape)
        if self.boundary == PERIODIC:
            right = np.stack([idx.ravel(), np.roll(idx, -1, axis=1).ravel()], axis=1)
            down = np.stack([idx.ravel(), np.roll(idx, -1, axis=0).ravel()], axis=1)
            self._edges = np.concatenate([right, down])
            self._anchored = np.zeros(0, dtype=np.intp)
        else:
            right = np.stack([idx[:, :-1].ravel(), idx[:, 1:].ravel()], axis=1)
            down = np.stack([idx[:-1, :].ravel(), idx[1:, :].ravel()], axis=1)
            self._edges = np.concatenate([right, down])
            self._anchored = np.concatenate([idx[:, 0], idx[:, -1], idx[0, :], idx[-1, :]])

    @property
    def edges(self):
        """``(E, 2)`` array of neighbouring index pairs (flat, row-major)."""
        if self._edges is None:
            self._build_lattice()
        return self._edges

    @property
    def anchored(self):
        """Flat indices of half-edges to fixed zeros (one entry per missing neighbour)."""
        if self._anchored is None:
            self._build_lattice()
        return self._anchored

    def apply(self, x):
        x = _check_shape(x, self.shape, "image")
        if self.boundary == PERIODIC:
            return (
                4 * x
                - np.roll(x, 1, axis=0)
                - np.roll(x, -1, axis=0)
                - np.roll(x, 1, axis=1)
                - np.roll(x, -1, axis=1)
            )
        if self.boundary == DIRICHLET:
            xp = np.pad(x, 1)
            return 4 * x - xp[:-2, 1:-1] - xp[2:, 1:-1] - xp[1:-1, :-2] - xp[1:-1, 2:]
        i, j = self.edges[:, 0], self.edges[:, 1]
        d = x[i] - x[j]
        out = np.bincount(i, d, self.n) - np.bincount(j, d, self.n)
        a = self.anchored
        return out + np.bincount(a, x[a], self.n)

    def quadratic(self, x):
        """``x^T L x`` as a sum of squared clique differences."""
        x = _check_shape(x, self.shape, "image")
        if self.boundary == PERIODIC:
            return float(
                np.sum((x - np.roll(x, -1, axis=0)) ** 2) + np.sum((x - np.roll(x, -1, axis=1)) ** 2)
            )
        return float(np.vdot(x, self.apply(x)))

    def diagonal(self):
        deg = np.bincount(self.edges.ravel(), minlength=self.n).astype(float)
        # a self-loop (1-pixel periodic axis) contributes no coupling
        loops = self.edges[:, 0] == self.edges[:, 1]
        deg -= 2 * np.bincount(self.edges[loops, 0], minlength=self.n)
        deg += np.bincount(self.anchored, minlength=self.n)
        return deg.reshape(self.shape)

    def spectrum(self):
        """Eigenvalues of the periodic Laplacian in DFT order (periodic only)."""
        if self.boundary != PERIODIC:
            raise ValueError("only the periodic Laplacian is diagonalized by the DFT")
        p, q = self.shape
        cr = 2 - 2 * np.cos(2 * np.pi * np.arange(p) / p)
        cc = 2 - 2 * np.cos(2 * np.pi * np.arange(q) / q)
        return cr[:, None] + cc[None, :]

    def __repr__(self):
        return f"LaplacianOp(shape={self.shape}, boundary={self.boundary!r})"


def apply_laplacian(op, x):
    return op.apply(x)


def sample_prior_noise(op, delta, rng):
    """Draw ``v ~ N(0, delta L)`` by assembly over cliques.

    ``v = sqrt(delta) * D^T eta`` with one standard normal per edge (and per
    anchored half-edge); cost is O(n).
    """
    if not delta > 0:
        raise DomainError(f"delta must be positive, got {delta!r}")
    edges, anchored = op.edges, op.anchored
    n = op.n
    eta = rng.standard_normal(len(edges) + len(anchored))
    ee = eta[: len(edges)]
    v = np.bincount(edges[:, 0], ee, n) - np.bincount(edges[:, 1], ee, n)
    if len(anchored):
        v += np.bincount(anchored, eta[len(edges):], n)
    return np.sqrt(delta) * v.reshape(op.shape)


def extract_psf(data, region, anchor=None):
    """Crop ``region = (row, col, h, w)`` from ``data`` and normalize it to a PSF.

    Negative pixels are clamped to zero.  The anchor defaults to the brightest
    pixel of the region (first in row-major order on ties).
    """
    data = np.asarray(data, dtype=float)
    r, c, h, w = (int(v) for v in region)
    if h < 1 or w < 1 or r < 0 or c < 0 or r + h > data.shape[0] or c + w > data.shape[1]:
        raise DimensionError(f"region {region} outside data of shape {data.shape}")
    patch = np.clip(data[r : r + h, c : c + w], 0.0, None)
    if not patch.sum() > 0:
        raise DegeneratePsfError(f"region {region} has no positive mass")
    return Psf.from_array(patch, anchor)
