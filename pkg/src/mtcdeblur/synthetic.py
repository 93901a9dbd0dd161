"""Synthetic truth images, PSF specs and simulated data."""

import numpy as np

from .exceptions import ParameterError
from .model import PeriodicModel, Psf, ZeroPaddedModel

TRUTHS = ("planet", "bars", "smooth")


def make_truth(shape, kind="planet"):
    """Deterministic test image on a 0-255 intensity scale."""
    p, q = shape
    r, c = np.mgrid[0:p, 0:q]
    u = (r + 0.5) / p - 0.5
    v = (c + 0.5) / q - 0.5
    if kind == "planet":
        disk = (u / 0.34) ** 2 + (v / 0.38) ** 2 <= 1.0
        bands = 150 + 60 * np.cos(2 * np.pi * 4.5 * u) + 25 * np.cos(2 * np.pi * 9.0 * u + 1.0)
        limb = np.sqrt(np.clip(1.0 - (u / 0.34) ** 2 - (v / 0.38) ** 2, 0.0, 1.0))
        img = np.where(disk, bands * (0.55 + 0.45 * limb), 0.0)
        moon = (u + 0.36) ** 2 + (v - 0.36) ** 2 <= 0.06 ** 2
        img = np.where(moon, 220.0, img)
        spot = ((u - 0.1) / 0.07) ** 2 + ((v + 0.12) / 0.1) ** 2 <= 1.0
        return np.where(spot & disk, 240.0, img)
    if kind == "bars":
        return np.where((np.floor(8 * (v + 0.5)) % 2 == 0) & (np.abs(u) < 0.3), 200.0, 40.0)
    if kind == "smooth":
        return 128 + 80 * np.sin(2 * np.pi * u) * np.cos(2 * np.pi * v)
    raise ParameterError(f"unknown truth {kind!r}; choose from {TRUTHS}")


def parse_psf_spec(spec):
    """``"gaussian:SIGMA[:RADIUS]"``, ``"box:SIZE"`` or ``"delta"``."""
    parts = str(spec).split(":")
    name = parts[0].lower()
    try:
        if name == "gaussian":
            sigma = float(parts[1])
            radius = int(parts[2]) if len(parts) > 2 else None
            return Psf.gaussian(sigma, radius)
        if name == "box":
            return Psf.box(int(parts[1]))
        if name == "delta":
            return Psf.delta()
    except (IndexError, ValueError) as exc:
        raise ParameterError(f"bad PSF spec {spec!r}: {exc}") from exc
    raise ParameterError(f"unknown PSF spec {spec!r}")


def simulate(truth, psf, gamma, rng, boundary="periodic", border=0):
    """Blur ``truth`` and add ``N(0, 1/gamma)`` noise (``gamma=inf`` for none).

    For ``boundary="dirichlet"`` the truth is the bordered latent image and
    the data is its central window.
    """
    truth = np.asarray(truth, dtype=float)
    if boundary == "periodic":
        model = PeriodicModel(psf, truth.shape)
    else:
        obs = (truth.shape[0] - 2 * border, truth.shape[1] - 2 * border)
        model = ZeroPaddedModel(psf, obs, border)
    clean = model.forward(truth)
    if np.isinf(gamma):
        return clean
    if not gamma > 0:
        raise ParameterError("gamma must be positive")
    return clean + rng.standard_normal(clean.shape) / np.sqrt(gamma)


def standard_problem(size=64, sigma=None, gamma=0.25, seed=0, truth="planet", boundary="periodic",
                     border=0):
    """``(x_true, psf, y)`` for the desk-scale test problems."""
    if sigma is None:
        sigma = 2.0 if size >= 32 else 1.0
    radius = min(int(np.ceil(3 * sigma)), max((size - 1) // 2, 1))
    psf = Psf.gaussian(sigma, radius)
    shape = (size + 2 * border, size + 2 * border)
    x = make_truth(shape, truth)
    y = simulate(x, psf, gamma, np.random.default_rng(seed), boundary, border)
    return x, psf, y
