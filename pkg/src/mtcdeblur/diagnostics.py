"""Autocorrelation, integrated autocorrelation time and cost per effective sample."""

import csv
import json
import math
import warnings
from dataclasses import asdict, dataclass
from typing import NamedTuple

import numpy as np

from .exceptions import DegenerateSeriesError, ParameterError

WINDOW_FACTOR = 1.5


def autocorrelation(series, max_lag=None):
    """Biased sample autocorrelation ``rho_0..rho_max_lag`` via zero-padded FFT."""
    x = np.asarray(series, dtype=float).ravel()
    N = x.size
    if max_lag is None:
        max_lag = N // 2
    if N < 2 or N < 2 * max_lag:
        raise ParameterError(f"series of length {N} is too short for max_lag={max_lag}")
    x = x - x.mean()
    size = 1 << (2 * N - 1).bit_length()
    spec = np.fft.rfft(x, size)
    acov = np.fft.irfft(spec * np.conj(spec), size)[: max_lag + 1] / N
    if not acov[0] > 1e-300 * max(1.0, float(np.abs(series).max())):
        raise DegenerateSeriesError("series is constant")
    return acov / acov[0]


class IACTResult(NamedTuple):
    tau: float
    std_error: float
    window: int


def iact(series, window_factor=WINDOW_FACTOR, convention="statistics", return_reliable=False):
    """Integrated autocorrelation time ``tau = 1 + 2 sum_{k=1}^{W} rho_k``.

    ``W`` is the smallest lag with ``W >= window_factor * tau(W)``.  The
    standard error is ``tau * sqrt(2 (2W + 1) / N)``.  With
    ``convention="physics"`` both ``tau`` and its error are halved.
    """
    x = np.asarray(series, dtype=float).ravel()
    N = x.size
    if N < 100:
        raise ParameterError("iact needs at least 100 samples")
    if convention not in ("statistics", "physics"):
        raise ParameterError(f"unknown convention {convention!r}")
    rho = autocorrelation(x, N // 2)
    taus = 1.0 + 2.0 * np.cumsum(rho[1:])
    lags = np.arange(1, rho.size)
    ok = np.nonzero(lags >= window_factor * taus)[0]
    reliable = ok.size > 0
    W = int(lags[ok[0]]) if reliable else int(lags[-1])
    tau = float(taus[W - 1])
    if not reliable:
        warnings.warn("IACT window exceeds N/2; estimate unreliable", RuntimeWarning, stacklevel=2)
    se = tau * math.sqrt(2.0 * (2 * W + 1) / N)
    if convention == "physics":
        tau, se = 0.5 * tau, 0.5 * se
    out = IACTResult(tau, se, W)
    return (out, reliable) if return_reliable else out


def cces(tau, total_time_seconds, chain_length):
    """Computing cost per effective sample, ``tau * T / N``."""
    if not (tau > 0 and total_time_seconds > 0 and chain_length > 0):
        raise ParameterError("tau, time and length must be positive")
    return tau * total_time_seconds / chain_length


def histogram(series, bins=50):
    """Equal-width bins over ``[min, max]`` with weights summing to one.

    A constant series gives a single bin of unit width centred on the value.
    """
    x = np.asarray(series, dtype=float).ravel()
    if x.size == 0:
        raise ParameterError("empty series")
    if int(bins) < 1:
        raise ParameterError("bins must be >= 1")
    lo, hi = float(x.min()), float(x.max())
    if lo == hi:
        return np.array([lo - 0.5, lo + 0.5]), np.array([1.0])
    counts, edges = np.histogram(x, bins=int(bins), range=(lo, hi))
    return edges, counts / counts.sum()


def bin_centers(edges):
    edges = np.asarray(edges, dtype=float)
    return 0.5 * (edges[:-1] + edges[1:])


def burn_in_heuristic(series, factor=5):
    """``factor`` times a pilot IACT (reported, never applied automatically)."""
    return int(math.ceil(factor * iact(series).tau))


@dataclass
class DiagnosticsReport:
    statistic: str
    tau: float
    tau_std_error: float
    window: int
    reliable: bool
    acf: np.ndarray
    cces: float
    acceptance_rate: float
    histogram: tuple
    samples: int
    burn_in: int
    wall_time: float
    mean: float
    std: float
    suggested_burn_in: int

    def to_dict(self, max_acf=50):
        d = asdict(self)
        d["acf"] = [float(v) for v in self.acf[: max_acf + 1]]
        edges, weights = self.histogram
        d["histogram"] = {"edges": [float(e) for e in edges], "weights": [float(w) for w in weights]}
        return d

    def to_text(self):
        return json.dumps(self.to_dict(), indent=2)

    def write_histogram_csv(self, path):
        edges, weights = self.histogram
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["left", "right", "center", "weight"])
            for a, b, wt in zip(edges[:-1], edges[1:], weights):
                w.writerow([repr(float(a)), repr(float(b)), repr(float(0.5 * (a + b))), repr(float(wt))])


def diagnose_chain(chain, statistic="lambda", burn_in=None, bins=50, wall_time=None):
    """IACT, CCES, acceptance and histogram for one statistic of a chain.

    ``burn_in`` counts transitions and defaults to the per-sampler value in
    :data:`mtcdeblur.samplers.BURN_IN` when the chain kind is known, else 0.
    CCES uses the chain's wall time scaled to the retained samples.
    """
    from .samplers import BURN_IN

    if burn_in is None:
        burn_in = BURN_IN.get(chain.kind, 0)
    x = chain.statistic(statistic)[1 + burn_in // max(chain.thinning, 1):]
    res, reliable = iact(x, return_reliable=True)
    T = chain.wall_time if wall_time is None else wall_time
    steps = max(chain.steps, 1)
    # time per transition times transitions per retained sample
    t_kept = T * (x.size * chain.thinning) / steps
    c = cces(res.tau, t_kept, x.size) if T > 0 else float("nan")
    return DiagnosticsReport(
        statistic=statistic,
        tau=res.tau,
        tau_std_error=res.std_error,
        window=res.window,
        reliable=bool(reliable),
        acf=autocorrelation(x, min(x.size // 2, max(res.window, 50))),
        cces=c,
        acceptance_rate=float(chain.acceptance_rate),
        histogram=histogram(x, bins),
        samples=int(x.size),
        burn_in=int(burn_in),
        wall_time=float(T),
        mean=float(np.mean(x)),
        std=float(np.std(x)),
        suggested_burn_in=burn_in_heuristic(x),
    )
