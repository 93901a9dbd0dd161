"""Posterior sampling for the hierarchical deblurring model.

``y | x, gamma ~ N(Ax, I/gamma)``, ``x | delta ~ N(0, (delta L)^-1)`` and
Gamma (or general) hyperpriors on ``(gamma, delta)``.  Four samplers share a
common chain format:

* ``"gibbs"``: block Gibbs over ``x``, ``gamma``, ``delta``.
* ``"oneblock"``: joint Metropolis-Hastings on ``(theta, x)`` with ``x``
  proposed from its full conditional.
* ``"mtc1"``: random-walk Metropolis on the marginal ``pi(gamma, delta | y)``
  with direct O(n) evaluation of ``f`` and ``g``.
* ``"mtc2"``: Metropolis-within-Gibbs in polar coordinates ``(r, phi)`` with
  an exact Gamma draw for ``r`` and fast ``f``, ``g``.

Chains record the log marginal density of each state (up to a constant).
"""

import csv
import math
import time
import warnings
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .exceptions import DomainError, ParameterError, UnsupportedPriorError
from .model import LaplacianOp, PeriodicModel, sample_prior_noise
from .solvers import TIGHT_SOLVER, iterative_solve
from .spectral import (
    build_spectral_cache,
    build_tables,
    f_direct,
    f_fast,
    f_threshold,
    g_direct,
    g_fast,
    g_threshold,
)

DEFAULT_WIDTHS = (2.34e-3, 17.28e-7)
DEFAULT_W2 = 1e-5
BURN_IN = {"gibbs": 60, "oneblock": 20, "mtc1": 20, "mtc2": 20, "mtc-nonperiodic": 20}
KINDS = tuple(BURN_IN)
NUGGET = 1e-10


@dataclass(frozen=True)
class Hyper:
    """Noise precision ``gamma`` and prior scale ``delta``."""

    gamma: float
    delta: float

    def __post_init__(self):
        g, d = float(self.gamma), float(self.delta)
        if not (g > 0 and d > 0 and math.isfinite(g) and math.isfinite(d)):
            raise DomainError(f"hyperparameters must be positive and finite, got ({g}, {d})")
        object.__setattr__(self, "gamma", g)
        object.__setattr__(self, "delta", d)

    @property
    def lam(self):
        return self.delta / self.gamma

    @property
    def r(self):
        return math.hypot(self.gamma, self.delta)

    @property
    def phi(self):
        return math.atan2(self.delta, self.gamma)

    @classmethod
    def from_polar(cls, r, phi):
        return cls(r * math.cos(phi), r * math.sin(phi))

    @classmethod
    def from_lambda(cls, gamma, lam):
        return cls(gamma, gamma * lam)


@dataclass(frozen=True)
class GammaPrior:
    """Independent ``Gamma(alpha, rate=beta)`` priors on ``gamma`` and ``delta``."""

    alpha_gamma: float = 1.0
    beta_gamma: float = 1e-4
    alpha_delta: float = 1.0
    beta_delta: float = 1e-4

    def __post_init__(self):
        if min(self.alpha_gamma, self.beta_gamma, self.alpha_delta, self.beta_delta) <= 0:
            raise ParameterError("Gamma prior constants must be positive")

    def logpdf(self, gamma, delta):
        """Log density up to a constant."""
        return (
            (self.alpha_gamma - 1.0) * math.log(gamma)
            - self.beta_gamma * gamma
            + (self.alpha_delta - 1.0) * math.log(delta)
            - self.beta_delta * delta
        )

    def params(self, half_rank):
        """Packed ``[alpha_g, beta_g, alpha_d, beta_d, half_rank]`` for the chain kernels."""
        return np.array(
            [self.alpha_gamma, self.beta_gamma, self.alpha_delta, self.beta_delta, half_rank]
        )


class LogDensityPrior:
    """A general hyperprior given by a callable ``logpdf(gamma, delta)``."""

    def __init__(self, logpdf):
        self._fn = logpdf

    def logpdf(self, gamma, delta):
        v = float(self._fn(gamma, delta))
        if not math.isfinite(v):
            raise DomainError(f"prior log-density is not finite at ({gamma}, {delta})")
        return v


def _require_conjugate(prior):
    if not isinstance(prior, GammaPrior):
        raise UnsupportedPriorError("this sampler needs a conjugate GammaPrior")
    return prior


def _half_rank(n, prior_rank):
    return 0.5 * (n if prior_rank is None else prior_rank)


# --------------------------------------------------------------------------
# marginal density


def log_marginal(cache, tables, hyper, prior, eps=None, prior_rank=None):
    """``log pi(gamma, delta | y)`` up to a constant fixed per cache.

    ``(k/2) log delta - g(lam)/2 - gamma f(lam)/2 + log prior`` with
    ``k = prior_rank`` (default ``n``).  ``f``, ``g`` are evaluated directly
    unless both ``tables`` and ``eps`` are given.
    """
    lam = hyper.lam
    if tables is None or eps is None:
        f, g = f_direct(cache, lam), g_direct(cache, lam)
    else:
        f, g = f_fast(cache, tables, lam, eps), g_fast(cache, tables, lam, eps)
    h = _half_rank(cache.n, prior_rank)
    return h * math.log(hyper.delta) - 0.5 * g - 0.5 * hyper.gamma * f + prior.logpdf(
        hyper.gamma, hyper.delta
    )


# --------------------------------------------------------------------------
# conditional image draws


def _rto_hat(Ahat, A2, Lhat, yhat, gamma, delta, laplacian, rng):
    """DFT of an exact draw from ``x | y, theta`` on the torus."""
    xi = rng.standard_normal(laplacian.shape)
    v2 = sample_prior_noise(laplacian, delta, rng)
    rhs = np.conj(Ahat) * (gamma * yhat + math.sqrt(gamma) * np.fft.fft2(xi)) + np.fft.fft2(v2)
    d = gamma * A2 + delta * Lhat
    if np.any(d == 0):
        warnings.warn(
            "flagged PSF zero coincides with the Laplacian null space; adding a nugget",
            RuntimeWarning,
            stacklevel=3,
        )
        d = np.where(d == 0, NUGGET * delta, d)
    return rhs / d


def sample_conditional_x(model, laplacian, hyper, y, rng, solver_config=TIGHT_SOLVER):
    """Exact draw from ``N((A^T A + lam L)^-1 A^T y, (gamma A^T A + delta L)^-1)``.

    Randomize-then-optimize: solve ``(gamma A^T A + delta L) x = gamma A^T y + w``
    with ``w = sqrt(gamma) A^T xi + sqrt(delta) D^T eta``.
    """
    y = np.asarray(y, dtype=float)
    if isinstance(model, PeriodicModel):
        xh = _rto_hat(
            model.Ahat, np.abs(model.Ahat) ** 2, laplacian.spectrum(), np.fft.fft2(y),
            hyper.gamma, hyper.delta, laplacian, rng,
        )
        return np.fft.ifft2(xh).real
    g, d = hyper.gamma, hyper.delta
    xi = rng.standard_normal(model.observed_shape)
    v2 = sample_prior_noise(laplacian, d, rng)
    rhs = model.adjoint(g * y + math.sqrt(g) * xi) + v2
    x, _, _ = iterative_solve(lambda v: g * model.normal(v) + d * laplacian.apply(v), rhs, solver_config)
    return x


# --------------------------------------------------------------------------
# problem container


class PeriodicProblem:
    """Everything the periodic samplers need for one data image.

    Parameters
    ----------
    psf : Psf
    y : ndarray
        Observed image.
    prior : GammaPrior or LogDensityPrior, optional
    order, eps : int, float
        Expansion order and certified error of fast ``f``/``g``.
    prior_rank : int, optional
        Exponent ``k`` in ``delta^(k/2)``; defaults to ``n``.  ``n - 1`` gives
        the pseudo-determinant convention for the improper periodic prior.
    """

    def __init__(self, psf, y, prior=None, order=8, eps=1e-6, prior_rank=None):
        self.y = np.asarray(y, dtype=float)
        self.model = PeriodicModel(psf, self.y.shape)
        self.laplacian = LaplacianOp(self.y.shape)
        self.cache = build_spectral_cache(self.model, self.y)
        self.tables = build_tables(self.cache, order)
        self.eps = float(eps)
        self.prior = GammaPrior() if prior is None else prior
        self.prior_rank = prior_rank
        self.A2 = np.abs(self.cache.Ahat) ** 2

    @property
    def n(self):
        return self.cache.n

    @property
    def half_rank(self):
        return _half_rank(self.n, self.prior_rank)

    def log_marginal(self, hyper, fast=False):
        return log_marginal(
            self.cache, self.tables if fast else None, hyper, self.prior,
            self.eps if fast else None, self.prior_rank,
        )

    def draw_x(self, hyper, rng):
        c = self.cache
        return np.fft.ifft2(
            _rto_hat(c.Ahat, self.A2, c.Lhat, c.yhat, hyper.gamma, hyper.delta, self.laplacian, rng)
        ).real

    def mode(self):
        from .nonperiodic import find_mode

        res = find_mode(self.cache, None, None, self.prior, prior_rank=self.prior_rank)
        return Hyper.from_lambda(res.gamma0, res.lambda0)


# --------------------------------------------------------------------------
# single steps


def gibbs_step(state, model, laplacian, y, prior, rng, prior_rank=None):
    """One sweep: ``x | theta``, then ``gamma | x`` and ``delta | x``."""
    prior = _require_conjugate(prior)
    _, hyper = state
    x = sample_conditional_x(model, laplacian, hyper, y, rng)
    res = float(np.sum((model.forward(x) - y) ** 2))
    xlx = laplacian.quadratic(x)
    gamma = rng.gamma(0.5 * model.m + prior.alpha_gamma, 1.0 / (0.5 * res + prior.beta_gamma))
    delta = rng.gamma(
        _half_rank(model.n, prior_rank) + prior.alpha_delta, 1.0 / (0.5 * xlx + prior.beta_delta)
    )
    return x, Hyper(gamma, delta)


class RandomWalkProposal:
    """Symmetric Gaussian random walk on ``(gamma, delta)``."""

    def __init__(self, w_gamma, w_delta):
        if w_gamma < 0 or w_delta < 0:
            raise ParameterError("proposal widths must be nonnegative")
        self.widths = (float(w_gamma), float(w_delta))

    def move(self, hyper, z):
        """Proposal from standard normals ``z``; ``None`` outside the quadrant."""
        g = hyper.gamma + self.widths[0] * z[0]
        d = hyper.delta + self.widths[1] * z[1]
        return Hyper(g, d) if g > 0 and d > 0 else None

    def propose(self, hyper, rng):
        return self.move(hyper, rng.standard_normal(2))

    def log_q_ratio(self, current, proposed):
        return 0.0


def _conditional_terms(xh, yhat, Ahat, A2, Lhat, gamma, delta, n, half_rank, prior):
    """``log joint - log pi(x | y, theta)`` for a state given in the transform domain."""
    res = float(np.sum(np.abs(Ahat * xh - yhat) ** 2)) / n
    xlx = float(np.sum(Lhat * np.abs(xh) ** 2)) / n
    d = gamma * A2 + delta * Lhat
    d = np.where(d == 0, NUGGET * delta, d)
    mu = gamma * np.conj(Ahat) * yhat / d
    joint = (
        0.5 * n * math.log(gamma) - 0.5 * gamma * res + half_rank * math.log(delta)
        - 0.5 * delta * xlx + prior.logpdf(gamma, delta)
    )
    cond = 0.5 * float(np.sum(np.log(d))) - 0.5 * float(np.sum(d * np.abs(xh - mu) ** 2)) / n
    return joint - cond


def oneblock_step(state, model, laplacian, y, prior, proposal, rng, noise_rng=None,
                  prior_rank=None, return_log_ratio=False):
    """Propose ``theta'``, draw ``x' | theta'``, accept jointly (periodic model).

    ``rng`` supplies the proposal normals and the uniform; ``noise_rng``
    (default ``rng``) supplies the conditional draw.
    """
    if not isinstance(model, PeriodicModel):
        raise NotImplementedError("one-block sampling is implemented for the periodic model")
    x, hyper = state
    noise_rng = rng if noise_rng is None else noise_rng
    prop = proposal.propose(hyper, rng)
    logu = math.log(rng.random())
    if prop is None:
        return (x, hyper, False, -math.inf) if return_log_ratio else (x, hyper, False)
    Ahat = model.Ahat
    A2 = np.abs(Ahat) ** 2
    Lhat = laplacian.spectrum()
    yhat = np.fft.fft2(y)
    n = model.n
    h = _half_rank(n, prior_rank)
    xh_new = _rto_hat(Ahat, A2, Lhat, yhat, prop.gamma, prop.delta, laplacian, noise_rng)
    lr = (
        _conditional_terms(xh_new, yhat, Ahat, A2, Lhat, prop.gamma, prop.delta, n, h, prior)
        - _conditional_terms(np.fft.fft2(x), yhat, Ahat, A2, Lhat, hyper.gamma, hyper.delta, n, h, prior)
        + proposal.log_q_ratio(hyper, prop)
    )
    if logu < lr:
        out = (np.fft.ifft2(xh_new).real, prop, True)
    else:
        out = (x, hyper, False)
    return out + (lr,) if return_log_ratio else out


def mtc_option1_step(theta, cache, tables, prior, widths, rng, eps=None, prior_rank=None):
    """Random-walk Metropolis on the marginal; direct ``f``, ``g`` unless ``eps`` is set."""
    prop = RandomWalkProposal(*widths).propose(theta, rng)
    logu = math.log(rng.random())
    if prop is None:
        return theta, False
    diff = log_marginal(cache, tables, prop, prior, eps, prior_rank) - log_marginal(
        cache, tables, theta, prior, eps, prior_rank
    )
    return (prop, True) if logu < diff else (theta, False)


def _r_rate(phi, f, prior):
    c, s = math.cos(phi), math.sin(phi)
    return 0.5 * c * f + prior.beta_gamma * c + prior.beta_delta * s


def _log_phi(phi, r, f, g, prior, half_rank):
    c, s = math.cos(phi), math.sin(phi)
    return (
        (prior.alpha_gamma - 1.0) * math.log(c)
        + (half_rank + prior.alpha_delta - 1.0) * math.log(s)
        - 0.5 * g - 0.5 * r * c * f - prior.beta_gamma * r * c - prior.beta_delta * r * s
    )


def mtc_option2_step(theta, cache, tables, prior, w2, rng, eps=1e-6, prior_rank=None):
    """Exact ``r | phi`` Gamma draw, then one Metropolis step on ``phi | r``."""
    prior = _require_conjugate(prior)
    if not w2 > 0:
        raise ParameterError("w2 must be positive")
    h = _half_rank(cache.n, prior_rank)
    phi = theta.phi
    lam = math.tan(phi)
    f, g = f_fast(cache, tables, lam, eps), g_fast(cache, tables, lam, eps)
    r = rng.standard_gamma(h + prior.alpha_gamma + prior.alpha_delta) / _r_rate(phi, f, prior)
    php = phi + w2 * rng.standard_normal()
    logu = math.log(rng.random())
    if 0.0 < php < 0.5 * math.pi:
        lamp = math.tan(php)
        fp, gp = f_fast(cache, tables, lamp, eps), g_fast(cache, tables, lamp, eps)
        if logu < _log_phi(php, r, fp, gp, prior, h) - _log_phi(phi, r, f, g, prior, h):
            return Hyper.from_polar(r, php), True
    return Hyper.from_polar(r, phi), False


# --------------------------------------------------------------------------
# chains


@dataclass
class Chain:
    """Hyperparameter chain; index 0 is the initial state."""

    kind: str
    gamma: np.ndarray
    delta: np.ndarray
    accepted: np.ndarray
    log_density: np.ndarray
    wall_time: float = 0.0
    thinning: int = 1
    images: list = field(default_factory=list)
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.gamma = np.asarray(self.gamma, dtype=float)
        self.delta = np.asarray(self.delta, dtype=float)
        self.accepted = np.asarray(self.accepted, dtype=bool)
        self.log_density = np.asarray(self.log_density, dtype=float)
        if not (self.gamma.shape == self.delta.shape == self.accepted.shape == self.log_density.shape):
            raise ValueError("chain arrays differ in length")

    def __len__(self):
        return self.gamma.size

    @property
    def lam(self):
        return self.delta / self.gamma

    @property
    def states(self):
        return [Hyper(g, d) for g, d in zip(self.gamma, self.delta)]

    @property
    def steps(self):
        return int(self.meta.get("steps", (len(self) - 1) * self.thinning))

    @property
    def acceptance_rate(self):
        if "n_accepted" in self.meta and self.steps:
            return self.meta["n_accepted"] / self.steps
        return float(np.mean(self.accepted[1:])) if len(self) > 1 else float("nan")

    def statistic(self, name):
        return {"gamma": self.gamma, "delta": self.delta, "lambda": self.lam}[name]

    def write_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["iter", "gamma", "delta", "lambda", "accepted", "logdensity"])
            for i in range(len(self)):
                w.writerow([
                    i * self.thinning, repr(float(self.gamma[i])), repr(float(self.delta[i])),
                    repr(float(self.lam[i])), int(self.accepted[i]), repr(float(self.log_density[i])),
                ])

    @classmethod
    def read_csv(cls, path, kind="unknown"):
        with open(path, newline="") as fh:
            rows = list(csv.DictReader(fh))
        if not rows:
            raise ValueError(f"{path}: empty chain")
        it = [int(r["iter"]) for r in rows]
        thin = it[1] - it[0] if len(it) > 1 else 1
        return cls(
            kind,
            [float(r["gamma"]) for r in rows],
            [float(r["delta"]) for r in rows],
            [int(r["accepted"]) for r in rows],
            [float(r["logdensity"]) for r in rows],
            thinning=thin,
        )


def rng_streams(seed):
    """Independent proposal, uniform, gamma and noise generators from one seed."""
    names = ("proposal", "uniform", "gamma", "noise")
    seqs = np.random.SeedSequence(seed).spawn(len(names))
    return {k: np.random.default_rng(s) for k, s in zip(names, seqs)}


def _finish(kind, gam, dlt, acc, logp, wall, thinning, steps, images=None, **meta):
    keep = slice(None, None, thinning)
    meta.update(steps=int(steps), n_accepted=int(np.sum(acc[1:])))
    return Chain(kind, gam[keep], dlt[keep], acc[keep], logp[keep], wall, thinning,
                 images or [], meta)


def run_chain(kind, problem, steps, seed=0, init=None, thinning=1, prior=None, widths=None,
              w2=None, image_every=0, **options):
    """Run ``steps`` transitions of sampler ``kind`` from ``init``.

    Deterministic given ``seed``: each source of randomness (proposal normals,
    accept uniforms, Gamma variates, image noise) has its own stream spawned
    from ``seed``, so samplers that share a stream see identical variates.

    Parameters
    ----------
    kind : {"gibbs", "oneblock", "mtc1", "mtc2", "mtc-nonperiodic"}
    problem : PeriodicProblem, or NonPeriodicProblem for ``"mtc-nonperiodic"``
    init : Hyper or (x, Hyper), optional
        Defaults to the marginal mode.
    widths : (w_gamma, w_delta)
        Random-walk widths for ``"oneblock"`` and ``"mtc1"``.
    w2 : float
        Angular proposal width for ``"mtc2"``.
    image_every : int
        Retain an image every this many steps (0: none).
    """
    if kind not in KINDS:
        raise ParameterError(f"unknown sampler {kind!r}; choose from {KINDS}")
    if int(steps) < 1:
        raise ParameterError("steps must be >= 1")
    if int(thinning) < 1:
        raise ParameterError("thinning must be >= 1")
    steps, thinning = int(steps), int(thinning)
    if kind == "mtc-nonperiodic":
        from .nonperiodic import run_mwg

        return run_mwg(problem, steps, seed=seed, init=init, thinning=thinning, prior=prior,
                       image_every=image_every, **options)
    if options:
        raise TypeError(f"unexpected options {sorted(options)}")
    prior = problem.prior if prior is None else prior
    x0 = None
    if init is None:
        hyper0 = problem.mode()
    elif isinstance(init, Hyper):
        hyper0 = init
    else:
        x0, hyper0 = init
    streams = rng_streams(seed)
    runner = {"gibbs": _run_gibbs, "oneblock": _run_oneblock, "mtc1": _run_mtc1, "mtc2": _run_mtc2}[kind]
    return runner(problem, prior, hyper0, x0, steps, thinning, streams, widths, w2, image_every)


def _images_for(problem, gam, dlt, image_every, rng):
    if not image_every:
        return []
    return [problem.draw_x(Hyper(gam[i], dlt[i]), rng) for i in range(0, gam.size, image_every)]


def _run_mtc1(problem, prior, hyper0, x0, steps, thinning, streams, widths, w2, image_every):
    wg, wd = DEFAULT_WIDTHS if widths is None else widths
    normals = streams["proposal"].standard_normal((steps, 2))
    logu = np.log(streams["uniform"].random(steps))
    c = problem.cache
    t0 = time.perf_counter()
    if isinstance(prior, GammaPrior):
        g_direct(c, hyper0.lam)  # surfaces flagged-mode errors before the kernel runs
        gam, dlt, acc, logp = kernels.mtc1_chain(
            c.Z, c.w, c.n_fin, c.w_flag, c.a, prior.params(problem.half_rank),
            hyper0.gamma, hyper0.delta, float(wg), float(wd), normals, logu,
        )
    else:
        prop = RandomWalkProposal(wg, wd)
        gam, dlt = np.empty(steps + 1), np.empty(steps + 1)
        acc, logp = np.zeros(steps + 1, dtype=np.uint8), np.empty(steps + 1)
        cur = hyper0
        lp = log_marginal(c, None, cur, prior, None, problem.prior_rank)
        gam[0], dlt[0], logp[0] = cur.gamma, cur.delta, lp
        for k in range(steps):
            new = prop.move(cur, normals[k])
            if new is not None:
                lpn = log_marginal(c, None, new, prior, None, problem.prior_rank)
                if logu[k] < lpn - lp:
                    cur, lp, acc[k + 1] = new, lpn, 1
            gam[k + 1], dlt[k + 1], logp[k + 1] = cur.gamma, cur.delta, lp
    wall = time.perf_counter() - t0
    images = _images_for(problem, gam, dlt, image_every, streams["noise"])
    return _finish("mtc1", gam, dlt, acc, logp, wall, thinning, steps, images,
                   widths=[float(wg), float(wd)], log_density="direct")


def _run_mtc2(problem, prior, hyper0, x0, steps, thinning, streams, widths, w2, image_every):
    prior = _require_conjugate(prior)
    w2 = DEFAULT_W2 if w2 is None else float(w2)
    if not w2 > 0:
        raise ParameterError("w2 must be positive")
    c, t, eps = problem.cache, problem.tables, problem.eps
    h = problem.half_rank
    stdgam = streams["gamma"].standard_gamma(h + prior.alpha_gamma + prior.alpha_delta, steps)
    normals = streams["proposal"].standard_normal(steps)
    logu = np.log(streams["uniform"].random(steps))
    t0 = time.perf_counter()
    g_direct(c, hyper0.lam)
    cf, cg = f_threshold(c, t, eps), g_threshold(c, t, eps)
    gam, dlt, acc, logp = kernels.mtc2_chain(
        c.Z, c.w, c.n_fin, c.a, t.S, t.T, t.U, t.V, t.b, cf, cg, t.order,
        prior.params(h), hyper0.gamma, hyper0.delta, w2, stdgam, normals, logu,
    )
    wall = time.perf_counter() - t0
    images = _images_for(problem, gam, dlt, image_every, streams["noise"])
    return _finish("mtc2", gam, dlt, acc, logp, wall, thinning, steps, images,
                   w2=w2, log_density="fast", eps=eps, order=t.order)


def _run_gibbs(problem, prior, hyper0, x0, steps, thinning, streams, widths, w2, image_every):
    prior = _require_conjugate(prior)
    c = problem.cache
    Ahat, A2, Lhat, yhat, n = c.Ahat, problem.A2, c.Lhat, c.yhat, problem.n
    h = problem.half_rank
    rate_rng, noise = streams["gamma"], streams["noise"]
    shape_g = 0.5 * n + prior.alpha_gamma
    shape_d = h + prior.alpha_delta
    gam, dlt = np.empty(steps + 1), np.empty(steps + 1)
    logp = np.empty(steps + 1)
    acc = np.ones(steps + 1, dtype=np.uint8)
    acc[0] = 0
    images = []
    cur = hyper0
    gam[0], dlt[0] = cur.gamma, cur.delta
    t0 = time.perf_counter()
    for k in range(steps):
        xh = _rto_hat(Ahat, A2, Lhat, yhat, cur.gamma, cur.delta, problem.laplacian, noise)
        if image_every and k % image_every == 0:
            images.append(np.fft.ifft2(xh).real)
        res = float(np.sum(np.abs(Ahat * xh - yhat) ** 2)) / n
        xlx = float(np.sum(Lhat * np.abs(xh) ** 2)) / n
        g = rate_rng.standard_gamma(shape_g) / (0.5 * res + prior.beta_gamma)
        d = rate_rng.standard_gamma(shape_d) / (0.5 * xlx + prior.beta_delta)
        cur = Hyper(g, d)
        gam[k + 1], dlt[k + 1] = g, d
    wall = time.perf_counter() - t0
    for i in range(steps + 1):
        logp[i] = log_marginal(c, None, Hyper(gam[i], dlt[i]), prior, None, problem.prior_rank)
    return _finish("gibbs", gam, dlt, acc, logp, wall, thinning, steps, images, log_density="direct")


def _run_oneblock(problem, prior, hyper0, x0, steps, thinning, streams, widths, w2, image_every):
    wg, wd = DEFAULT_WIDTHS if widths is None else widths
    prop = RandomWalkProposal(wg, wd)
    normals = streams["proposal"].standard_normal((steps, 2))
    logu = np.log(streams["uniform"].random(steps))
    noise = streams["noise"]
    c = problem.cache
    Ahat, A2, Lhat, yhat, n = c.Ahat, problem.A2, c.Lhat, c.yhat, problem.n
    h = problem.half_rank
    gam, dlt = np.empty(steps + 1), np.empty(steps + 1)
    logp = np.empty(steps + 1)
    acc = np.zeros(steps + 1, dtype=np.uint8)
    log_ratios = np.full(steps, -np.inf)
    images = []
    cur = hyper0
    t0 = time.perf_counter()
    if x0 is None:
        xh = _rto_hat(Ahat, A2, Lhat, yhat, cur.gamma, cur.delta, problem.laplacian, noise)
    else:
        xh = np.fft.fft2(np.asarray(x0, dtype=float))
    ell = _conditional_terms(xh, yhat, Ahat, A2, Lhat, cur.gamma, cur.delta, n, h, prior)
    gam[0], dlt[0] = cur.gamma, cur.delta
    for k in range(steps):
        if image_every and k % image_every == 0:
            images.append(np.fft.ifft2(xh).real)
        new = prop.move(cur, normals[k])
        if new is not None:
            xh_new = _rto_hat(Ahat, A2, Lhat, yhat, new.gamma, new.delta, problem.laplacian, noise)
            ell_new = _conditional_terms(xh_new, yhat, Ahat, A2, Lhat, new.gamma, new.delta, n, h, prior)
            log_ratios[k] = ell_new - ell
            if logu[k] < log_ratios[k]:
                cur, xh, ell, acc[k + 1] = new, xh_new, ell_new, 1
        gam[k + 1], dlt[k + 1] = cur.gamma, cur.delta
    wall = time.perf_counter() - t0
    for i in range(steps + 1):
        logp[i] = log_marginal(c, None, Hyper(gam[i], dlt[i]), prior, None, problem.prior_rank)
    chain = _finish("oneblock", gam, dlt, acc, logp, wall, thinning, steps, images,
                    widths=[float(wg), float(wd)], log_density="direct")
    chain.meta["log_ratios"] = log_ratios
    return chain


# --------------------------------------------------------------------------
# tuning


def tune_w2(problem, init, seed=0, target=0.44, batches=30, batch_size=200, w2=None):
    """Adapt the angular width of ``"mtc2"`` toward ``target`` acceptance."""
    if w2 is None:
        w2 = 1e-3 * min(init.phi, 0.5 * math.pi - init.phi)
    cur = init
    for b in range(batches):
        ch = run_chain("mtc2", problem, batch_size, seed=[seed, b], init=cur, w2=w2)
        rate = ch.acceptance_rate
        cur = Hyper(ch.gamma[-1], ch.delta[-1])
        w2 *= math.exp(2.0 * (rate - target))
    return w2, cur


def tune_widths(problem, init, seed=0, pilot_steps=5000, factor=1.8, w2=None):
    """Random-walk widths as ``factor`` times posterior standard deviations.

    The standard deviations come from a tuned ``"mtc2"`` pilot chain (which
    has no width to choose for the radial direction).
    """
    if w2 is None:
        w2, init = tune_w2(problem, init, seed=seed)
    ch = run_chain("mtc2", problem, pilot_steps, seed=[seed, 1_000_003], init=init, w2=w2)
    return (factor * float(np.std(ch.gamma)), factor * float(np.std(ch.delta))), w2


__all__ = [
    "Hyper",
    "GammaPrior",
    "LogDensityPrior",
    "PeriodicProblem",
    "Chain",
    "RandomWalkProposal",
    "log_marginal",
    "sample_conditional_x",
    "gibbs_step",
    "oneblock_step",
    "mtc_option1_step",
    "mtc_option2_step",
    "run_chain",
    "rng_streams",
    "tune_w2",
    "tune_widths",
    "DEFAULT_WIDTHS",
    "DEFAULT_W2",
    "BURN_IN",
]
