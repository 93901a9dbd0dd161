"""Marginal-then-conditional inference without a diagonalizing transform.

For the zero-padded model, ``f`` and ``g`` are replaced near a centre
``lam0`` by Taylor polynomials in ``Delta = lam - lam0``:

* ``f``: ``c_r = (-1)^(r+1) q^T (B^-1 L)^r B^-1 q`` with ``q = A^T y`` and
  ``B = A^T A + lam0 L``; ``u_k = (B^-1 L)^k B^-1 q`` gives every order up
  to ``2k + 1`` through ``u_a^T L u_b`` with ``a + b = r - 1``.
* ``g``: ``c_r = (-1)^(r+1) tr((B^-1 L)^r) / r``, traces by Hutchinson's
  estimator with Rademacher probes (one sweep of ``v <- B^-1 L v`` per probe
  yields all orders).

The expansions drive a mode finder and a Metropolis-within-Gibbs sampler in
``(gamma, lam)`` whose per-step cost is independent of the image size.
"""

import json
import math
import time
import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.optimize

from .exceptions import ConvergenceError, DomainError, ParameterError
from .model import PeriodicModel, ZeroPaddedModel
from .regularize import solve_gendeconv
from .samplers import GammaPrior, Hyper, _finish, _half_rank, _require_conjugate, rng_streams
from .solvers import DEFAULT_SOLVER, IterativeSolverConfig, iterative_solve
from .spectral import SpectralCache, f_direct, g_direct

DEFAULT_W3 = 1e-4
DEFAULT_PROBES = 4
DEFAULT_TAYLOR_ORDER = 4
STOP_TOL = 1e-2
MAX_OUTER = 20
TRUST_TOL = 1e-2
MODE_TRUST_TOL = 1.0
MAX_CENTERS = 4


class _CountingSolver:
    """``v -> B^-1 v`` for ``B = A^T A + lam L``, counting solves."""

    def __init__(self, model, laplacian, lam, config):
        self.model, self.laplacian, self.lam, self.config = model, laplacian, float(lam), config
        self.count = 0
        if isinstance(model, PeriodicModel):
            self._denom = np.abs(model.Ahat) ** 2 + self.lam * laplacian.spectrum()

    def __call__(self, v):
        self.count += 1
        if isinstance(self.model, PeriodicModel):
            return np.fft.ifft2(np.fft.fft2(v) / self._denom).real
        lam = self.lam
        x, _, _ = iterative_solve(
            lambda u: self.model.normal(u) + lam * self.laplacian.apply(u), v, self.config
        )
        return x


@dataclass
class TraceEstimate:
    """Estimates of ``tr((B^-1 L)^r)``, ``r = 1..order``."""

    values: np.ndarray
    probes: int
    std_errors: np.ndarray
    solves: int = 0


def hutchinson_traces(B_solve, L_apply, s, probes, rng, probe_kind="rademacher", shape=None):
    """Monte Carlo ``tr((B^-1 L)^r)`` for ``r = 1..s`` from ``probes`` sweeps.

    Each probe ``z`` is pushed through ``v <- B_solve(L_apply(v))`` ``s``
    times, recording ``z^T v`` after each application.

    ``probe_kind="basis"`` returns exact traces (for tests and small
    problems): the ``n`` columns of ``B^-1 L`` are formed with one solve
    each and the traces of its powers are taken densely.
    ``shape`` defaults to ``L_apply.shape`` when ``L_apply`` is a
    :class:`~mtcdeblur.model.LaplacianOp`.
    """
    if s < 1:
        raise ParameterError("order must be >= 1")
    if shape is None:
        shape = getattr(L_apply, "shape", None)
        if shape is None:
            raise ParameterError("shape is required when L_apply is a plain callable")
    apply_L = L_apply.apply if hasattr(L_apply, "apply") else L_apply
    n = int(np.prod(shape))
    if probe_kind == "basis":
        M = np.empty((n, n))
        for i in range(n):
            e = np.zeros(n)
            e[i] = 1.0
            M[:, i] = np.ravel(B_solve(apply_L(e.reshape(shape))))
        values = np.empty(s)
        P = np.eye(n)
        for r in range(s):
            P = P @ M
            values[r] = np.trace(P)
        return TraceEstimate(values, n, np.zeros(s), n)
    if probe_kind != "rademacher":
        raise ParameterError(f"unknown probe kind {probe_kind!r}")
    if probes < 1:
        raise ParameterError("probes must be >= 1")
    est = np.empty((probes, s))
    solves = 0
    for p in range(probes):
        z = rng.choice(np.array([-1.0, 1.0]), size=shape)
        v = z
        for r in range(s):
            v = B_solve(apply_L(v))
            solves += 1
            est[p, r] = float(np.vdot(z, v))
    values = est.mean(axis=0)
    if probes > 1:
        se = est.std(axis=0, ddof=1) / math.sqrt(probes)
    else:
        se = np.full(s, np.inf)
    return TraceEstimate(values, probes, se, solves)


@dataclass
class TaylorExpansion:
    """``sum_{r=1..order} coeffs[r-1] * (lam - center)^r`` (value at centre excluded)."""

    center: float
    coeffs: np.ndarray
    order: int
    error_scale: float
    std_errors: np.ndarray = None
    probes: int = 0
    value: float = None
    solves: int = 0

    def __call__(self, lam):
        d = np.asarray(lam, dtype=float) - self.center
        out = np.zeros_like(d)
        for c in self.coeffs[::-1]:
            out = (out + c) * d
        return out if out.ndim else float(out)

    def trust_radius(self, tol=TRUST_TOL, weight=1.0):
        """``rho`` with ``weight * |c_s| rho^s = tol``."""
        cs = abs(self.coeffs[-1]) * weight
        return math.inf if cs == 0 else (tol / cs) ** (1.0 / self.order)

    def to_dict(self):
        return {
            "center": self.center,
            "coefficients": [float(c) for c in self.coeffs],
            "order": self.order,
            "error_scale": self.error_scale,
            "std_errors": None if self.std_errors is None else [float(e) for e in self.std_errors],
            "probes": self.probes,
            "value": self.value,
            "solves": self.solves,
        }

    @classmethod
    def from_dict(cls, d):
        se = d.get("std_errors")
        return cls(
            float(d["center"]), np.asarray(d["coefficients"], dtype=float), int(d["order"]),
            float(d["error_scale"]), None if se is None else np.asarray(se, dtype=float),
            int(d.get("probes", 0)), d.get("value"), int(d.get("solves", 0)),
        )

    def save(self, path):
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh, indent=2)

    @classmethod
    def load(cls, path):
        with open(path) as fh:
            return cls.from_dict(json.load(fh))


def _check_center(lambda0, order):
    if not lambda0 > 0:
        raise DomainError(f"expansion centre must be positive, got {lambda0!r}")
    if order < 1:
        raise ParameterError("order must be >= 1")


def taylor_f(model, laplacian, y, lambda0, order=DEFAULT_TAYLOR_ORDER, solver_config=DEFAULT_SOLVER):
    """Taylor coefficients of ``f`` about ``lambda0`` from ``ceil(order/2) + 1`` solves.

    ``coeffs[r-1] = f^(r)(lambda0) / r!``; ``error_scale = |c_(order+1)|``
    comes from the same solves.  ``value`` holds ``f(lambda0)``.
    """
    _check_center(lambda0, order)
    y = np.asarray(y, dtype=float)
    solve = _CountingSolver(model, laplacian, lambda0, solver_config)
    q = model.adjoint(y)
    k = (order + 1) // 2
    u = [solve(q)]
    Lu = [laplacian.apply(u[0])]
    for _ in range(k):
        u.append(solve(Lu[-1]))
        Lu.append(laplacian.apply(u[-1]))
    c = np.empty(order + 1)
    for r in range(1, order + 2):
        a = (r - 1) // 2
        b = r - 1 - a
        c[r - 1] = (-1.0) ** (r + 1) * float(np.vdot(u[a], Lu[b]))
    # residual form: error is quadratic in the solve error, unlike y^T y - q^T u0
    resid = y - model.forward(u[0])
    value = float(np.vdot(resid, resid) + lambda0 * np.vdot(u[0], Lu[0]))
    return TaylorExpansion(float(lambda0), c[:order], order, abs(c[order]), value=value,
                           solves=solve.count)


def taylor_g(model, laplacian, lambda0, order=DEFAULT_TAYLOR_ORDER, probes=DEFAULT_PROBES,
             solver_config=DEFAULT_SOLVER, rng=None, probe_kind="rademacher"):
    """Taylor coefficients of ``g`` increments about ``lambda0`` (``probes * order`` solves).

    ``error_scale`` extrapolates the next coefficient as ``|c_s|^2 / |c_(s-1)|``
    so no extra solves are spent on it.
    """
    _check_center(lambda0, order)
    rng = np.random.default_rng() if rng is None else rng
    solve = _CountingSolver(model, laplacian, lambda0, solver_config)
    tr = hutchinson_traces(solve, laplacian, order, probes, rng, probe_kind,
                           shape=model.latent_shape)
    r = np.arange(1, order + 1)
    sign = (-1.0) ** (r + 1)
    coeffs = sign * tr.values / r
    se = tr.std_errors / r
    if order >= 2 and coeffs[-2] != 0:
        err = coeffs[-1] ** 2 / abs(coeffs[-2])
    else:
        err = abs(coeffs[-1])
    return TaylorExpansion(float(lambda0), coeffs, order, float(abs(err)), se, tr.probes,
                           solves=solve.count)


# --------------------------------------------------------------------------
# problem container and piecewise expansions


class NonPeriodicProblem:
    """Zero-padded model with a bordered latent image and Dirichlet Laplacian."""

    def __init__(self, psf, y, border=16, prior=None, solver_config=DEFAULT_SOLVER,
                 prior_rank=None, order=DEFAULT_TAYLOR_ORDER, probes=DEFAULT_PROBES,
                 probe_kind="rademacher"):
        self.y = np.asarray(y, dtype=float)
        self.model = ZeroPaddedModel(psf, self.y.shape, border)
        self.laplacian = self.model.laplacian()
        self.prior = GammaPrior() if prior is None else prior
        self.solver_config = solver_config
        self.prior_rank = prior_rank
        self.order = order
        self.probes = probes
        self.probe_kind = probe_kind

    @property
    def m(self):
        return self.model.m

    @property
    def n(self):
        return self.model.n

    @property
    def half_rank(self):
        return _half_rank(self.n, self.prior_rank)

    def expand(self, lam, rng):
        fe = taylor_f(self.model, self.laplacian, self.y, lam, self.order, self.solver_config)
        ge = taylor_g(self.model, self.laplacian, lam, self.order, self.probes,
                      self.solver_config, rng, self.probe_kind)
        return fe, ge

    def draw_x(self, hyper, rng):
        from .samplers import sample_conditional_x

        return sample_conditional_x(self.model, self.laplacian, hyper, self.y, rng)


@dataclass
class _Piece:
    f: TaylorExpansion
    g: TaylorExpansion
    offset: float
    rho: float


@dataclass
class PiecewiseExpansion:
    """Up to ``max_centers`` cached expansions, each trusted within its radius.

    ``g`` values are relative to the first centre; new centres inherit their
    offset from the piece whose region contains them.
    """

    pieces: list = field(default_factory=list)
    max_centers: int = MAX_CENTERS
    gamma_scale: float = 1.0
    trust_tol: float = TRUST_TOL

    def radius(self, fe, ge):
        return min(ge.trust_radius(self.trust_tol, 0.5),
                   fe.trust_radius(self.trust_tol, 0.5 * self.gamma_scale), 0.999 * fe.center)

    def add(self, fe, ge):
        if self.pieces:
            near = self.nearest(fe.center)
            offset = near.offset + near.g(fe.center)
        else:
            offset = 0.0
        self.pieces.append(_Piece(fe, ge, offset, self.radius(fe, ge)))

    def nearest(self, lam):
        return min(self.pieces, key=lambda p: abs(lam - p.f.center) / p.rho)

    def covers(self, lam):
        return any(abs(lam - p.f.center) <= p.rho for p in self.pieces)

    def next_center(self, lam, target):
        """Edge, on the side facing ``target``, of the covered interval around ``lam``.

        A centre placed there overlaps the piece whose edge it is, so the
        chained ``g`` offset is read inside a trust region.
        """
        sign = 1.0 if target >= lam else -1.0
        p = self.nearest(lam)
        edge = p.f.center + sign * p.rho
        moved = True
        while moved:
            moved = False
            for q in self.pieces:
                far = q.f.center + sign * q.rho
                if abs(edge - q.f.center) <= q.rho and sign * (far - edge) > 0:
                    edge, moved = far, True
        return edge

    def evaluate(self, lam):
        """``(f(lam), g(lam) - g(first centre))``."""
        p = self.nearest(lam)
        return p.f.value + p.f(lam), p.offset + p.g(lam)

    def save(self, path):
        with open(path, "w") as fh:
            json.dump({
                "max_centers": self.max_centers, "gamma_scale": self.gamma_scale,
                "trust_tol": self.trust_tol,
                "pieces": [{"f": p.f.to_dict(), "g": p.g.to_dict(), "offset": p.offset,
                            "rho": p.rho} for p in self.pieces],
            }, fh, indent=2)

    @classmethod
    def load(cls, path):
        with open(path) as fh:
            d = json.load(fh)
        pw = cls([], d["max_centers"], d["gamma_scale"], d["trust_tol"])
        for p in d["pieces"]:
            pw.pieces.append(_Piece(TaylorExpansion.from_dict(p["f"]),
                                    TaylorExpansion.from_dict(p["g"]), p["offset"], p["rho"]))
        return pw


# --------------------------------------------------------------------------
# mode finding


@dataclass
class ModeResult:
    lambda0: float
    gamma0: float
    solve_count: int
    iterations: int
    history: list
    f_expansion: TaylorExpansion = None
    g_expansion: TaylorExpansion = None


def _gamma_shape(prior, m, n, half_rank):
    return half_rank + 0.5 * (m - n) + prior.alpha_gamma + prior.alpha_delta


def _find_mode_spectral(cache, prior, prior_rank, bounds=(1e-12, 1e8), grid=41):
    """Mode of ``pi(gamma, delta | y)`` for the periodic model (direct ``f``, ``g``).

    For fixed ``lam`` the density along the ray ``delta = lam gamma`` is a
    Gamma kernel in ``gamma``; profiling it leaves a 1-D search in ``log lam``.
    """
    prior = _require_conjugate(prior)
    h = _half_rank(cache.n, prior_rank)
    K = h + prior.alpha_gamma + prior.alpha_delta - 2.0
    if K <= 0:
        raise ParameterError("posterior mode is at the boundary for these prior constants")

    def rate(lam):
        return 0.5 * f_direct(cache, lam) + prior.beta_gamma + prior.beta_delta * lam

    def neg_profile(t):
        lam = math.exp(t)
        return -((h + prior.alpha_delta - 1.0) * t - 0.5 * g_direct(cache, lam) - K * math.log(rate(lam)))

    ts = np.linspace(math.log(bounds[0]), math.log(bounds[1]), grid)
    vals = np.array([neg_profile(t) for t in ts])
    i = int(np.argmin(vals))
    lo, hi = ts[max(i - 1, 0)], ts[min(i + 1, grid - 1)]
    opt = scipy.optimize.minimize_scalar(neg_profile, bounds=(lo, hi), method="bounded",
                                         options={"xatol": 1e-8})
    lam = math.exp(opt.x)
    gamma = K / rate(lam)
    return ModeResult(lam, gamma, 0, int(opt.nfev) + grid, [lam])


def find_mode(model, laplacian, y, prior, lambda_init=None, solver_config=DEFAULT_SOLVER,
              rng=None, order=DEFAULT_TAYLOR_ORDER, probes=DEFAULT_PROBES, probe_kind="rademacher",
              stop_tol=STOP_TOL, max_iter=MAX_OUTER, prior_rank=None,
              trust_tol=MODE_TRUST_TOL):
    """Mode of ``pi(gamma, lam | y)`` by repeated expansion and 1-D maximization.

    Each outer iteration expands ``f`` and ``g`` about the current ``lam``,
    profiles ``gamma`` at its conditional mode ``(shape - 1) / rate`` and
    maximizes the resulting 1-D function within the expansions' trust radius
    (a looser tolerance than the sampler's, since every step is re-expanded).
    Stops when the relative change of ``lam`` drops below ``stop_tol``.

    Passing a :class:`~mtcdeblur.spectral.SpectralCache` as ``model`` finds
    the mode of ``pi(gamma, delta | y)`` for the periodic model with direct
    ``f`` and ``g`` instead (``laplacian`` and ``y`` are then ignored).
    """
    if isinstance(model, SpectralCache):
        return _find_mode_spectral(model, prior, prior_rank)
    prior = _require_conjugate(prior)
    if lambda_init is None or not lambda_init > 0:
        raise DomainError("lambda_init must be positive")
    rng = np.random.default_rng() if rng is None else rng
    # one probe set for every outer iteration keeps the iteration deterministic
    probe_seed = int(rng.integers(2**63))
    m, n = model.m, model.n
    h = _half_rank(n, prior_rank)
    shape = _gamma_shape(prior, m, n, h)
    lam = float(lambda_init)
    history = [lam]
    solves = 0
    fe = ge = None
    for it in range(1, max_iter + 1):
        fe = taylor_f(model, laplacian, y, lam, order, solver_config)
        ge = taylor_g(model, laplacian, lam, order, probes, solver_config,
                      np.random.default_rng(probe_seed), probe_kind)
        solves += fe.solves + ge.solves

        def rate(l, fe=fe):
            return 0.5 * (fe.value + fe(l)) + prior.beta_gamma + prior.beta_delta * l

        def neg_profile(l, fe=fe, ge=ge):
            r = rate(l)
            if not (l > 0 and r > 0):
                return math.inf
            return -(-(shape - 1.0) * math.log(r) + (h + prior.alpha_delta - 1.0) * math.log(l)
                     - 0.5 * ge(l))

        gamma_hat = (shape - 1.0) / rate(lam)
        rho = min(ge.trust_radius(trust_tol, 0.5), fe.trust_radius(trust_tol, 0.5 * gamma_hat))
        lo, hi = max(lam - rho, 1e-3 * lam), lam + min(rho, 1e3 * lam)
        opt = scipy.optimize.minimize_scalar(neg_profile, bounds=(lo, hi), method="bounded",
                                             options={"xatol": 1e-6 * lam})
        new = float(opt.x)
        history.append(new)
        change = abs(new - lam) / lam
        lam = new
        if change < stop_tol:
            gamma0 = (shape - 1.0) / rate(lam)
            return ModeResult(lam, gamma0, solves, it, history, fe, ge)
    raise ConvergenceError(
        f"mode finder did not converge in {max_iter} iterations", best=lam, history=history
    )


# --------------------------------------------------------------------------
# sampling in (gamma, lam)


def _lam_log_conditional(lam, gamma, f, G, prior, half_rank):
    return ((half_rank + prior.alpha_delta - 1.0) * math.log(lam) - 0.5 * G - 0.5 * gamma * f
            - prior.beta_delta * gamma * lam)


def mwg_nonperiodic_step(theta, expansions, prior, w3, rng, m, n, prior_rank=None, grow=None):
    """``gamma | lam`` exact Gamma draw, then one random-walk step on ``lam | gamma``.

    ``expansions`` is a :class:`PiecewiseExpansion`.  ``grow(lam)`` (optional)
    is called with :meth:`PiecewiseExpansion.next_center` until the proposal
    is covered or ``max_centers`` is reached.  A proposal that is still uncovered is
    rejected with a warning: the quartic ``g`` expansion is unbounded below
    away from its centre, so extrapolating it creates spurious modes.
    """
    prior = _require_conjugate(prior)
    h = _half_rank(n, prior_rank)
    shape = _gamma_shape(prior, m, n, h)
    lam = theta.lam
    f, G = expansions.evaluate(lam)
    gamma = rng.standard_gamma(shape) / (0.5 * f + prior.beta_gamma + prior.beta_delta * lam)
    lp = lam + w3 * rng.standard_normal()
    logu = math.log(rng.random())
    accepted = False
    if lp > 0:
        if not expansions.covers(lp):
            while (grow is not None and not expansions.covers(lp)
                   and len(expansions.pieces) < expansions.max_centers):
                grow(expansions.next_center(lam, lp))
            if not expansions.covers(lp):
                warnings.warn(f"lambda={lp:.6g} lies outside every expansion trust radius; "
                              "rejected", RuntimeWarning, stacklevel=2)
                return Hyper.from_lambda(gamma, lam), False
        fp, Gp = expansions.evaluate(lp)
        diff = (_lam_log_conditional(lp, gamma, fp, Gp, prior, h)
                - _lam_log_conditional(lam, gamma, f, G, prior, h))
        if logu < diff:
            lam, accepted = lp, True
    return Hyper.from_lambda(gamma, lam), accepted


def run_mwg(problem, steps, seed=0, init=None, thinning=1, prior=None, image_every=0,
            w3=None, expansions=None, lambda_init=5e-3, max_centers=MAX_CENTERS):
    """Chain of :func:`mwg_nonperiodic_step` on a :class:`NonPeriodicProblem`.

    Without ``expansions`` the mode is located first (its cost is recorded
    in ``meta["setup_solves"]``) and the chain starts there.  Up to
    ``max_centers`` expansions are built in total; small problems with broad
    ``lam`` posteriors need more than the default.
    """
    prior = _require_conjugate(problem.prior if prior is None else prior)
    w3 = DEFAULT_W3 if w3 is None else float(w3)
    streams = rng_streams(seed)
    m, n, h = problem.m, problem.n, problem.half_rank
    shape = _gamma_shape(prior, m, n, h)
    setup_solves = 0
    t_setup = time.perf_counter()
    if expansions is None:
        res = find_mode(problem.model, problem.laplacian, problem.y, prior,
                        lambda_init if init is None else init.lam, problem.solver_config,
                        streams["noise"], problem.order, problem.probes, problem.probe_kind,
                        prior_rank=problem.prior_rank)
        setup_solves = res.solve_count
        expansions = PiecewiseExpansion(max_centers=max_centers, gamma_scale=res.gamma0)
        expansions.add(res.f_expansion, res.g_expansion)
        if init is None:
            init = Hyper.from_lambda(res.gamma0, res.lambda0)
    elif init is None:
        p0 = expansions.pieces[0]
        f0 = p0.f.value
        init = Hyper.from_lambda((shape - 1.0) / (0.5 * f0 + prior.beta_gamma), p0.f.center)
    setup = time.perf_counter() - t_setup

    def grow(lam):
        fe, ge = problem.expand(lam, streams["noise"])
        expansions.add(fe, ge)
        grow.solves += fe.solves + ge.solves

    grow.solves = 0
    stdgam = streams["gamma"].standard_gamma(shape, steps)
    normals = streams["proposal"].standard_normal(steps)
    logu = np.log(streams["uniform"].random(steps))
    gam, dlt = np.empty(steps + 1), np.empty(steps + 1)
    acc = np.zeros(steps + 1, dtype=np.uint8)
    logp = np.empty(steps + 1)

    def logdens(gamma, lam, f, G):
        delta = gamma * lam
        return (h * math.log(delta) + 0.5 * (m - n) * math.log(gamma) - 0.5 * G - 0.5 * gamma * f
                + prior.logpdf(gamma, delta))

    gamma, lam = init.gamma, init.lam
    f, G = expansions.evaluate(lam)
    gam[0], dlt[0], logp[0] = gamma, gamma * lam, logdens(gamma, lam, f, G)
    outside = 0
    t0 = time.perf_counter()
    for k in range(steps):
        gamma = stdgam[k] / (0.5 * f + prior.beta_gamma + prior.beta_delta * lam)
        lp = lam + w3 * normals[k]
        if lp > 0:
            if not expansions.covers(lp):
                while not expansions.covers(lp) and len(expansions.pieces) < expansions.max_centers:
                    grow(expansions.next_center(lam, lp))
                f, G = expansions.evaluate(lam)
                if not expansions.covers(lp):
                    outside += 1
                    lp = -1.0
        if lp > 0:
            fp, Gp = expansions.evaluate(lp)
            diff = (_lam_log_conditional(lp, gamma, fp, Gp, prior, h)
                    - _lam_log_conditional(lam, gamma, f, G, prior, h))
            if logu[k] < diff:
                lam, f, G = lp, fp, Gp
                acc[k + 1] = 1
        gam[k + 1], dlt[k + 1] = gamma, gamma * lam
        logp[k + 1] = logdens(gamma, lam, f, G)
    wall = time.perf_counter() - t0
    if outside:
        warnings.warn(f"{outside} proposals fell outside every expansion trust radius "
                      "and were rejected",
                      RuntimeWarning, stacklevel=2)
    images = []
    if image_every:
        images = [problem.draw_x(Hyper(gam[i], dlt[i]), streams["noise"])
                  for i in range(0, steps + 1, image_every)]
    chain = _finish("mtc-nonperiodic", gam, dlt, acc, logp, wall, thinning, steps, images,
                    w3=w3, setup_time=setup, setup_solves=setup_solves,
                    extra_solves=grow.solves, centers=len(expansions.pieces),
                    outside_trust=outside, log_density="expansion")
    chain.meta["expansions"] = expansions
    return chain


# --------------------------------------------------------------------------
# posterior mean


def posterior_mean(model, laplacian, y, lambda_histogram, solver_config=DEFAULT_SOLVER):
    """``sum_b w_b (A^T A + lam_b L)^-1 A^T y`` over occupied histogram bins."""
    centers, weights = (np.asarray(a, dtype=float).ravel() for a in lambda_histogram)
    if centers.shape != weights.shape or centers.size == 0:
        raise ParameterError("histogram centres and weights must be non-empty and aligned")
    if np.any(weights < 0) or abs(weights.sum() - 1.0) > 1e-9:
        raise ParameterError("histogram weights must be nonnegative and sum to 1")
    out = None
    x = None
    for lam, w in zip(centers, weights):
        if w == 0:
            continue
        x = solve_gendeconv(model, laplacian, lam, y, solver_config, x0=x)
        out = w * x if out is None else out + w * x
    return out


__all__ = [
    "IterativeSolverConfig",
    "iterative_solve",
    "TraceEstimate",
    "hutchinson_traces",
    "TaylorExpansion",
    "taylor_f",
    "taylor_g",
    "NonPeriodicProblem",
    "PiecewiseExpansion",
    "ModeResult",
    "find_mode",
    "mwg_nonperiodic_step",
    "run_mwg",
    "posterior_mean",
    "DEFAULT_W3",
]
