"""Acceptance suite: one test per criterion, each recording a PASS/FAIL line.

Run on its own with ``pytest tests/test_acceptance.py -v`` (or
``python tests/test_acceptance.py``); the recorded lines are repeated in the
terminal summary.
"""

import math
import time
import warnings

import numpy as np
import pytest
import scipy.linalg

from mtcdeblur import oracle
from mtcdeblur.diagnostics import cces, histogram, iact
from mtcdeblur.model import LaplacianOp, PeriodicModel, Psf, ZeroPaddedModel
from mtcdeblur.nonperiodic import find_mode, hutchinson_traces, posterior_mean, taylor_f, taylor_g
from mtcdeblur.regularize import build_lcurve, solve_gendeconv
from mtcdeblur.samplers import (
    BURN_IN,
    GammaPrior,
    Hyper,
    PeriodicProblem,
    RandomWalkProposal,
    rng_streams,
    run_chain,
    tune_w2,
    tune_widths,
)
from mtcdeblur.solvers import TIGHT_SOLVER
from mtcdeblur.spectral import (
    build_tables,
    cache_from_spectra,
    f_direct,
    f_fast,
    g_direct,
    g_fast,
    middle_band_size,
)
from mtcdeblur.synthetic import standard_problem

pytestmark = pytest.mark.acceptance

KINDS = ("gibbs", "oneblock", "mtc1", "mtc2")


def _random_periodic(size, seed):
    rng = np.random.default_rng(seed)
    psf = Psf.from_array(rng.random((3, 3)) + 0.05)
    y = 100 * rng.random((size, size))
    A = oracle.dense_periodic_convolution(psf, (size, size))
    L = oracle.dense_laplacian((size, size), "periodic")
    return psf, y, A, L


# --------------------------------------------------------------------------
# 1


def test_c01_conditional_sampler_exactness(acceptance_report):
    t0 = time.perf_counter()
    psf, y, A, L = _random_periodic(4, 4)
    prob = PeriodicProblem(psf, y)
    theta = Hyper(0.05, 0.02)
    mean, cov = oracle.conditional_moments(
        oracle.DenseModel.hierarchical(A, L, y.ravel(), theta.gamma, theta.delta)
    )
    N = 100_000
    rng = np.random.default_rng(0)
    X = np.array([prob.draw_x(theta, rng).ravel() for _ in range(N)])
    m_hat = X.mean(axis=0)
    C_hat = np.cov(X, rowvar=False)
    d = np.diag(cov)
    z_mean = np.abs(m_hat - mean) / np.sqrt(d / N)
    z_cov = np.abs(C_hat - cov) / np.sqrt((np.outer(d, d) + cov ** 2) / N)
    worst = max(z_mean.max(), z_cov.max())
    elapsed = time.perf_counter() - t0
    ok = worst <= 3.0 and elapsed < 60
    acceptance_report(1, "conditional sampler exactness", ok,
                      f"max |z| mean {z_mean.max():.2f}, cov {z_cov.max():.2f} (limit 3); {elapsed:.1f} s")
    assert ok


# --------------------------------------------------------------------------
# 2


def test_c02_marginal_density_correctness(acceptance_report):
    prior = GammaPrior()
    rng = np.random.default_rng(2)
    worst = 0.0
    for size in (4, 6):
        psf, y, A, L = _random_periodic(size, 10 + size)
        prob = PeriodicProblem(psf, y, prior=prior, prior_rank=size * size - 1)
        for _ in range(100):
            a, b = (Hyper(*10.0 ** rng.uniform([-4, -6], [1, 0])) for _ in range(2))
            ours = prob.log_marginal(a) - prob.log_marginal(b)
            ref = (oracle.hierarchical_log_marginal(A, L, y.ravel(), a.gamma, a.delta, prior)
                   - oracle.hierarchical_log_marginal(A, L, y.ravel(), b.gamma, b.delta, prior))
            worst = max(worst, abs(ours - ref))
    ok = worst <= 1e-6
    acceptance_report(2, "marginal density correctness", ok,
                      f"max |difference error| {worst:.2e} over 200 pairs (limit 1e-6)")
    assert ok


# --------------------------------------------------------------------------
# 3


def _gaussian_cache(size, sigma, seed):
    psf = Psf.gaussian(sigma, min(int(math.ceil(4 * sigma)), size // 2 - 1))
    model = PeriodicModel(psf, (size, size))
    y = np.random.default_rng(seed).random((size, size))
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        cache = cache_from_spectra(model.Ahat, LaplacianOp((size, size)).spectrum(), np.fft.fft2(y))
    return cache, build_tables(cache)


def test_c03_spectral_expansions(acceptance_report):
    rng = np.random.default_rng(3)
    shape = (64, 64)
    Ahat = np.sqrt(10.0 ** rng.uniform(-12, 0, shape)) * np.exp(2j * np.pi * rng.random(shape))
    cache = cache_from_spectra(Ahat, LaplacianOp(shape).spectrum(), np.fft.fft2(rng.standard_normal(shape)))
    tables = build_tables(cache)
    lams = np.logspace(-8, 4, 50)
    worst = {}
    for eps in (1e-4, 1e-6, 1e-8):
        ef = max(abs(f_fast(cache, tables, lam, eps) - f_direct(cache, lam)) for lam in lams)
        eg = max(abs(g_fast(cache, tables, lam, eps) - g_direct(cache, lam)) for lam in lams)
        worst[eps] = max(ef / eps, eg / eps)
    # matched spectra: the same continuous PSF and Laplacian sampled on a 4x finer grid
    small, big = _gaussian_cache(64, 1.0, 0), _gaussian_cache(256, 4.0, 0)
    grid = np.logspace(-8, 2, 121)
    counts = {}
    for name, (c, t), scale in (("64", small, 1.0), ("256", big, 16.0)):
        counts[name] = max(
            max(middle_band_size(c, t, lam * scale, 1e-6, which) for which in ("f", "g"))
            for lam in grid
        )
    ratio = counts["256"] / max(counts["64"], 1)
    ok = all(v <= 1.0 for v in worst.values()) and 0.5 <= ratio <= 2.0
    detail = ", ".join(f"eps {e:g}: max err/eps {v:.2f}" for e, v in worst.items())
    acceptance_report(3, "fast spectral expansions", ok,
                      f"{detail}; middle band {counts['64']} (64^2) vs {counts['256']} (256^2), ratio {ratio:.2f}")
    assert ok


# --------------------------------------------------------------------------
# 4


def _quadrature_grid(chain, which, below=8.0, above=14.0, size=120):
    # posterior marginals are right-skewed, so the upper side gets more room
    v = getattr(chain, which)
    lo = max(v.mean() - below * v.std(), 1e-3 * v.mean())
    return np.linspace(lo, v.mean() + above * v.std(), size)


def test_c04_cross_algorithm_stationarity(acceptance_report, problem_8x8):
    _, psf, y = problem_8x8
    prob = PeriodicProblem(psf, y)
    h0 = prob.mode()
    w2, h1 = tune_w2(prob, h0)
    widths, w2 = tune_widths(prob, h1, w2=w2)
    N = 100_000
    means, ses = {}, {}
    pilot = None
    for kind in KINDS:
        ch = run_chain(kind, prob, N, seed=4, init=h1, widths=widths, w2=w2)
        b = BURN_IN[kind]
        for stat in ("gamma", "delta", "lambda"):
            s = ch.statistic(stat)[b:]
            means[kind, stat] = s.mean()
            ses[kind, stat] = s.std() * math.sqrt(iact(s).tau / s.size)
        if kind == "mtc2":
            pilot = ch
    A = oracle.dense_periodic_convolution(psf, y.shape)
    L = oracle.dense_laplacian(y.shape, "periodic")
    table = oracle.quadrature_marginal(
        lambda g, d: oracle.hierarchical_log_marginal(A, L, y.ravel(), g, d, prob.prior, nugget=1e-8),
        _quadrature_grid(pilot, "gamma"), _quadrature_grid(pilot, "delta"),
    )
    rel = max(
        abs(means[a, stat] - means[b, stat]) / abs(means[b, stat])
        for stat in ("gamma", "delta", "lambda") for a in KINDS for b in KINDS
    )
    z = max(
        abs(means[kind, stat] - table.mean(stat)) / ses[kind, stat]
        for stat in ("gamma", "delta", "lambda") for kind in KINDS
    )
    ok = rel <= 0.05 and z <= 3.0
    acceptance_report(4, "cross-algorithm stationarity", ok,
                      f"max pairwise relative difference {rel:.4f} (limit 0.05); "
                      f"max |z| against quadrature {z:.2f} (limit 3); "
                      f"quadrature lambda mean {table.mean('lambda'):.4e}")
    assert ok


# --------------------------------------------------------------------------
# 5


def test_c05_oneblock_mtc1_equivalence(acceptance_report, problem_8x8):
    _, psf, y = problem_8x8
    prob = PeriodicProblem(psf, y)
    h0 = prob.mode()
    widths = (0.05, 0.5 * h0.delta)
    steps, seed = 1000, 11
    ob = run_chain("oneblock", prob, steps, seed=seed, init=h0, widths=widths)
    m1 = run_chain("mtc1", prob, steps, seed=seed, init=h0, widths=widths)
    same = np.array_equal(ob.accepted, m1.accepted) and np.array_equal(ob.gamma, m1.gamma)
    normals = rng_streams(seed)["proposal"].standard_normal((steps, 2))
    prop = RandomWalkProposal(*widths)
    worst = 0.0
    for k in range(steps):
        cur = Hyper(m1.gamma[k], m1.delta[k])
        new = prop.move(cur, normals[k])
        if new is None:
            continue
        ref = prob.log_marginal(new) - prob.log_marginal(cur)
        worst = max(worst, abs(ob.meta["log_ratios"][k] - ref))
    ok = same and worst <= 1e-8
    acceptance_report(5, "one-block and MTC option 1 equivalence", ok,
                      f"identical decisions {same} ({int(m1.accepted[1:].sum())} accepted of {steps}); "
                      f"max log-ratio difference {worst:.2e} (limit 1e-8)")
    assert ok


# --------------------------------------------------------------------------
# 6


def _fd_coefficients(fun, lam0, half_width, order, nodes=17, degree=12):
    """Taylor coefficients about ``lam0`` from a Chebyshev-node polynomial fit."""
    t = np.cos(np.pi * (np.arange(nodes) + 0.5) / nodes)
    vals = np.array([fun(lam0 + half_width * ti) for ti in t])
    p = np.polynomial.polynomial.polyfit(t, vals, degree)
    return p[1:order + 1] / half_width ** np.arange(1, order + 1)


def test_c06_taylor_and_hutchinson(acceptance_report, dirichlet_small):
    psf, y, A, L = dirichlet_small
    model = ZeroPaddedModel(psf, y.shape, 1)
    lap = LaplacianOp(model.latent_shape, "dirichlet")
    lam0 = 0.04
    B = A.T @ A + lam0 * L
    mu_max = float(np.max(np.abs(np.linalg.eigvals(np.linalg.solve(B, L)))))
    hw = 0.25 / mu_max
    worst = 0.0
    fe = taylor_f(model, lap, y, lam0, 4, TIGHT_SOLVER)
    ge = taylor_g(model, lap, lam0, 4, solver_config=TIGHT_SOLVER, probe_kind="basis")
    ref_f = _fd_coefficients(lambda l: oracle.dense_f(A, L, y.ravel(), l), lam0, hw, 4)
    ref_g = _fd_coefficients(lambda l: oracle.dense_g(A, L, l), lam0, hw, 4)
    for order in range(1, 5):
        ef = taylor_f(model, lap, y, lam0, order, TIGHT_SOLVER).coeffs
        eg = ge.coeffs[:order]
        worst = max(worst, np.max(np.abs(ef - ref_f[:order]) / np.abs(ref_f[:order])),
                    np.max(np.abs(eg - ref_g[:order]) / np.abs(ref_g[:order])))
    # Hutchinson on a 20x20 latent image with a dense factorized solver
    _, psf20, y20 = standard_problem(18, seed=6, boundary="dirichlet", border=1)
    A20 = oracle.dense_zero_padded_convolution(psf20, y20.shape, 1)
    L20 = oracle.dense_laplacian((20, 20), "dirichlet")
    lap20 = LaplacianOp((20, 20), "dirichlet")
    lam = 0.01
    fac = scipy.linalg.cho_factor(A20.T @ A20 + lam * L20)
    solve = lambda v: scipy.linalg.cho_solve(fac, v.ravel()).reshape(v.shape)
    exact = oracle.dense_traces(A20, L20, lam, 4)
    rng = np.random.default_rng(6)
    runs = np.array([hutchinson_traces(solve, lap20, 4, 1, rng).values for _ in range(10_000)])
    z_h = np.abs(runs.mean(axis=0) - exact) / (runs.std(axis=0, ddof=1) / math.sqrt(runs.shape[0]))
    gr = taylor_g(model, lap, lam0, 4, 4, TIGHT_SOLVER, np.random.default_rng(7))
    counts_ok = fe.solves == 3 and gr.solves == 16
    ok = worst <= 1e-4 and np.all(z_h <= 3.0) and counts_ok
    acceptance_report(6, "Taylor expansions and trace estimation", ok,
                      f"max coefficient relative error {worst:.2e} (limit 1e-4); Hutchinson |z| "
                      f"{np.array2string(z_h, precision=2)} (limit 3); solves f {fe.solves} (3), g {gr.solves} (16)")
    assert ok


# --------------------------------------------------------------------------
# 7


def _profile(A, L, y, lam, prior):
    """``log pi(gamma*, lam | y)`` with ``gamma*`` the conditional mode, from dense f and g."""
    m, n = A.shape
    shape = 0.5 * m + prior.alpha_gamma + prior.alpha_delta
    rate = 0.5 * oracle.dense_f(A, L, y, lam) + prior.beta_gamma + prior.beta_delta * lam
    gamma = (shape - 1) / rate
    value = -(shape - 1) * math.log(rate) + (0.5 * n + prior.alpha_delta - 1) * math.log(lam) \
        - 0.5 * oracle.dense_g(A, L, lam)
    return value, gamma


def test_c07_mode_finder(acceptance_report):
    _, psf, y = standard_problem(8, gamma=0.25, seed=0, boundary="dirichlet", border=2)
    model = ZeroPaddedModel(psf, y.shape, 2)
    lap = LaplacianOp(model.latent_shape, "dirichlet")
    A = oracle.dense_zero_padded_convolution(psf, y.shape, 2)
    L = oracle.dense_laplacian(model.latent_shape, "dirichlet")
    prior = GammaPrior()
    grid = np.logspace(-7, 1, 1000)
    prof = [_profile(A, L, y.ravel(), lam, prior) for lam in grid]
    best = grid[int(np.argmax([p[0] for p in prof]))]
    # the profile differs from the oracle marginal in (gamma, lam) by a constant
    offsets = [
        oracle.hierarchical_log_marginal(A, L, y.ravel(), g, lam * g, prior) + math.log(g) - v
        for lam, (v, g) in zip(grid[::200], prof[::200])
    ]
    consistent = np.ptp(offsets) <= 1e-6 * max(1.0, abs(offsets[0]))
    cell = math.log(grid[1] / grid[0])
    found = {}
    for start in (5e-3, 1e-5):
        res = find_mode(model, lap, y, prior, start, TIGHT_SOLVER, np.random.default_rng(0),
                        probe_kind="basis")
        found[start] = res.lambda0
    cells = {s: abs(math.log(v / best)) / cell for s, v in found.items()}
    ok = consistent and all(c <= 1.0 for c in cells.values())
    acceptance_report(7, "mode finder", ok,
                      f"grid mode {best:.4e}; from 5e-3: {found[5e-3]:.4e} ({cells[5e-3]:.2f} cells), "
                      f"from 1e-5: {found[1e-5]:.4e} ({cells[1e-5]:.2f} cells); profile matches oracle {consistent}")
    assert ok


# --------------------------------------------------------------------------
# 8


def _ar1(rho, N, seed):
    rng = np.random.default_rng(seed)
    e = rng.standard_normal(N)
    x = np.empty(N)
    x[0] = e[0] / math.sqrt(1 - rho ** 2)
    for i in range(1, N):
        x[i] = rho * x[i - 1] + e[i]
    return x


def test_c08_iact(acceptance_report):
    t_ar = iact(_ar1(0.5, 100_000, 8)).tau
    t_wn = iact(np.random.default_rng(8).standard_normal(100_000)).tau
    ok = abs(t_ar - 3.0) <= 0.3 and abs(t_wn - 1.0) <= 0.1
    acceptance_report(8, "integrated autocorrelation time", ok,
                      f"AR(1) rho=0.5 tau {t_ar:.3f} (3 +- 0.3); white noise tau {t_wn:.3f} (1 +- 0.1)")
    assert ok


# --------------------------------------------------------------------------
# 9 and 10 share one 64x64 problem


@pytest.fixture(scope="module")
def problem_64():
    x, psf, y = standard_problem(64, gamma=0.25)
    prob = PeriodicProblem(psf, y)
    h0 = prob.mode()
    w2, h1 = tune_w2(prob, h0)
    widths, w2 = tune_widths(prob, h1, w2=w2)
    return psf, y, prob, h1, widths, w2


def test_c09_efficiency_ordering(acceptance_report, problem_64):
    t0 = time.perf_counter()
    _, _, prob, h1, widths, w2 = problem_64
    N = 50_000
    eff, tau_delta = {}, {}
    for kind in ("mtc2", "mtc1", "oneblock", "gibbs"):
        ch = run_chain(kind, prob, N, seed=9, init=h1, widths=widths, w2=w2)
        b = BURN_IN[kind]
        eff[kind] = cces(iact(ch.lam[b:]).tau, ch.wall_time, N)
        tau_delta[kind] = iact(ch.delta[b:]).tau
    elapsed = time.perf_counter() - t0
    ordered = eff["mtc2"] < eff["mtc1"] < eff["oneblock"] < eff["gibbs"]
    ratio = tau_delta["gibbs"] / tau_delta["mtc2"]
    ok = ordered and ratio >= 2.0 and elapsed < 600
    acceptance_report(9, "efficiency ordering", ok,
                      "CCES(lambda) " + ", ".join(f"{k} {v:.3e} s" for k, v in eff.items())
                      + f"; IACT(delta) gibbs/mtc2 {ratio:.2f} (limit 2); {elapsed:.0f} s")
    assert ok


def _best_time(fn, repeats=7):
    best = math.inf
    for _ in range(repeats):
        t = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t)
    return best, out


def test_c10_cost_crossover(acceptance_report, problem_64):
    psf, y, _, _, _, _ = problem_64

    def regularize():
        model, lap = PeriodicModel(psf, y.shape), LaplacianOp(y.shape)
        curve = build_lcurve(model, lap, y)
        return solve_gendeconv(model, lap, curve.corner_lambda, y)

    def regularize_explicit():
        model, lap = PeriodicModel(psf, y.shape), LaplacianOp(y.shape)
        for lam in np.logspace(-6, 0, 200):
            solve_gendeconv(model, lap, lam, y)
        return solve_gendeconv(model, lap, 1e-3, y)

    def setup():
        prob = PeriodicProblem(psf, y)
        return prob, prob.mode()

    t_reg, _ = _best_time(regularize)
    t_reg200, _ = _best_time(regularize_explicit)
    t_setup, (prob, h0) = _best_time(setup)
    t_tune, (w2, h1) = _best_time(lambda: tune_w2(prob, h0), repeats=3)
    ch = run_chain("mtc2", prob, 20_000, seed=10, init=h1, w2=w2)
    tau = iact(ch.lam[BURN_IN["mtc2"]:]).tau
    t_step = ch.wall_time / 20_000
    t_draw, _ = _best_time(lambda: prob.draw_x(h1, np.random.default_rng(0)))
    t_mtc = t_setup + (BURN_IN["mtc2"] + tau) * t_step + t_draw
    ratio = t_mtc / t_reg
    ok = t_mtc < t_reg
    acceptance_report(10, "cost crossover", ok,
                      f"MTC2 {1e3 * t_mtc:.2f} ms (setup {1e3 * t_setup:.2f}, tau {tau:.1f} x "
                      f"{1e6 * t_step:.2f} us/step, draw {1e3 * t_draw:.2f}) vs L-curve + solve "
                      f"{1e3 * t_reg:.2f} ms: ratio {ratio:.3f}; against 200 explicit solves "
                      f"{t_mtc / t_reg200:.3f}; with w2 tuning ({1e3 * t_tune:.1f} ms) counted "
                      f"{(t_mtc + t_tune) / t_reg:.3f}")
    assert ok


# --------------------------------------------------------------------------
# 11


def test_c11_histogram_posterior_mean(acceptance_report, problem_8x8):
    _, psf, y = problem_8x8
    prob = PeriodicProblem(psf, y)
    w2, h1 = tune_w2(prob, prob.mode())
    ch = run_chain("mtc2", prob, 100_000, seed=11, init=h1, w2=w2)
    lam = ch.lam[BURN_IN["mtc2"]:]
    model, lap = PeriodicModel(psf, y.shape), LaplacianOp(y.shape)
    A2 = np.abs(model.Ahat) ** 2
    Lhat = lap.spectrum()
    qhat = np.conj(model.Ahat) * np.fft.fft2(y)
    # conditional means x(lam) for every retained state
    X = np.concatenate([
        np.fft.ifft2(qhat / (A2 + part[:, None, None] * Lhat)).real.reshape(part.size, -1)
        for part in np.array_split(lam, 20)
    ])
    mc = X.mean(axis=0)
    se = np.array([X[:, i].std() * math.sqrt(iact(X[:, i]).tau / X.shape[0]) for i in range(X.shape[1])])
    edges, weights = histogram(lam)
    centers = 0.5 * (edges[1:] + edges[:-1])
    pm = posterior_mean(model, lap, y, (centers, weights)).ravel()
    z = np.abs(pm - mc) / se
    ok = z.max() <= 3.0
    acceptance_report(11, "posterior mean by histogram integration", ok,
                      f"max |z| over {z.size} pixels {z.max():.2f} (limit 3); {edges.size - 1} bins")
    assert ok


if __name__ == "__main__":
    raise SystemExit(pytest.main([__file__, "-v"]))
