import math

import numpy as np
import pytest

from mtcdeblur import oracle
from mtcdeblur.exceptions import DomainError, ParameterError, UnsupportedPriorError
from mtcdeblur.model import LaplacianOp, PeriodicModel, ZeroPaddedModel
from mtcdeblur.samplers import (
    Chain,
    GammaPrior,
    Hyper,
    LogDensityPrior,
    PeriodicProblem,
    RandomWalkProposal,
    gibbs_step,
    log_marginal,
    mtc_option1_step,
    mtc_option2_step,
    oneblock_step,
    rng_streams,
    run_chain,
    sample_conditional_x,
    tune_w2,
)
from mtcdeblur.solvers import TIGHT_SOLVER


@pytest.fixture(scope="module")
def problem8(problem_8x8):
    _, psf, y = problem_8x8
    return PeriodicProblem(psf, y)


@pytest.fixture(scope="module")
def mode8(problem8):
    return problem8.mode()


def test_hyper_parametrizations():
    h = Hyper(2.0, 0.5)
    assert h.lam == 0.25
    back = Hyper.from_polar(h.r, h.phi)
    np.testing.assert_allclose([back.gamma, back.delta], [2.0, 0.5])
    np.testing.assert_allclose(Hyper.from_lambda(3.0, 0.1).delta, 0.3)
    for bad in ((0.0, 1.0), (1.0, -1.0), (math.inf, 1.0)):
        with pytest.raises(DomainError):
            Hyper(*bad)


def test_gamma_prior():
    p = GammaPrior(2.0, 3.0, 1.0, 0.5)
    np.testing.assert_allclose(p.logpdf(1.5, 2.0), math.log(1.5) - 4.5 - 1.0)
    with pytest.raises(ParameterError):
        GammaPrior(alpha_gamma=0.0)
    with pytest.raises(DomainError):
        LogDensityPrior(lambda g, d: -math.inf).logpdf(1.0, 1.0)


def test_log_marginal_differences_match_oracle(periodic_4x4):
    psf, y, A, L = periodic_4x4
    prob = PeriodicProblem(psf, y, prior_rank=15)
    rng = np.random.default_rng(0)
    thetas = [Hyper(*rng.uniform(0.01, 2.0, 2)) for _ in range(6)]
    ours = [prob.log_marginal(t) for t in thetas]
    ref = [oracle.hierarchical_log_marginal(A, L, y.ravel(), t.gamma, t.delta, prob.prior) for t in thetas]
    np.testing.assert_allclose(np.diff(ours), np.diff(ref), atol=1e-8)


def test_fast_log_marginal_close(problem8, mode8):
    for s in (0.5, 1.0, 2.0):
        h = Hyper(mode8.gamma, mode8.delta * s)
        assert abs(problem8.log_marginal(h, fast=True) - problem8.log_marginal(h)) < 1e-5


def test_zero_padded_conditional_draw(dirichlet_small):
    psf, y, A, L = dirichlet_small
    model = ZeroPaddedModel(psf, y.shape, 1)
    lap = LaplacianOp(model.latent_shape, "dirichlet")
    h = Hyper(0.5, 0.02)
    mean, cov = oracle.conditional_moments(oracle.DenseModel.hierarchical(A, L, y.ravel(), h.gamma, h.delta))
    rng = np.random.default_rng(1)
    N = 2000
    X = np.array([sample_conditional_x(model, lap, h, y, rng, TIGHT_SOLVER).ravel() for _ in range(N)])
    se = np.sqrt(np.diag(cov) / N)
    assert np.all(np.abs(X.mean(0) - mean) < 4.5 * se)


def test_trivial_proposals_always_accept(problem8, mode8):
    c, t = problem8.cache, problem8.tables
    prior = problem8.prior
    rng = np.random.default_rng(2)
    for _ in range(20):
        theta, acc = mtc_option1_step(mode8, c, t, prior, (0.0, 0.0), rng)
        assert acc and theta == mode8
    _, x, _ = None, problem8.draw_x(mode8, rng), None
    for _ in range(20):
        x, h, acc, lr = oneblock_step((x, mode8), problem8.model, problem8.laplacian, problem8.y,
                                      prior, RandomWalkProposal(0.0, 0.0), rng, return_log_ratio=True)
        assert acc and abs(lr) < 1e-8


def test_single_steps_run(problem8, mode8):
    rng = np.random.default_rng(3)
    x, h = gibbs_step((None, mode8), problem8.model, problem8.laplacian, problem8.y, problem8.prior, rng)
    assert x.shape == (8, 8) and h.gamma > 0
    theta, _ = mtc_option2_step(mode8, problem8.cache, problem8.tables, problem8.prior, 1e-3, rng)
    np.testing.assert_allclose(theta.phi, mode8.phi, atol=0.01)
    with pytest.raises(UnsupportedPriorError):
        mtc_option2_step(mode8, problem8.cache, problem8.tables, LogDensityPrior(lambda g, d: 0.0), 1e-3, rng)
    with pytest.raises(ParameterError):
        mtc_option2_step(mode8, problem8.cache, problem8.tables, problem8.prior, 0.0, rng)
    with pytest.raises(NotImplementedError):
        oneblock_step((None, mode8), ZeroPaddedModel(problem8.model.psf, (8, 8), 1), None, None,
                      problem8.prior, RandomWalkProposal(1, 1), rng)


def test_rng_streams_independent_and_reproducible():
    a, b = rng_streams(7), rng_streams(7)
    assert set(a) == {"proposal", "uniform", "gamma", "noise"}
    for k in a:
        assert a[k].random() == b[k].random()
    assert a["proposal"].random() != a["uniform"].random()


@pytest.mark.parametrize("kind", ["gibbs", "oneblock", "mtc1", "mtc2"])
def test_run_chain_deterministic(problem8, mode8, kind):
    kw = {"widths": (0.05, 1e-4)} if kind in ("oneblock", "mtc1") else {}
    if kind == "mtc2":
        kw["w2"] = 1e-3
    a = run_chain(kind, problem8, 200, seed=11, init=mode8, **kw)
    b = run_chain(kind, problem8, 200, seed=11, init=mode8, **kw)
    np.testing.assert_array_equal(a.gamma, b.gamma)
    np.testing.assert_array_equal(a.delta, b.delta)
    assert len(a) == 201 and a.gamma[0] == mode8.gamma
    assert 0.0 < a.acceptance_rate <= 1.0
    np.testing.assert_allclose(a.acceptance_rate, a.accepted[1:].mean())
    for i in (0, 100, 200):
        np.testing.assert_allclose(a.log_density[i], problem8.log_marginal(a.states[i]), atol=1e-5)


def test_general_prior_path_matches_kernel(problem8, mode8):
    prior = problem8.prior
    a = run_chain("mtc1", problem8, 300, seed=4, init=mode8, widths=(0.05, 1e-4))
    b = run_chain("mtc1", problem8, 300, seed=4, init=mode8, widths=(0.05, 1e-4),
                  prior=LogDensityPrior(prior.logpdf))
    np.testing.assert_array_equal(a.accepted, b.accepted)
    np.testing.assert_allclose(a.delta, b.delta)
    with pytest.raises(UnsupportedPriorError):
        run_chain("gibbs", problem8, 5, init=mode8, prior=LogDensityPrior(prior.logpdf))


def test_thinning_and_images(problem8, mode8):
    ch = run_chain("mtc2", problem8, 100, seed=1, init=mode8, w2=1e-3, thinning=10, image_every=50)
    assert len(ch) == 11 and ch.steps == 100
    assert len(ch.images) == 3 and ch.images[0].shape == (8, 8)
    g = run_chain("gibbs", problem8, 100, seed=1, init=mode8, image_every=25)
    assert len(g.images) == 4


def test_run_chain_validation(problem8, mode8):
    with pytest.raises(ParameterError):
        run_chain("nuts", problem8, 10)
    with pytest.raises(ParameterError):
        run_chain("mtc2", problem8, 0, init=mode8)
    with pytest.raises(TypeError):
        run_chain("mtc2", problem8, 10, init=mode8, bogus=1)


def test_chain_csv_round_trip(tmp_path, problem8, mode8):
    ch = run_chain("mtc1", problem8, 50, seed=2, init=mode8, widths=(0.05, 1e-4), thinning=5)
    ch.write_csv(tmp_path / "c.csv")
    back = Chain.read_csv(tmp_path / "c.csv", kind="mtc1")
    np.testing.assert_array_equal(back.gamma, ch.gamma)
    np.testing.assert_array_equal(back.log_density, ch.log_density)
    assert back.thinning == 5
    with pytest.raises(ValueError):
        Chain("x", [1.0], [1.0, 2.0], [0], [0.0])


def test_tune_w2_reaches_target(problem8, mode8):
    w2, state = tune_w2(problem8, mode8, seed=0, batches=20)
    ch = run_chain("mtc2", problem8, 3000, seed=9, init=state, w2=w2)
    assert 0.3 < ch.acceptance_rate < 0.6


def test_periodic_rto_matches_model_path(problem8, mode8):
    # the spectral draw and the generic draw consume the same normals
    a = problem8.draw_x(mode8, np.random.default_rng(5))
    b = sample_conditional_x(problem8.model, problem8.laplacian, mode8, problem8.y, np.random.default_rng(5))
    np.testing.assert_allclose(a, b, atol=1e-10)
    assert isinstance(problem8.model, PeriodicModel)
