import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mtcdeblur.diagnostics import (
    autocorrelation,
    bin_centers,
    burn_in_heuristic,
    cces,
    diagnose_chain,
    histogram,
    iact,
)
from mtcdeblur.exceptions import DegenerateSeriesError, ParameterError
from mtcdeblur.samplers import Chain


def ar1(rho, N, seed=0):
    rng = np.random.default_rng(seed)
    e = rng.standard_normal(N)
    x = np.empty(N)
    x[0] = e[0] / np.sqrt(1 - rho ** 2)
    for i in range(1, N):
        x[i] = rho * x[i - 1] + e[i]
    return x


def test_autocorrelation_matches_direct(rng):
    x = rng.standard_normal(300)
    rho = autocorrelation(x, 10)
    xc = x - x.mean()
    ref = [np.sum(xc[: 300 - k] * xc[k:]) / np.sum(xc * xc) for k in range(11)]
    np.testing.assert_allclose(rho, ref, atol=1e-12)
    with pytest.raises(DegenerateSeriesError):
        autocorrelation(np.full(200, 3.0))
    with pytest.raises(ParameterError):
        autocorrelation(x, 200)


@pytest.mark.parametrize("rho", [0.0, 0.5, 0.9])
def test_iact_ar1(rho):
    res = iact(ar1(rho, 50000, seed=1))
    exact = (1 + rho) / (1 - rho)
    assert abs(res.tau - exact) < 4 * res.std_error
    assert res.window >= 1.5 * res.tau
    half = iact(ar1(rho, 50000, seed=1), convention="physics")
    np.testing.assert_allclose(half.tau, 0.5 * res.tau)


def test_iact_validation():
    with pytest.raises(ParameterError):
        iact(np.arange(50.0))
    with pytest.raises(ParameterError):
        iact(np.random.default_rng(0).standard_normal(500), convention="x")
    with pytest.warns(RuntimeWarning):
        _, ok = iact(ar1(0.9, 200), window_factor=30.0, return_reliable=True)
    assert not ok


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10**6), st.integers(1, 40))
def test_histogram_weights(seed, bins):
    x = np.random.default_rng(seed).standard_normal(500)
    edges, w = histogram(x, bins)
    assert edges.size == bins + 1 and w.size == bins
    np.testing.assert_allclose(w.sum(), 1.0)
    assert edges[0] == x.min() and edges[-1] == x.max()
    np.testing.assert_allclose(bin_centers(edges), 0.5 * (edges[1:] + edges[:-1]))


def test_histogram_constant_and_errors():
    edges, w = histogram(np.full(5, 2.0))
    np.testing.assert_allclose(edges, [1.5, 2.5])
    np.testing.assert_allclose(w, [1.0])
    with pytest.raises(ParameterError):
        histogram([])
    with pytest.raises(ParameterError):
        histogram([1.0, 2.0], bins=0)


def test_cces():
    assert cces(3.0, 10.0, 1000) == pytest.approx(0.03)
    with pytest.raises(ParameterError):
        cces(0.0, 1.0, 10)


def test_diagnose_chain(tmp_path):
    N = 20001
    lam = np.exp(0.1 * ar1(0.5, N, seed=3))
    gamma = np.ones(N)
    acc = np.zeros(N, dtype=bool)
    acc[1::2] = True
    ch = Chain("mtc1", gamma, lam, acc, np.zeros(N), wall_time=4.0, meta={"steps": N - 1})
    rep = diagnose_chain(ch, "lambda")
    assert rep.burn_in == 20 and rep.samples == N - 21
    assert abs(rep.tau - 3.0) < 4 * rep.tau_std_error
    assert rep.acceptance_rate == pytest.approx(0.5, abs=1e-3)
    np.testing.assert_allclose(rep.cces, rep.tau * 4.0 * rep.samples / (N - 1) / rep.samples)
    assert rep.acf[0] == 1.0 and rep.suggested_burn_in >= 5
    d = json.loads(rep.to_text())
    assert d["statistic"] == "lambda" and len(d["acf"]) <= 51
    rep.write_histogram_csv(tmp_path / "h.csv")
    rows = (tmp_path / "h.csv").read_text().splitlines()
    assert rows[0] == "left,right,center,weight" and len(rows) == 51
    assert diagnose_chain(ch, "delta", burn_in=0).samples == N - 1
    assert burn_in_heuristic(ar1(0.5, 5000)) >= 10


def test_diagnose_chain_thinned_burn_in():
    N = 1001
    x = ar1(0.3, N, seed=4)
    ch = Chain("gibbs", np.ones(N), np.exp(x), np.ones(N, bool), np.zeros(N), thinning=10,
               meta={"steps": 10 * (N - 1)})
    rep = diagnose_chain(ch, burn_in=60)
    assert rep.samples == N - 7
