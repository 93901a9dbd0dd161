"""Pure-Python kernels; same signatures as the compiled ``_ckernels``.

Spectral arrays follow the layout built by :mod:`mtcdeblur.spectral`:

* ``Z`` sorted ascending; the last ``n - n_fin`` entries are ``inf``
  (flagged spectral zeros of the PSF).
* ``w`` data weights aligned with ``Z``; ``w_flag`` their sum over flagged modes.
* Tables are stored with the cumulative index first, ``S[q, r-1]`` etc.,
  each with ``n + 1`` rows so that ``q = n`` means "empty".

Chain kernels take pre-drawn variates so a run is a pure function of them.
"""

import math

import numpy as np


def f_direct(Z, w, n_fin, w_flag, lam):
    z = lam * Z[:n_fin]
    return float(np.dot(w[:n_fin], z / (1.0 + z))) + w_flag


def g_direct(Z, n_fin, a, lam):
    n = Z.shape[0]
    total = a + float(np.sum(np.log1p(lam * Z[:n_fin])))
    if n > n_fin:
        total += (n - n_fin) * math.log(lam)
    return total


def band(Z, n_fin, lam, c):
    """``(m1, m2)``: head is ``Z[:m1]`` (lam*Z < c), tail is ``Z[m2:]`` (lam*Z > 1/c)."""
    fin = Z[:n_fin]
    m1 = int(np.searchsorted(fin, c / lam, side="left"))
    m2 = int(np.searchsorted(fin, 1.0 / (c * lam), side="right"))
    return m1, max(m1, m2)


def _signed_powers(lam, s, start):
    r = np.arange(start, s + 1)
    return r, lam ** r.astype(float)


def f_fast(Z, w, n_fin, S, T, lam, c, s):
    m1, m2 = band(Z, n_fin, lam, c)
    z = lam * Z[m1:m2]
    mid = float(np.dot(w[m1:m2], z / (1.0 + z)))
    r = np.arange(1, s + 1)
    head = float(np.dot((-1.0) ** (r + 1) * lam ** r, S[m1, :s]))
    r0 = np.arange(0, s + 1)
    tail = float(np.dot((-1.0) ** r0 * lam ** (-r0.astype(float)), T[m2, : s + 1]))
    return mid + head + tail


def g_fast(Z, n_fin, U, V, b, a, lam, c, s):
    n = Z.shape[0]
    m1, m2 = band(Z, n_fin, lam, c)
    mid = float(np.sum(np.log1p(lam * Z[m1:m2])))
    r = np.arange(1, s + 1)
    coef = (-1.0) ** (r - 1) / r
    head = float(np.dot(coef * lam ** r, U[m1, :s]))
    tail = float(np.dot(coef * lam ** (-r.astype(float)), V[m2, :s]))
    return a + b[m2] + (n - m2) * math.log(lam) + mid + head + tail


def _log_target(gamma, delta, f, g, ag, bg, ad, bd, half_rank):
    return (
        (half_rank + ad - 1.0) * math.log(delta)
        - 0.5 * g
        - 0.5 * gamma * f
        + (ag - 1.0) * math.log(gamma)
        - bg * gamma
        - bd * delta
    )


def mtc1_chain(Z, w, n_fin, w_flag, a, params, gamma0, delta0, wg, wd, normals, logu):
    """Random-walk Metropolis on (gamma, delta) with direct O(n) f and g."""
    ag, bg, ad, bd, half_rank = (float(v) for v in params)
    N = logu.shape[0]
    gam = np.empty(N + 1)
    dlt = np.empty(N + 1)
    acc = np.zeros(N + 1, dtype=np.uint8)
    logp = np.empty(N + 1)
    gc, dc = float(gamma0), float(delta0)
    lam = dc / gc
    lp = _log_target(gc, dc, f_direct(Z, w, n_fin, w_flag, lam), g_direct(Z, n_fin, a, lam),
                     ag, bg, ad, bd, half_rank)
    gam[0], dlt[0], logp[0] = gc, dc, lp
    for k in range(N):
        gp = gc + wg * normals[k, 0]
        dp = dc + wd * normals[k, 1]
        if gp > 0.0 and dp > 0.0:
            lam = dp / gp
            lpp = _log_target(gp, dp, f_direct(Z, w, n_fin, w_flag, lam), g_direct(Z, n_fin, a, lam),
                              ag, bg, ad, bd, half_rank)
            if logu[k] < lpp - lp:
                gc, dc, lp = gp, dp, lpp
                acc[k + 1] = 1
        gam[k + 1], dlt[k + 1], logp[k + 1] = gc, dc, lp
    return gam, dlt, acc, logp


def _log_phi(phi, r, f, g, ag, bg, ad, bd, half_rank):
    cp, sp = math.cos(phi), math.sin(phi)
    return (
        (ag - 1.0) * math.log(cp)
        + (half_rank + ad - 1.0) * math.log(sp)
        - 0.5 * g
        - 0.5 * r * cp * f
        - bg * r * cp
        - bd * r * sp
    )


def mtc2_chain(Z, w, n_fin, a, S, T, U, V, b, cf, cg, s, params, gamma0, delta0, w2,
               stdgam, normals, logu):
    """Metropolis-within-Gibbs on polar (r, phi) with fast f and g.

    ``stdgam`` holds Gamma(half_rank + ag + ad, 1) variates; dividing by the
    conditional rate gives the exact ``r | phi`` draw.
    """
    ag, bg, ad, bd, half_rank = (float(v) for v in params)
    N = logu.shape[0]
    gam = np.empty(N + 1)
    dlt = np.empty(N + 1)
    acc = np.zeros(N + 1, dtype=np.uint8)
    logp = np.empty(N + 1)
    gc, dc = float(gamma0), float(delta0)
    phi = math.atan2(dc, gc)
    lam = math.tan(phi)
    fc = f_fast(Z, w, n_fin, S, T, lam, cf, s)
    gcur = g_fast(Z, n_fin, U, V, b, a, lam, cg, s)
    gam[0], dlt[0] = gc, dc
    logp[0] = _log_target(gc, dc, fc, gcur, ag, bg, ad, bd, half_rank)
    half_pi = 0.5 * math.pi
    for k in range(N):
        cp, sp = math.cos(phi), math.sin(phi)
        rate = 0.5 * cp * fc + bg * cp + bd * sp
        r = stdgam[k] / rate
        php = phi + w2 * normals[k]
        if 0.0 < php < half_pi:
            lamp = math.tan(php)
            fp = f_fast(Z, w, n_fin, S, T, lamp, cf, s)
            gp = g_fast(Z, n_fin, U, V, b, a, lamp, cg, s)
            diff = _log_phi(php, r, fp, gp, ag, bg, ad, bd, half_rank) - _log_phi(
                phi, r, fc, gcur, ag, bg, ad, bd, half_rank
            )
            if logu[k] < diff:
                phi, fc, gcur = php, fp, gp
                acc[k + 1] = 1
        gc = r * math.cos(phi)
        dc = r * math.sin(phi)
        gam[k + 1], dlt[k + 1] = gc, dc
        logp[k + 1] = _log_target(gc, dc, fc, gcur, ag, bg, ad, bd, half_rank)
    return gam, dlt, acc, logp
