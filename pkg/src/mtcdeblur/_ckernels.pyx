# cython: language_level=3
"""Compiled kernels; same signatures and semantics as ``_pykernels``."""

import numpy as np
cimport numpy as cnp
from libc.math cimport log, cos, sin, tan, atan2, frexp, M_PI, M_LN2

cnp.import_array()


cdef double _f_direct(const double[::1] Z, const double[::1] w, Py_ssize_t n_fin,
                      double w_flag, double lam) noexcept nogil:
    cdef Py_ssize_t i
    cdef double z, acc = 0.0
    for i in range(n_fin):
        z = lam * Z[i]
        acc += w[i] * z / (1.0 + z)
    return acc + w_flag


cdef double _sum_log1p(const double[::1] Z, Py_ssize_t lo, Py_ssize_t hi, double lam) noexcept nogil:
    # sum log(1 + lam Z[i]) as the log of a running product (one log per
    # overflow guard instead of one per term); absolute error ~ (hi - lo) ulp
    cdef Py_ssize_t i
    cdef int e
    cdef long expo = 0
    cdef double z, prod = 1.0, acc = 0.0
    for i in range(lo, hi):
        z = 1.0 + lam * Z[i]
        if z > 1e100:
            acc += log(z)
            continue
        prod *= z
        if prod > 1e200:
            prod = frexp(prod, &e)
            expo += e
    return acc + log(prod) + expo * M_LN2


cdef double _g_direct(const double[::1] Z, Py_ssize_t n_fin, double a, double lam) noexcept nogil:
    cdef Py_ssize_t n = Z.shape[0]
    cdef double acc = _sum_log1p(Z, 0, n_fin, lam)
    if n > n_fin:
        acc += (n - n_fin) * log(lam)
    return a + acc


cdef void _band(const double[::1] Z, Py_ssize_t n_fin, double lam, double c,
                Py_ssize_t* m1, Py_ssize_t* m2) noexcept nogil:
    # first index with Z >= c/lam, first index with Z > 1/(c lam)
    cdef Py_ssize_t lo = 0, hi = n_fin, mid
    cdef double t1 = c / lam, t2 = 1.0 / (c * lam)
    while lo < hi:
        mid = (lo + hi) >> 1
        if Z[mid] < t1:
            lo = mid + 1
        else:
            hi = mid
    m1[0] = lo
    hi = n_fin
    while lo < hi:
        mid = (lo + hi) >> 1
        if Z[mid] <= t2:
            lo = mid + 1
        else:
            hi = mid
    m2[0] = lo


cdef double _f_fast(const double[::1] Z, const double[::1] w, Py_ssize_t n_fin,
                    const double[:, ::1] S, const double[:, ::1] T,
                    double lam, double c, int s) noexcept nogil:
    cdef Py_ssize_t m1, m2, i
    cdef int r
    cdef double z, acc = 0.0, p, sign, inv
    _band(Z, n_fin, lam, c, &m1, &m2)
    for i in range(m1, m2):
        z = lam * Z[i]
        acc += w[i] * z / (1.0 + z)
    p = 1.0
    sign = 1.0
    for r in range(1, s + 1):
        p *= lam
        acc += sign * p * S[m1, r - 1]
        sign = -sign
    inv = 1.0 / lam
    p = 1.0
    sign = 1.0
    for r in range(0, s + 1):
        acc += sign * p * T[m2, r]
        p *= inv
        sign = -sign
    return acc


cdef double _g_fast(const double[::1] Z, Py_ssize_t n_fin, const double[:, ::1] U,
                    const double[:, ::1] V, const double[::1] b, double a,
                    double lam, double c, int s) noexcept nogil:
    cdef Py_ssize_t m1, m2, i, n = Z.shape[0]
    cdef int r
    cdef double acc = 0.0, p, q, sign, inv
    _band(Z, n_fin, lam, c, &m1, &m2)
    acc = _sum_log1p(Z, m1, m2, lam)
    p = 1.0
    q = 1.0
    inv = 1.0 / lam
    sign = 1.0
    for r in range(1, s + 1):
        p *= lam
        q *= inv
        acc += sign / r * (p * U[m1, r - 1] + q * V[m2, r - 1])
        sign = -sign
    return a + b[m2] + (n - m2) * log(lam) + acc


def f_direct(const double[::1] Z, const double[::1] w, Py_ssize_t n_fin, double w_flag, double lam):
    return _f_direct(Z, w, n_fin, w_flag, lam)


def g_direct(const double[::1] Z, Py_ssize_t n_fin, double a, double lam):
    return _g_direct(Z, n_fin, a, lam)


def band(const double[::1] Z, Py_ssize_t n_fin, double lam, double c):
    cdef Py_ssize_t m1, m2
    _band(Z, n_fin, lam, c, &m1, &m2)
    return int(m1), int(m2)


def f_fast(const double[::1] Z, const double[::1] w, Py_ssize_t n_fin,
           const double[:, ::1] S, const double[:, ::1] T, double lam, double c, int s):
    return _f_fast(Z, w, n_fin, S, T, lam, c, s)


def g_fast(const double[::1] Z, Py_ssize_t n_fin, const double[:, ::1] U,
           const double[:, ::1] V, const double[::1] b, double a, double lam, double c, int s):
    return _g_fast(Z, n_fin, U, V, b, a, lam, c, s)


cdef inline double _log_target(double gamma, double delta, double f, double g, double ag,
                               double bg, double ad, double bd, double half_rank) noexcept nogil:
    return ((half_rank + ad - 1.0) * log(delta) - 0.5 * g - 0.5 * gamma * f
            + (ag - 1.0) * log(gamma) - bg * gamma - bd * delta)


cdef inline double _log_phi(double phi, double r, double f, double g, double ag, double bg,
                            double ad, double bd, double half_rank) noexcept nogil:
    cdef double cp = cos(phi), sp = sin(phi)
    return ((ag - 1.0) * log(cp) + (half_rank + ad - 1.0) * log(sp) - 0.5 * g
            - 0.5 * r * cp * f - bg * r * cp - bd * r * sp)


def mtc1_chain(const double[::1] Z, const double[::1] w, Py_ssize_t n_fin, double w_flag,
               double a, params, double gamma0, double delta0, double wg, double wd,
               const double[:, ::1] normals, const double[::1] logu):
    cdef double ag = params[0], bg = params[1], ad = params[2], bd = params[3]
    cdef double half_rank = params[4]
    cdef Py_ssize_t N = logu.shape[0], k
    gam_a = np.empty(N + 1)
    dlt_a = np.empty(N + 1)
    acc_a = np.zeros(N + 1, dtype=np.uint8)
    logp_a = np.empty(N + 1)
    cdef double[::1] gam = gam_a, dlt = dlt_a, logp = logp_a
    cdef unsigned char[::1] acc = acc_a
    cdef double gc = gamma0, dc = delta0, gp, dp, lam, lp, lpp
    with nogil:
        lam = dc / gc
        lp = _log_target(gc, dc, _f_direct(Z, w, n_fin, w_flag, lam), _g_direct(Z, n_fin, a, lam),
                         ag, bg, ad, bd, half_rank)
        gam[0] = gc
        dlt[0] = dc
        logp[0] = lp
        for k in range(N):
            gp = gc + wg * normals[k, 0]
            dp = dc + wd * normals[k, 1]
            if gp > 0.0 and dp > 0.0:
                lam = dp / gp
                lpp = _log_target(gp, dp, _f_direct(Z, w, n_fin, w_flag, lam),
                                  _g_direct(Z, n_fin, a, lam), ag, bg, ad, bd, half_rank)
                if logu[k] < lpp - lp:
                    gc = gp
                    dc = dp
                    lp = lpp
                    acc[k + 1] = 1
            gam[k + 1] = gc
            dlt[k + 1] = dc
            logp[k + 1] = lp
    return gam_a, dlt_a, acc_a, logp_a


def mtc2_chain(const double[::1] Z, const double[::1] w, Py_ssize_t n_fin, double a,
               const double[:, ::1] S, const double[:, ::1] T, const double[:, ::1] U,
               const double[:, ::1] V, const double[::1] b, double cf, double cg, int s,
               params, double gamma0, double delta0, double w2,
               const double[::1] stdgam, const double[::1] normals, const double[::1] logu):
    cdef double ag = params[0], bg = params[1], ad = params[2], bd = params[3]
    cdef double half_rank = params[4]
    cdef Py_ssize_t N = logu.shape[0], k
    gam_a = np.empty(N + 1)
    dlt_a = np.empty(N + 1)
    acc_a = np.zeros(N + 1, dtype=np.uint8)
    logp_a = np.empty(N + 1)
    cdef double[::1] gam = gam_a, dlt = dlt_a, logp = logp_a
    cdef unsigned char[::1] acc = acc_a
    cdef double gc = gamma0, dc = delta0, phi, lam, fc, gcur, cp, sp, rate, r, php, lamp
    cdef double fp, gp, diff, half_pi = 0.5 * M_PI
    with nogil:
        phi = atan2(dc, gc)
        lam = tan(phi)
        fc = _f_fast(Z, w, n_fin, S, T, lam, cf, s)
        gcur = _g_fast(Z, n_fin, U, V, b, a, lam, cg, s)
        gam[0] = gc
        dlt[0] = dc
        logp[0] = _log_target(gc, dc, fc, gcur, ag, bg, ad, bd, half_rank)
        for k in range(N):
            cp = cos(phi)
            sp = sin(phi)
            rate = 0.5 * cp * fc + bg * cp + bd * sp
            r = stdgam[k] / rate
            php = phi + w2 * normals[k]
            if php > 0.0 and php < half_pi:
                lamp = tan(php)
                fp = _f_fast(Z, w, n_fin, S, T, lamp, cf, s)
                gp = _g_fast(Z, n_fin, U, V, b, a, lamp, cg, s)
                diff = (_log_phi(php, r, fp, gp, ag, bg, ad, bd, half_rank)
                        - _log_phi(phi, r, fc, gcur, ag, bg, ad, bd, half_rank))
                if logu[k] < diff:
                    phi = php
                    fc = fp
                    gcur = gp
                    acc[k + 1] = 1
            gc = r * cos(phi)
            dc = r * sin(phi)
            gam[k + 1] = gc
            dlt[k + 1] = dc
            logp[k + 1] = _log_target(gc, dc, fc, gcur, ag, bg, ad, bd, half_rank)
    return gam_a, dlt_a, acc_a, logp_a
