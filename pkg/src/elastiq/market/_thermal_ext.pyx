# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled thermal horizon solver; same algorithm and contract as ``_thermal_py``."""

import numpy as np
from libc.math cimport exp, log1p, fabs

DEF MAXK = 64


cdef inline void _deriv(double x, double pj, int j, int K, double* theta, double* apow,
                        double lamj, double dt, double g, double lo, double hi, double soft,
                        double c1, double c2, double e2, double* gout, double* hout) noexcept nogil:
    cdef double delta = x - pj, s1 = 0.0, s2 = 0.0
    cdef double th, z, e, sg1, sg2, sp1, sp2, d, d1, d2
    cdef int k, m
    for k in range(j, K):
        m = k - j
        th = theta[k + 1] - g * apow[m] * delta
        # one exp per softplus/sigmoid pair
        z = (th - hi) / soft
        e = exp(-fabs(z))
        sp1 = (z if z > 0.0 else 0.0) + log1p(e)
        sg1 = 1.0 / (1.0 + e) if z >= 0.0 else e / (1.0 + e)
        z = (lo - th) / soft
        e = exp(-fabs(z))
        sp2 = (z if z > 0.0 else 0.0) + log1p(e)
        sg2 = 1.0 / (1.0 + e) if z >= 0.0 else e / (1.0 + e)
        d = soft * (sp1 + sp2)
        d1 = sg1 - sg2
        d2 = (sg1 * (1.0 - sg1) + sg2 * (1.0 - sg2)) / soft
        s1 += apow[m] * d * d1
        s2 += apow[2 * m] * (d1 * d1 + d * d2)
    gout[0] = lamj * dt + e2 * x - c1 * s1
    hout[0] = c2 * s2 + e2


def solve_thermal(lam, theta_out, double theta0, double a, double g, double lo, double hi,
                  double soft, double weight, double dt, double pmax, p0,
                  double effort=0.0, double tol=1e-8, int max_sweeps=500):
    cdef double[::1] lv = np.ascontiguousarray(lam, dtype=np.float64)
    cdef double[::1] tov = np.ascontiguousarray(theta_out, dtype=np.float64)
    cdef double[::1] p0v = np.ascontiguousarray(p0, dtype=np.float64)
    cdef int K = lv.shape[0]
    if K > MAXK:
        raise ValueError(f"horizon {K} exceeds {MAXK}")
    out = np.empty(K)
    cdef double[::1] p = out
    cdef double theta[MAXK + 1]
    cdef double apow[2 * MAXK]
    cdef int j, jj, k, it, sweep, sweeps = 0
    cdef double c1 = 2.0 * weight * g, c2 = 2.0 * weight * g * g, e2 = 2.0 * effort * dt
    cdef double pj, x, xn, gx, hx, lo_b, hi_b, step, delta, max_change
    for j in range(K):
        x = p0v[j]
        p[j] = 0.0 if x < 0.0 else (pmax if x > pmax else x)
    apow[0] = 1.0
    for k in range(1, 2 * K):
        apow[k] = apow[k - 1] * a
    theta[0] = theta0
    for k in range(K):
        theta[k + 1] = a * theta[k] + (1.0 - a) * tov[k] - g * p[k]
    with nogil:
        for sweep in range(max_sweeps):
            sweeps = sweep + 1
            max_change = 0.0
            for jj in range(K):
                # alternate sweep direction
                j = jj
                pj = p[j]
                x = pj
                lo_b = 0.0
                hi_b = pmax
                for it in range(100):
                    _deriv(x, pj, j, K, theta, apow, lv[j], dt, g, lo, hi, soft, c1, c2, e2, &gx, &hx)
                    if gx >= 0.0 and x <= 0.0:
                        break
                    if gx <= 0.0 and x >= pmax:
                        break
                    if gx > 0.0:
                        hi_b = x
                    else:
                        lo_b = x
                    xn = x - gx / hx
                    if xn <= 0.0 and lo_b <= 0.0:
                        xn = 0.0
                    elif xn >= pmax and hi_b >= pmax:
                        xn = pmax
                    elif not (lo_b < xn and xn < hi_b):
                        xn = 0.5 * (lo_b + hi_b)
                    step = fabs(xn - x)
                    x = xn
                    if step <= 1e-3 * tol or hi_b - lo_b <= 1e-3 * tol:
                        break
                delta = x - pj
                if delta != 0.0:
                    for k in range(j, K):
                        theta[k + 1] -= g * apow[k - j] * delta
                    p[j] = x
                if fabs(delta) > max_change:
                    max_change = fabs(delta)
            if max_change < tol:
                break
    return out, sweeps
