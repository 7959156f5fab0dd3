"""Reference thermal horizon solver (pure Python floats).

Minimises ``sum_k (lam_k p_k + q p_k^2) dt + w * sum_k d(theta_{k+1})^2`` over
``0 <= p_k <= pmax`` where ``theta_{k+1} = a theta_k + (1 - a) theta_out_k - g p_k``
and ``d`` is a softplus-smoothed distance to the comfort band ``[lo, hi]``.

Projected coordinate descent in forward sweeps.  Each
coordinate is minimised by a projected Newton iteration kept inside a sign
bracket of the derivative (bisection whenever Newton leaves it).
"""

from __future__ import annotations

import math

import numpy as np

INNER_ITERS = 100


def band_terms(theta: float, lo: float, hi: float, soft: float) -> tuple[float, float, float]:
    """Band distance ``d``, ``d'`` and ``d''`` at ``theta``."""
    z = (theta - hi) / soft
    e = math.exp(-abs(z))
    sp1 = max(z, 0.0) + math.log1p(e)
    sg1 = 1.0 / (1.0 + e) if z >= 0.0 else e / (1.0 + e)
    z = (lo - theta) / soft
    e = math.exp(-abs(z))
    sp2 = max(z, 0.0) + math.log1p(e)
    sg2 = 1.0 / (1.0 + e) if z >= 0.0 else e / (1.0 + e)
    d = soft * (sp1 + sp2)
    d1 = sg1 - sg2
    d2 = (sg1 * (1.0 - sg1) + sg2 * (1.0 - sg2)) / soft
    return d, d1, d2


def trajectory(p, theta0, theta_out, a, g) -> list[float]:
    K = len(p)
    theta = [0.0] * (K + 1)
    theta[0] = theta0
    for k in range(K):
        theta[k + 1] = a * theta[k] + (1.0 - a) * theta_out[k] - g * p[k]
    return theta


def objective(p, lam, theta0, theta_out, a, g, lo, hi, soft, weight, dt, effort=0.0) -> float:
    theta = trajectory(p, theta0, theta_out, a, g)
    cost = 0.0
    for k in range(len(p)):
        d = band_terms(theta[k + 1], lo, hi, soft)[0]
        cost += (lam[k] * p[k] + effort * p[k] * p[k]) * dt + weight * d * d
    return cost


def solve_thermal(
    lam, theta_out, theta0, a, g, lo, hi, soft, weight, dt, pmax, p0, effort=0.0, tol=1e-8, max_sweeps=500
):
    """Return ``(plan, sweeps)``; ``p0`` is the warm start, ``effort`` the quadratic cost ``q``."""
    lam = [float(v) for v in lam]
    theta_out = [float(v) for v in theta_out]
    K = len(lam)
    p = [min(max(float(v), 0.0), pmax) for v in p0]
    theta = trajectory(p, theta0, theta_out, a, g)
    apow = [a**m for m in range(2 * K)]
    c1 = 2.0 * weight * g
    c2 = 2.0 * weight * g * g
    e2 = 2.0 * effort * dt
    sweeps = 0
    for sweep in range(max_sweeps):
        sweeps = sweep + 1
        max_change = 0.0
        for jj in range(K):
            j = jj
            pj = p[j]

            def deriv(x):
                delta = x - pj
                s1 = 0.0
                s2 = 0.0
                for k in range(j, K):
                    m = k - j
                    d, d1, d2 = band_terms(theta[k + 1] - g * apow[m] * delta, lo, hi, soft)
                    s1 += apow[m] * d * d1
                    s2 += apow[2 * m] * (d1 * d1 + d * d2)
                return lam[j] * dt + e2 * x - c1 * s1, c2 * s2 + e2

            x = pj
            lo_b, hi_b = 0.0, pmax
            for _ in range(INNER_ITERS):
                gx, hx = deriv(x)
                if (gx >= 0.0 and x <= 0.0) or (gx <= 0.0 and x >= pmax):
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
                elif not lo_b < xn < hi_b:
                    xn = 0.5 * (lo_b + hi_b)
                step = abs(xn - x)
                x = xn
                if step <= 1e-3 * tol or hi_b - lo_b <= 1e-3 * tol:
                    break
            delta = x - pj
            if delta != 0.0:
                for k in range(j, K):
                    theta[k + 1] -= g * apow[k - j] * delta
                p[j] = x
            max_change = max(max_change, abs(delta))
        if max_change < tol:
            break
    return np.array(p), sweeps
