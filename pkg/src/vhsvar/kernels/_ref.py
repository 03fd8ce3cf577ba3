"""Pure NumPy/SciPy implementations of the hot recursions.

Selected at import time when the compiled extension is unavailable or
when ``VHSVAR_PURE_PYTHON=1``.  The GARCH recursions are expressed as
linear IIR filters; the cDCC recursion is a plain loop.
"""

import math

import numpy as np
from scipy.signal import lfilter


def garch_filter(eps, omega, alpha, beta, h0):
    eps = np.asarray(eps, dtype=np.float64)
    n = eps.shape[0]
    # sigma2[t] = x[t] + beta*sigma2[t-1] with x[t] = omega + alpha*eps[t-1]^2
    x = omega + alpha * eps[: n - 1] ** 2
    tail, _ = lfilter([1.0], [1.0, -beta], x, zi=np.array([beta * h0]))
    return np.concatenate(([h0], tail))


def garch_filter_derivs(eps, omega, alpha, beta, h0, d0):
    eps = np.asarray(eps, dtype=np.float64)
    n = eps.shape[0]
    sigma2 = garch_filter(eps, omega, alpha, beta, h0)
    d = np.empty((n, 3))
    d[0] = d0
    a_poly = [1.0, -beta]
    ones = np.ones(n - 1)
    d[1:, 0], _ = lfilter([1.0], a_poly, ones, zi=np.array([beta * d0[0]]))
    d[1:, 1], _ = lfilter([1.0], a_poly, eps[: n - 1] ** 2,
                          zi=np.array([beta * d0[1]]))
    d[1:, 2], _ = lfilter([1.0], a_poly, sigma2[: n - 1],
                          zi=np.array([beta * d0[2]]))
    return sigma2, d


def cdcc_corr_filter(e1, e2, s12, a, b):
    e1 = np.asarray(e1, dtype=np.float64)
    e2 = np.asarray(e2, dtype=np.float64)
    n = e1.shape[0]
    rho_path = np.empty(n)
    q11 = q22 = 1.0
    q12 = s12
    c = 1.0 - a - b
    nll = 0.0
    rho = q12 / math.sqrt(q11 * q22)
    rho_path[0] = rho
    omr2 = 1.0 - rho * rho
    nll += math.log(omr2) + (e1[0] ** 2 + e2[0] ** 2
                             - 2.0 * rho * e1[0] * e2[0]) / omr2
    for t in range(1, n):
        x1 = e1[t - 1]
        x2 = e2[t - 1]
        q12 = c * s12 + a * math.sqrt(q11 * q22) * x1 * x2 + b * q12
        q11 = c + a * q11 * x1 * x1 + b * q11
        q22 = c + a * q22 * x2 * x2 + b * q22
        rho = min(max(q12 / math.sqrt(q11 * q22), -0.9999), 0.9999)
        rho_path[t] = rho
        omr2 = 1.0 - rho * rho
        x1 = e1[t]
        x2 = e2[t]
        nll += math.log(omr2) + (x1 * x1 + x2 * x2
                                 - 2.0 * rho * x1 * x2) / omr2
    return rho_path, nll
