# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled recursions for GARCH(1,1) filtering and bivariate cDCC correlation.

These are the hot loops of every Monte Carlo study in the package; the
pure-Python versions live in ``_ref.py`` and are interchangeable.
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport log, sqrt

cnp.import_array()


def garch_filter(double[::1] eps, double omega, double alpha, double beta,
                 double h0):
    """Variance recursion sigma2[t] = omega + alpha*eps[t-1]^2 + beta*sigma2[t-1].

    sigma2[0] = h0. Returns an array aligned with ``eps``.
    """
    cdef Py_ssize_t n = eps.shape[0]
    cdef cnp.ndarray[double, ndim=1] out = np.empty(n, dtype=np.float64)
    cdef double[::1] s = out
    cdef Py_ssize_t t
    cdef double prev = h0
    s[0] = h0
    for t in range(1, n):
        prev = omega + alpha * eps[t - 1] * eps[t - 1] + beta * prev
        s[t] = prev
    return out


def garch_filter_derivs(double[::1] eps, double omega, double alpha,
                        double beta, double h0, double[::1] d0):
    """Variance recursion together with d(sigma2)/d(omega, alpha, beta).

    d0 holds the derivative of the initial variance with respect to theta
    (zero for initial-value rules that do not depend on theta).
    Returns (sigma2, dsigma2) with dsigma2 of shape (n, 3).
    """
    cdef Py_ssize_t n = eps.shape[0]
    cdef cnp.ndarray[double, ndim=1] out = np.empty(n, dtype=np.float64)
    cdef cnp.ndarray[double, ndim=2] dout = np.empty((n, 3), dtype=np.float64)
    cdef double[::1] s = out
    cdef double[:, ::1] d = dout
    cdef Py_ssize_t t
    cdef double prev = h0, e2
    cdef double dw = d0[0], da = d0[1], db = d0[2]
    s[0] = h0
    d[0, 0] = dw
    d[0, 1] = da
    d[0, 2] = db
    for t in range(1, n):
        e2 = eps[t - 1] * eps[t - 1]
        dw = 1.0 + beta * dw
        da = e2 + beta * da
        db = prev + beta * db
        prev = omega + alpha * e2 + beta * prev
        s[t] = prev
        d[t, 0] = dw
        d[t, 1] = da
        d[t, 2] = db
    return out, dout


def cdcc_corr_filter(double[::1] e1, double[::1] e2, double s12,
                     double a, double b):
    """Bivariate cDCC correlation recursion on margin-standardized residuals.

    Q_t = (1-a-b) S + a Q*_{t-1}^{1/2} eta*_{t-1} eta*_{t-1}' Q*_{t-1}^{1/2}
          + b Q_{t-1},   Q_0 = S.

    Returns (rho, nll) where rho[t] is the conditional correlation and nll
    is the Gaussian correlation-part negative log-likelihood
    sum_t [log(1 - rho_t^2) + (e1^2 + e2^2 - 2 rho e1 e2)/(1 - rho_t^2)].
    """
    cdef Py_ssize_t n = e1.shape[0]
    cdef cnp.ndarray[double, ndim=1] out = np.empty(n, dtype=np.float64)
    cdef double[::1] r = out
    cdef Py_ssize_t t
    cdef double q11 = 1.0, q22 = 1.0, q12 = s12
    cdef double rho, omr2, nll = 0.0, c = 1.0 - a - b
    cdef double x1, x2
    rho = q12 / sqrt(q11 * q22)
    r[0] = rho
    omr2 = 1.0 - rho * rho
    x1 = e1[0]
    x2 = e2[0]
    nll += log(omr2) + (x1 * x1 + x2 * x2 - 2.0 * rho * x1 * x2) / omr2
    for t in range(1, n):
        x1 = e1[t - 1]
        x2 = e2[t - 1]
        q12 = c * s12 + a * sqrt(q11 * q22) * x1 * x2 + b * q12
        q11 = c + a * q11 * x1 * x1 + b * q11
        q22 = c + a * q22 * x2 * x2 + b * q22
        rho = q12 / sqrt(q11 * q22)
        if rho >= 0.9999:
            rho = 0.9999
        elif rho <= -0.9999:
            rho = -0.9999
        r[t] = rho
        omr2 = 1.0 - rho * rho
        x1 = e1[t]
        x2 = e2[t]
        nll += log(omr2) + (x1 * x1 + x2 * x2 - 2.0 * rho * x1 * x2) / omr2
    return out, nll
