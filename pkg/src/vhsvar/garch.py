"""GARCH(1,1) filtering, Gaussian QML estimation and residual quantiles.

The variance recursion and its parameter derivatives run through the
compiled kernels (see ``vhsvar.kernels``); everything else is NumPy/SciPy.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize

from .errors import FitError, ValidationError
from .kernels import garch_filter, garch_filter_derivs

OMEGA_LOWER = 1e-8

# Deterministic multi-start grid for (alpha, beta); omega is variance-targeted.
_START_GRID = ((0.05, 0.90), (0.10, 0.80), (0.30, 0.40))


@dataclass(frozen=True)
class GarchParams:
    omega: float
    alpha: float
    beta: float

    def __post_init__(self):
        if not (self.omega >= OMEGA_LOWER):
            raise ValidationError(f"omega must be >= {OMEGA_LOWER}, got {self.omega}")
        if not (self.alpha > 0):
            raise ValidationError(f"alpha must be > 0, got {self.alpha}")
        if not (0 < self.beta < 1):
            raise ValidationError(f"beta must be in (0, 1), got {self.beta}")

    def as_array(self) -> np.ndarray:
        return np.array([self.omega, self.alpha, self.beta])


@dataclass(frozen=True)
class VolatilityPath:
    sigma2: np.ndarray
    init_sigma2: float


@dataclass(frozen=True)
class GarchFit:
    theta_hat: GarchParams
    sigma2_path: VolatilityPath
    residuals: np.ndarray
    d_paths: np.ndarray
    objective: float
    converged: bool
    iterations: int
    # one-step-ahead filtered variance and its theta-gradient
    sigma2_next: float
    dsigma2_next: np.ndarray
    series: np.ndarray
    init: "str | float" = "sample"

    @property
    def n(self) -> int:
        return self.series.shape[0]


def _init_variance(series: np.ndarray, omega, alpha, beta, init):
    """Initial variance and its derivative w.r.t. (omega, alpha, beta)."""
    if init == "sample":
        h0 = float(np.var(series))
        d0 = np.zeros(3)
    elif init == "stationary":
        denom = 1.0 - alpha - beta
        if denom <= 0:
            # fall back to targeting when the stationary variance is undefined
            h0 = float(np.var(series))
            d0 = np.zeros(3)
        else:
            h0 = omega / denom
            d0 = np.array([1.0 / denom, omega / denom**2, omega / denom**2])
    else:
        h0 = float(init)
        d0 = np.zeros(3)
        if h0 <= 0:
            raise ValidationError("fixed initial variance must be positive")
    return max(h0, OMEGA_LOWER), d0


def _init_for(series, theta: GarchParams, init):
    return _init_variance(series, theta.omega, theta.alpha, theta.beta, init)


def filter_volatility(series, theta: GarchParams, init="sample") -> VolatilityPath:
    """sigma2[0] = initial value; sigma2[t] = w + a*series[t-1]^2 + b*sigma2[t-1]."""
    series = np.ascontiguousarray(series, dtype=np.float64)
    if series.ndim != 1 or series.shape[0] < 2:
        raise ValidationError("need a 1-d series of length >= 2")
    if not np.all(np.isfinite(series)):
        raise ValidationError("series contains non-finite values")
    h0, _ = _init_for(series, theta, init)
    sigma2 = garch_filter(series, theta.omega, theta.alpha, theta.beta, h0)
    return VolatilityPath(sigma2=sigma2, init_sigma2=h0)


def qml_objective(series, theta: GarchParams, init="sample") -> float:
    """(1/n) sum eps_t^2/sigma_t^2 + log sigma_t^2."""
    series = np.ascontiguousarray(series, dtype=np.float64)
    path = filter_volatility(series, theta, init)
    s2 = path.sigma2
    return float(np.mean(series**2 / s2 + np.log(s2)))


def score_derivatives(series, theta: GarchParams, init="sample") -> np.ndarray:
    """D_t = (1 / (2 sigma_t^2)) d sigma_t^2 / d theta, shape (n, 3)."""
    series = np.ascontiguousarray(series, dtype=np.float64)
    h0, d0 = _init_for(series, theta, init)
    sigma2, dsig2 = garch_filter_derivs(
        series, theta.omega, theta.alpha, theta.beta, h0, d0
    )
    return dsig2 / (2.0 * sigma2[:, None])


def _value_and_grad(x, series, h0, d0):
    omega, alpha, beta = x
    sigma2, dsig2 = garch_filter_derivs(series, omega, alpha, beta, h0, d0)
    inv = 1.0 / sigma2
    ratio = series**2 * inv
    value = float(np.mean(ratio + np.log(sigma2)))
    grad = ((1.0 - ratio) * inv) @ dsig2 / series.shape[0]
    return value, grad


def default_bounds(series) -> np.ndarray:
    v = float(np.var(series))
    return np.array([[OMEGA_LOWER, 10.0 * v], [OMEGA_LOWER, 5.0], [OMEGA_LOWER, 0.9999]])


def fit_qml(
    series,
    bounds: np.ndarray | None = None,
    start: GarchParams | None = None,
    tol: float = 1e-9,
    init="sample",
) -> GarchFit:
    """Gaussian QML fit of a GARCH(1,1) on a (virtual) return series.

    Simplex search refined by projected quasi-Newton with the exact score.
    Non-convergence is reported through ``converged``, never retried
    silently.  Refuses samples shorter than 50.
    """
    series = np.ascontiguousarray(series, dtype=np.float64)
    if series.ndim != 1 or series.shape[0] < 50:
        raise ValidationError("fit_qml needs a 1-d series of length >= 50")
    if not np.all(np.isfinite(series)):
        raise ValidationError("series contains non-finite values")
    v = float(np.var(series))
    if v <= 0:
        raise FitError("series has zero variance; GARCH fit is degenerate")
    if bounds is None:
        bounds = default_bounds(series)
    bounds = np.asarray(bounds, dtype=np.float64)
    if bounds[0, 0] < OMEGA_LOWER or bounds[2, 1] >= 1.0:
        raise ValidationError("bounds must satisfy omega >= 1e-8 and beta < 1")

    if start is not None:
        starts = [start.as_array()]
    else:
        starts = [
            np.array([max(v * (1.0 - a - b), OMEGA_LOWER), a, b])
            for a, b in _START_GRID
        ]

    if init == "sample":
        h0_fixed, d0_fixed = _init_variance(series, 0.0, 0.0, 0.0, "sample")
    elif init == "stationary":
        h0_fixed = d0_fixed = None
    else:
        h0_fixed, d0_fixed = _init_variance(series, 0.0, 0.0, 0.0, init)

    def fg(x):
        if h0_fixed is not None:
            h0, d0 = h0_fixed, d0_fixed
        else:
            h0, d0 = _init_variance(series, x[0], x[1], x[2], init)
        return _value_and_grad(x, series, h0, d0)

    best = None
    total_iter = 0
    for x0 in starts:
        x0 = np.clip(x0, bounds[:, 0], bounds[:, 1])
        simplex = minimize(
            lambda x: fg(x)[0],
            x0,
            method="Nelder-Mead",
            bounds=[tuple(b) for b in bounds],
            options={"xatol": 1e-6, "fatol": 1e-10, "maxiter": 600},
        )
        polish = minimize(
            fg,
            simplex.x,
            jac=True,
            method="L-BFGS-B",
            bounds=[tuple(b) for b in bounds],
            options={"ftol": tol, "gtol": 1e-8, "maxiter": 200},
        )
        total_iter += simplex.nit + polish.nit
        cand = polish if polish.fun <= simplex.fun else simplex
        ok = bool(polish.success or simplex.success)
        if (
            best is None
            or cand.fun < best[0].fun - 1e-12
            or (abs(cand.fun - best[0].fun) <= 1e-12 and cand.x[1] < best[0].x[1])
        ):
            best = (cand, ok)

    result, converged = best
    omega, alpha, beta = np.clip(result.x, bounds[:, 0], bounds[:, 1])
    theta = GarchParams(float(omega), float(alpha), float(beta))
    h0, d0 = _init_for(series, theta, init)
    sigma2, dsig2 = garch_filter_derivs(series, omega, alpha, beta, h0, d0)
    residuals = series / np.sqrt(sigma2)
    d_paths = dsig2 / (2.0 * sigma2[:, None])
    # one more recursion step for the next-period variance and its gradient
    sigma2_next = omega + alpha * series[-1] ** 2 + beta * sigma2[-1]
    dsigma2_next = np.array([1.0, series[-1] ** 2, sigma2[-1]]) + beta * dsig2[-1]
    return GarchFit(
        theta_hat=theta,
        sigma2_path=VolatilityPath(sigma2=sigma2, init_sigma2=h0),
        residuals=residuals,
        d_paths=d_paths,
        objective=float(result.fun),
        converged=converged,
        iterations=int(total_iter),
        sigma2_next=float(sigma2_next),
        dsigma2_next=dsigma2_next,
        series=series,
        init=init,
    )


def simulate_garch11(
    theta: GarchParams,
    n: int,
    innovations=None,
    rng=None,
    burn_in: int = 500,
    return_sigma2: bool = False,
):
    """Simulate a GARCH(1,1) path driven by unit-variance innovations.

    ``innovations`` may supply the driving noise explicitly (length
    n + burn_in); otherwise standard normals are drawn from ``rng``.
    """
    total = n + burn_in
    if innovations is None:
        if rng is None:
            rng = np.random.default_rng()
        u = rng.standard_normal(total)
    else:
        u = np.asarray(innovations, dtype=np.float64)
        if u.shape[0] < total:
            raise ValidationError(
                f"need {total} innovations (n + burn_in), got {u.shape[0]}"
            )
        u = u[:total]
    omega, alpha, beta = theta.omega, theta.alpha, theta.beta
    denom = 1.0 - alpha - beta
    s2 = omega / denom if denom > 0 else omega
    eps = np.empty(total)
    sig2 = np.empty(total)
    for t in range(total):
        sig2[t] = s2
        eps[t] = math.sqrt(s2) * u[t]
        s2 = omega + alpha * eps[t] ** 2 + beta * s2
    if return_sigma2:
        return eps[burn_in:], sig2[burn_in:]
    return eps[burn_in:]


@dataclass(frozen=True)
class QuantileEstimate:
    xi: float
    rank: int


def residual_quantile(residuals, alpha: float) -> QuantileEstimate:
    """Ascending order statistic of rank ceil(n*alpha)."""
    residuals = np.asarray(residuals, dtype=np.float64)
    n = residuals.shape[0]
    if not (0 < alpha < 0.5):
        raise ValidationError(f"alpha must lie in (0, 0.5), got {alpha}")
    if n * alpha < 1:
        raise ValidationError(f"n*alpha = {n * alpha} < 1: sample too small")
    rank = math.ceil(n * alpha)
    xi = float(np.partition(residuals, rank - 1)[rank - 1])
    return QuantileEstimate(xi=xi, rank=rank)


@dataclass(frozen=True)
class Lemma2Report:
    """Runtime diagnostics for the GARCH(1,1) regularity conditions."""

    log_moment: float           # sample mean of log(alpha*u^2 + beta)
    strictly_stationary: bool   # log_moment < 0
    residual_variance: float
    non_degenerate: bool
    in_box: bool
    small_moment: float         # sample mean of |u|^0.1 as an existence proxy
    moments_finite: bool

    @property
    def all_ok(self) -> bool:
        return self.strictly_stationary and self.non_degenerate and self.in_box


def check_lemma2_conditions(theta: GarchParams, residuals) -> Lemma2Report:
    u = np.asarray(residuals, dtype=np.float64)
    log_moment = float(np.mean(np.log(theta.alpha * u**2 + theta.beta)))
    var_u2 = float(np.var(u**2))
    small = float(np.mean(np.abs(u) ** 0.1))
    in_box = theta.omega >= OMEGA_LOWER and theta.alpha > 0 and 0 < theta.beta < 1
    return Lemma2Report(
        log_moment=log_moment,
        strictly_stationary=log_moment < 0,
        residual_variance=var_u2,
        non_degenerate=var_u2 > 0,
        in_box=in_box,
        small_moment=small,
        moments_finite=np.isfinite(small),
    )
