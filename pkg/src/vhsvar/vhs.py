"""Point estimators of the hybrid VaR: VHS and the naive baselines."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ValidationError
from .garch import GarchFit, GarchParams, fit_qml, residual_quantile
from .portfolio import (
    CompositionPath,
    HoldingsPolicy,
    PriceMatrix,
    compute_log_returns,
    evolve_composition,
    portfolio_returns,
    virtual_returns,
)

DEFAULT_MIN_WINDOW = 250


@dataclass(frozen=True)
class VarEstimate:
    """Positive-oriented VaR point estimate (negated return quantile)."""

    value: float
    method: str
    t0: int
    alpha: float
    fit: GarchFit | None = None
    xi: float | None = None
    sigma_next: float | None = None


def _window(t0: int, n_returns: int, window: str, rolling_length, min_window: int):
    if not 0 < t0 <= n_returns:
        raise ValidationError(f"t0={t0} outside the available return range")
    if window == "expanding":
        lo = 0
    elif window == "rolling":
        if not rolling_length:
            raise ValidationError("rolling window requires a length")
        lo = max(0, t0 - int(rolling_length))
    else:
        raise ValidationError(f"unknown window mode {window!r}")
    if t0 - lo < min_window:
        raise ValidationError(
            f"estimation window [{lo}, {t0}) shorter than {min_window}"
        )
    return lo


def _garch_quantile_var(
    series: np.ndarray,
    alpha: float,
    method: str,
    t0: int,
    start: GarchParams | None,
) -> VarEstimate:
    fit = fit_qml(series, start=start)
    xi = residual_quantile(fit.residuals, alpha).xi
    sigma_next = math.sqrt(fit.sigma2_next)
    return VarEstimate(
        value=-sigma_next * xi,
        method=method,
        t0=t0,
        alpha=alpha,
        fit=fit,
        xi=xi,
        sigma_next=sigma_next,
    )


def vhs_var_from_returns(
    returns,
    comp: CompositionPath,
    alpha: float,
    t0: int,
    window: str = "expanding",
    rolling_length: int | None = None,
    min_window: int = DEFAULT_MIN_WINDOW,
    start: GarchParams | None = None,
) -> VarEstimate:
    """VHS estimator on a precomputed return grid and composition path.

    ``t0`` indexes the target return row; the estimation window covers
    return rows [lo, t0).  Steps: freeze the composition at x = a_{t0-1},
    build virtual returns, fit the GARCH by QML, scale the residual
    quantile by the one-step-ahead volatility.
    """
    lo = _window(t0, returns.returns.shape[0] + 1, window, rolling_length, min_window)
    x = comp.weights[t0]
    virtual = virtual_returns(returns, x).values[lo:t0]
    return _garch_quantile_var(virtual, alpha, "VHS", t0, start)


def vhs_var(
    prices: PriceMatrix,
    policy: HoldingsPolicy,
    alpha: float,
    t0: int | None = None,
    **kwargs,
) -> VarEstimate:
    """End-to-end VHS VaR from a price panel and a holdings policy."""
    returns = compute_log_returns(prices)
    comp = evolve_composition(prices, policy)
    if t0 is None:
        t0 = returns.returns.shape[0]
    return vhs_var_from_returns(returns, comp, alpha, t0, **kwargs)


def naive_garch_var_from_returns(
    returns,
    comp: CompositionPath,
    alpha: float,
    t0: int,
    window: str = "expanding",
    rolling_length: int | None = None,
    min_window: int = DEFAULT_MIN_WINDOW,
    start: GarchParams | None = None,
) -> VarEstimate:
    """GARCH fit on the observed (time-varying composition) returns."""
    lo = _window(t0, returns.returns.shape[0] + 1, window, rolling_length, min_window)
    observed = portfolio_returns(returns, comp)[lo:t0]
    return _garch_quantile_var(observed, alpha, "NaiveGarch", t0, start)


def naive_garch_var(
    prices: PriceMatrix,
    policy: HoldingsPolicy,
    alpha: float,
    t0: int | None = None,
    **kwargs,
) -> VarEstimate:
    returns = compute_log_returns(prices)
    comp = evolve_composition(prices, policy)
    if t0 is None:
        t0 = returns.returns.shape[0]
    return naive_garch_var_from_returns(returns, comp, alpha, t0, **kwargs)


def naive_empirical_var(
    r: np.ndarray, alpha: float, t0: int | None = None, min_window: int = 100
) -> VarEstimate:
    """Negated empirical quantile of the observed portfolio returns."""
    r = np.asarray(r, dtype=np.float64)
    if t0 is None:
        t0 = r.shape[0]
    if t0 < min_window:
        raise ValidationError(
            f"naive empirical VaR needs at least {min_window} observations"
        )
    q = residual_quantile(r[:t0], alpha)
    return VarEstimate(
        value=-q.xi, method="NaiveEmpirical", t0=t0, alpha=alpha, xi=q.xi
    )
