"""Conditional Value-at-Risk for dynamic portfolios via virtual returns.

The package freezes the current portfolio composition, replays history to
obtain virtual returns, fits a GARCH(1,1) by Gaussian QML and scales the
residual quantile by the one-step-ahead volatility.  Asymptotic
confidence intervals, multivariate baselines (spherical, filtered
historical simulation on a bivariate cDCC), backtesting statistics and
Monte Carlo study harnesses are included.
"""

from .errors import (
    DataError,
    DegeneratePortfolioError,
    FitError,
    UnsupportedFeatureError,
    ValidationError,
    VhsvarError,
)
from .garch import GarchFit, GarchParams, fit_qml, residual_quantile
from .inference import (
    SigmaAlpha,
    VarCI,
    sigma_alpha_from_fit,
    var_confidence_interval,
)
from .kernels import BACKEND
from .portfolio import (
    CompositionPath,
    Crystallized,
    MinVariance,
    PriceMatrix,
    RebalancedEvery,
    ReturnMatrix,
    Schedule,
    Static,
    compute_log_returns,
    evolve_composition,
    load_prices_csv,
    portfolio_returns,
    virtual_returns,
)
from .vhs import VarEstimate, naive_empirical_var, naive_garch_var, vhs_var

__version__ = "0.1.0"

__all__ = [
    "BACKEND",
    "CompositionPath",
    "Crystallized",
    "DataError",
    "DegeneratePortfolioError",
    "FitError",
    "GarchFit",
    "GarchParams",
    "MinVariance",
    "PriceMatrix",
    "RebalancedEvery",
    "ReturnMatrix",
    "Schedule",
    "SigmaAlpha",
    "Static",
    "UnsupportedFeatureError",
    "ValidationError",
    "VarCI",
    "VarEstimate",
    "VhsvarError",
    "compute_log_returns",
    "evolve_composition",
    "fit_qml",
    "load_prices_csv",
    "naive_empirical_var",
    "naive_garch_var",
    "portfolio_returns",
    "residual_quantile",
    "sigma_alpha_from_fit",
    "var_confidence_interval",
    "vhs_var",
    "virtual_returns",
]
