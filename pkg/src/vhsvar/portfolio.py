"""Price panels, holdings policies and portfolio composition paths.

Conventions
-----------
A price panel has ``n`` dated rows and ``m`` assets.  Log-returns form an
``(n-1, m)`` grid whose row ``t`` covers the period from date ``t`` to
date ``t+1``.  A composition path has ``n`` rows; row ``t`` holds the
value weights settled at date ``t`` (measurable from prices up to ``t``),
so the portfolio return over returns-row ``t`` is ``comp[t] @ returns[t]``
and ``comp[-1]`` is the current composition used for next-period VaR.
"""

from __future__ import annotations

import csv
import datetime as _dt
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .errors import DataError, DegeneratePortfolioError, ValidationError

WEIGHT_SUM_TOL = 1e-10


@dataclass(frozen=True)
class PriceMatrix:
    """Dated panel of strictly positive asset prices."""

    dates: tuple
    prices: np.ndarray

    def __post_init__(self):
        prices = np.asarray(self.prices, dtype=np.float64)
        object.__setattr__(self, "prices", prices)
        object.__setattr__(self, "dates", tuple(self.dates))
        if prices.ndim != 2:
            raise DataError("prices must be a 2-d grid")
        n, m = prices.shape
        if n < 2 or m < 1:
            raise DataError(f"need at least 2 dates and 1 asset, got {n}x{m}")
        if len(self.dates) != n:
            raise DataError("dates length does not match price rows")
        if any(self.dates[i] >= self.dates[i + 1] for i in range(n - 1)):
            raise DataError("dates must be strictly increasing")
        bad = np.argwhere(~(prices > 0) | ~np.isfinite(prices))
        if bad.size:
            t, i = bad[0]
            raise DataError(
                f"non-positive price at date index {t}, asset {i}: "
                f"{prices[t, i]!r}"
            )

    @property
    def n_dates(self) -> int:
        return self.prices.shape[0]

    @property
    def n_assets(self) -> int:
        return self.prices.shape[1]


@dataclass(frozen=True)
class ReturnMatrix:
    """(n-1) x m grid of log-returns."""

    returns: np.ndarray

    def __post_init__(self):
        object.__setattr__(
            self, "returns", np.asarray(self.returns, dtype=np.float64)
        )
        if self.returns.ndim != 2:
            raise DataError("returns must be a 2-d grid")

    @property
    def n_assets(self) -> int:
        return self.returns.shape[1]


# --------------------------------------------------------------------------
# Holdings policies


@dataclass(frozen=True)
class Crystallized:
    """Fixed number of units per asset; weights drift with prices."""

    units: np.ndarray

    def __post_init__(self):
        units = np.asarray(self.units, dtype=np.float64)
        object.__setattr__(self, "units", units)
        if not np.all(units > 0):
            raise ValidationError("crystallized units must be strictly positive")


@dataclass(frozen=True)
class Static:
    """Fixed value weights at every date."""

    weights: np.ndarray

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=np.float64)
        object.__setattr__(self, "weights", w)
        if abs(w.sum() - 1.0) > 1e-12:
            raise ValidationError("static weights must sum to 1")


@dataclass(frozen=True)
class RebalancedEvery:
    """Units reset to value-proportional targets every ``period`` days.

    The reset happens at the end of day t = k*period using the prices of
    day t; between resets the units are frozen (crystallized drift).
    """

    period: int
    weights: np.ndarray

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=np.float64)
        object.__setattr__(self, "weights", w)
        if self.period < 1:
            raise ValidationError("rebalancing period must be >= 1")
        if abs(w.sum() - 1.0) > 1e-12:
            raise ValidationError("rebalancing target weights must sum to 1")


@dataclass(frozen=True)
class MinVariance:
    """Weights Sigma_t^-2 e / e' Sigma_t^-2 e.

    ``cov_supplier(t)`` must return the conditional covariance for date t
    using information up to t only.  Without a supplier, a rolling sample
    covariance of the trailing ``window`` return rows is used.
    """

    cov_supplier: Callable[[int], np.ndarray] | None = None
    window: int = 250


@dataclass(frozen=True)
class Schedule:
    """Explicit per-date unit vectors (n x m)."""

    units: np.ndarray

    def __post_init__(self):
        units = np.asarray(self.units, dtype=np.float64)
        object.__setattr__(self, "units", units)
        if not np.all(units > 0):
            raise ValidationError("scheduled units must be strictly positive")


HoldingsPolicy = Crystallized | Static | RebalancedEvery | MinVariance | Schedule


@dataclass(frozen=True)
class CompositionPath:
    """n x m grid of value weights, each row summing to one."""

    weights: np.ndarray

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=np.float64)
        object.__setattr__(self, "weights", w)
        sums = w.sum(axis=1)
        if not np.all(np.abs(sums - 1.0) <= WEIGHT_SUM_TOL):
            t = int(np.argmax(np.abs(sums - 1.0)))
            raise DegeneratePortfolioError(
                f"composition row {t} sums to {sums[t]!r}, not 1"
            )


@dataclass(frozen=True)
class VirtualReturnSeries:
    """Returns of the portfolio frozen at composition ``x``."""

    x: np.ndarray
    values: np.ndarray


# --------------------------------------------------------------------------
# Operations


def compute_log_returns(prices: PriceMatrix) -> ReturnMatrix:
    """Row t holds log(p[t+1] / p[t]) elementwise."""
    p = prices.prices
    return ReturnMatrix(np.log(p[1:]) - np.log(p[:-1]))


def _weights_from_units(units: np.ndarray, prices_row: np.ndarray) -> np.ndarray:
    values = units * prices_row
    total = values.sum()
    if total <= 0:
        raise DegeneratePortfolioError("total portfolio value is zero")
    return values / total


def min_variance_weights(sigma: np.ndarray) -> np.ndarray:
    """Weights Sigma^-2 e / e' Sigma^-2 e, with Sigma^2 = Sigma Sigma'."""
    sigma = np.asarray(sigma, dtype=np.float64)
    m = sigma.shape[0]
    e = np.ones(m)
    try:
        w = np.linalg.solve(sigma @ sigma.T, e)
    except np.linalg.LinAlgError as exc:
        raise DegeneratePortfolioError("singular covariance matrix") from exc
    return w / w.sum()


def evolve_composition(
    prices: PriceMatrix, policy: HoldingsPolicy
) -> CompositionPath:
    """Evolve value weights under a holdings policy, one row per date."""
    p = prices.prices
    n, m = p.shape
    w = np.empty((n, m))

    if isinstance(policy, Static):
        if policy.weights.shape != (m,):
            raise ValidationError("static weights do not match asset count")
        w[:] = policy.weights
    elif isinstance(policy, Crystallized):
        if policy.units.shape != (m,):
            raise ValidationError("crystallized units do not match asset count")
        for t in range(n):
            w[t] = _weights_from_units(policy.units, p[t])
    elif isinstance(policy, Schedule):
        if policy.units.shape != (n, m):
            raise ValidationError("schedule must provide one unit vector per date")
        for t in range(n):
            w[t] = _weights_from_units(policy.units[t], p[t])
    elif isinstance(policy, RebalancedEvery):
        if policy.weights.shape != (m,):
            raise ValidationError("target weights do not match asset count")
        units = policy.weights / p[0]  # V_0 normalized to 1
        for t in range(n):
            if t > 0 and t % policy.period == 0:
                value = float(units @ p[t])
                if value <= 0:
                    raise DegeneratePortfolioError(
                        "total portfolio value is zero"
                    )
                units = value * policy.weights / p[t]
            w[t] = _weights_from_units(units, p[t])
    elif isinstance(policy, MinVariance):
        rets = np.log(p[1:]) - np.log(p[:-1])
        for t in range(n):
            sigma = None
            if policy.cov_supplier is not None:
                sigma = policy.cov_supplier(t)
            elif t >= 2:
                lo = max(0, t - policy.window)
                block = rets[lo:t]
                if block.shape[0] >= 2:
                    cov = np.cov(block, rowvar=False).reshape(m, m)
                    if np.linalg.matrix_rank(cov) == m:
                        sigma = np.linalg.cholesky(cov)
            if sigma is None:
                w[t] = np.full(m, 1.0 / m)
            else:
                w[t] = min_variance_weights(np.asarray(sigma))
    else:
        raise ValidationError(f"unknown holdings policy {policy!r}")
    return CompositionPath(w)


def portfolio_returns(
    returns: ReturnMatrix,
    comp: CompositionPath,
    exact: bool = False,
) -> np.ndarray:
    """Per-period portfolio return r_t = a_{t-1} . y_t.

    With ``exact=True`` the simple-return identity sum a*exp(y) - 1 is
    used instead of the linearization (diagnostic only: all estimators in
    the package are defined on the linearized return).
    """
    y = returns.returns
    a = comp.weights
    if a.shape[0] != y.shape[0] + 1 or a.shape[1] != y.shape[1]:
        raise DataError(
            f"composition shape {a.shape} does not align with returns "
            f"shape {y.shape}"
        )
    if exact:
        return np.sum(a[:-1] * np.exp(y), axis=1) - 1.0
    return np.sum(a[:-1] * y, axis=1)


def virtual_returns(returns: ReturnMatrix, x: np.ndarray) -> VirtualReturnSeries:
    """Series x . y_t obtained by freezing the composition at ``x``."""
    x = np.asarray(x, dtype=np.float64)
    y = returns.returns
    if x.shape != (y.shape[1],):
        raise DataError(
            f"composition vector of length {x.shape} does not match "
            f"{y.shape[1]} assets"
        )
    if not np.all(np.isfinite(x)):
        raise DataError("composition vector has non-finite entries")
    return VirtualReturnSeries(x=x, values=y @ x)


def concentration_path(comp: CompositionPath) -> np.ndarray:
    """Per-date maximum weight, max_i a_{i,t}."""
    return comp.weights.max(axis=1)


# --------------------------------------------------------------------------
# CSV schema: first column ISO-8601 date, remaining columns asset prices.


def load_prices_csv(path) -> PriceMatrix:
    """Strict CSV ingestion; rejects missing cells, unsorted or bad dates."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DataError(f"{path}: empty file") from None
        if len(header) < 2:
            raise DataError(f"{path}: need a date column and at least one asset")
        names = header[1:]
        dates: list[_dt.date] = []
        rows: list[list[float]] = []
        for lineno, row in enumerate(reader, start=2):
            if len(row) != len(header):
                raise DataError(f"{path}:{lineno}: expected {len(header)} cells")
            try:
                dates.append(_dt.date.fromisoformat(row[0]))
            except ValueError:
                raise DataError(
                    f"{path}:{lineno}: bad ISO-8601 date {row[0]!r}"
                ) from None
            try:
                rows.append([float(cell) for cell in row[1:]])
            except ValueError:
                raise DataError(f"{path}:{lineno}: non-numeric price cell") from None
    matrix = PriceMatrix(dates=tuple(dates), prices=np.array(rows))
    matrix = _with_asset_names(matrix, names)
    return matrix


def _with_asset_names(matrix: PriceMatrix, names: Sequence[str]) -> PriceMatrix:
    object.__setattr__(matrix, "asset_names", tuple(names))
    return matrix


def asset_names(matrix: PriceMatrix) -> tuple:
    return getattr(
        matrix, "asset_names",
        tuple(f"asset{i + 1}" for i in range(matrix.n_assets)),
    )


def save_prices_csv(path, matrix: PriceMatrix) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["date", *asset_names(matrix)])
        for date, row in zip(matrix.dates, matrix.prices):
            writer.writerow([date.isoformat(), *[repr(float(v)) for v in row]])
