import numpy as np
import pytest
from scipy.stats import norm

from vhsvar.errors import ValidationError
from vhsvar.portfolio import RebalancedEvery, Static
from vhsvar.vhs import (
    naive_empirical_var,
    naive_garch_var,
    naive_empirical_var as _nev,
    vhs_var,
)

from conftest import make_prices


def _panel(n=900, m=2, seed=21, scale=0.01):
    rng = np.random.default_rng(seed)
    y = scale * rng.standard_normal((n, m))
    prices = 100.0 * np.exp(np.vstack([np.zeros(m), np.cumsum(y, axis=0)]))
    return make_prices(prices)


# --------------------------------------------------------------------------
# naive empirical quantile


def test_naive_empirical_small_oracle():
    # 100 points 0.01..1.00; rank ceil(100*0.05)=5 -> quantile 0.05, VaR -0.05
    r = np.arange(1, 101) / 100.0
    est = naive_empirical_var(r, 0.05)
    assert np.isclose(est.value, -0.05)
    assert est.method == "NaiveEmpirical"


def test_naive_empirical_sign_convention():
    # mostly negative returns: the lower quantile is negative, VaR positive
    r = np.concatenate([-np.arange(1, 51) / 100.0, np.arange(1, 51) / 100.0])
    est = naive_empirical_var(r, 0.05)
    assert est.value > 0
    assert np.isclose(est.value, 0.46)  # rank 5 of sorted series is -0.46


def test_naive_empirical_gaussian_limit():
    r = np.random.default_rng(22).standard_normal(500_000)
    est = naive_empirical_var(r, 0.05)
    assert abs(est.value - (-norm.ppf(0.05))) < 0.01


def test_naive_empirical_min_window():
    with pytest.raises(ValidationError):
        naive_empirical_var(np.zeros(50), 0.05)


# --------------------------------------------------------------------------
# VHS vs the naive GARCH baseline


def test_static_policy_vhs_equals_naive_garch():
    p = _panel()
    pol = Static(np.array([0.4, 0.6]))
    a = vhs_var(p, pol, 0.05)
    b = naive_garch_var(p, pol, 0.05)
    assert np.isclose(a.value, b.value, rtol=1e-10)
    assert a.method == "VHS" and b.method == "NaiveGarch"


def test_daily_equal_rebalance_matches_static():
    p = _panel(seed=23)
    w = np.array([0.5, 0.5])
    a = vhs_var(p, RebalancedEvery(1, w), 0.05)
    b = vhs_var(p, Static(w), 0.05)
    assert np.isclose(a.value, b.value, rtol=1e-10)


def test_vhs_iid_close_to_empirical_quantile():
    # iid returns: the GARCH layer should be nearly flat, so VHS ~ the
    # empirical quantile of the virtual returns
    rng = np.random.default_rng(24)
    n, m = 4000, 2
    y = 0.01 * rng.standard_normal((n, m))
    p = make_prices(100.0 * np.exp(np.vstack([np.zeros(m), np.cumsum(y, axis=0)])))
    w = np.array([0.5, 0.5])
    est = vhs_var(p, Static(w), 0.05)
    virt = y @ w
    emp = -np.sort(virt)[int(np.ceil(n * 0.05)) - 1]
    assert np.isclose(est.value, emp, rtol=0.05)


def test_vhs_estimate_decomposition():
    p = _panel(seed=25)
    est = vhs_var(p, Static(np.array([0.3, 0.7])), 0.05)
    assert np.isclose(est.value, -est.sigma_next * est.xi, rtol=1e-12)
    assert est.xi < 0 and est.sigma_next > 0 and est.value > 0


# --------------------------------------------------------------------------
# windows and validation


def test_rolling_window_requires_length():
    p = _panel()
    with pytest.raises(ValidationError, match="length"):
        vhs_var(p, Static(np.array([0.5, 0.5])), 0.05, window="rolling")


def test_window_too_short_rejected():
    p = _panel(n=300)
    with pytest.raises(ValidationError, match="shorter"):
        vhs_var(p, Static(np.array([0.5, 0.5])), 0.05, t0=200)


def test_unknown_window_mode():
    p = _panel()
    with pytest.raises(ValidationError, match="window"):
        vhs_var(p, Static(np.array([0.5, 0.5])), 0.05, window="bogus")


def test_rolling_window_uses_recent_block():
    p = _panel(n=1200, seed=26)
    pol = Static(np.array([0.5, 0.5]))
    roll = vhs_var(p, pol, 0.05, window="rolling", rolling_length=400)
    expand = vhs_var(p, pol, 0.05)
    # both valid estimates of the same magnitude but from different samples
    assert roll.value > 0 and expand.value > 0
    assert roll.value != expand.value
