import datetime as dt

import numpy as np
import pytest

from vhsvar.garch import GarchParams, simulate_garch11
from vhsvar.portfolio import PriceMatrix


@pytest.fixture(scope="session")
def garch_theta0():
    return GarchParams(1.0, 0.09, 0.87)


@pytest.fixture(scope="session")
def garch_series(garch_theta0):
    """A medium-length GARCH(1,1) path reused across tests."""
    return simulate_garch11(
        garch_theta0, 3000, rng=np.random.default_rng(20240817)
    )


def make_prices(arr, start=dt.date(2020, 1, 1)):
    arr = np.asarray(arr, dtype=np.float64)
    dates = tuple(start + dt.timedelta(days=i) for i in range(arr.shape[0]))
    return PriceMatrix(dates=dates, prices=arr)


@pytest.fixture()
def random_panel():
    rng = np.random.default_rng(5)
    y = 0.01 * rng.standard_normal((400, 3))
    prices = 100.0 * np.exp(np.vstack([np.zeros(3), np.cumsum(y, axis=0)]))
    return make_prices(prices)
