import numpy as np
import pytest

from vhsvar.errors import UnsupportedFeatureError, ValidationError
from vhsvar.experiments import (
    DesignSpec,
    alternating_weights,
    run_design,
    run_factor_backtest,
    run_static_crystallized,
)


# --------------------------------------------------------------------------
# configuration


def test_design_spec_validation():
    with pytest.raises(ValidationError):
        DesignSpec("Z")
    with pytest.raises(ValidationError):
        DesignSpec("A", n1=100)
    with pytest.raises(ValidationError):
        DesignSpec("A", n_reps=0)
    with pytest.raises(ValidationError):
        DesignSpec("A", alphas=(0.6,))
    with pytest.raises(UnsupportedFeatureError):
        DesignSpec("A*")


def test_design_spec_full_warns():
    with pytest.warns(UserWarning, match="runtime"):
        spec = DesignSpec.full("A")
    assert spec.n_reps == 100 and spec.n_predictions == 1000


def test_desk_scale_defaults():
    spec = DesignSpec.desk("C", seed=7)
    assert spec.n_reps == 20 and spec.n1 == 500 and spec.seed == 7


# --------------------------------------------------------------------------
# alternating composition


def test_alternating_weights_block_pattern():
    w = alternating_weights(250, 4, 100)
    # first block: assets 2 and 4 (columns 1, 3)
    assert np.allclose(w[0], [0.0, 0.5, 0.0, 0.5])
    assert np.allclose(w[99], [0.0, 0.5, 0.0, 0.5])
    # second block: assets 1 and 3 (columns 0, 2)
    assert np.allclose(w[100], [0.5, 0.0, 0.5, 0.0])
    assert np.allclose(w[200], [0.0, 0.5, 0.0, 0.5])
    assert np.allclose(w.sum(axis=1), 1.0)


def test_alternating_weights_odd_asset_count():
    w = alternating_weights(10, 5, 100)
    # 1-based even assets are columns 1, 3; odd assets 0, 2, 4
    assert np.allclose(w[0], [0.0, 0.5, 0.0, 0.5, 0.0])


# --------------------------------------------------------------------------
# design study


def test_run_design_smoke_and_determinism():
    spec = DesignSpec("C", n_reps=2, n_predictions=20, alphas=(0.05,))
    a = run_design(spec)
    b = run_design(spec)
    assert a.mse == b.mse
    assert a.n_reps_used == 2 and a.n_failures == 0
    for method, mse in a.mse[0.05].items():
        assert mse > 0
        assert np.isclose(mse, a.traces[0.05][method].mean(), rtol=1e-12)
    assert set(a.ratios[0.05]) == {"fhs_over_s", "vhs_over_s"}
    assert a.metadata["params_refit"] == "held fixed after the estimation window"


# --------------------------------------------------------------------------
# factor backtest


def test_factor_backtest_unsupported_multivariate_m():
    with pytest.raises(UnsupportedFeatureError, match="at most 8"):
        run_factor_backtest(100, methods=("spherical",))
    with pytest.raises(UnsupportedFeatureError, match="m=2"):
        run_factor_backtest(4, methods=("fhs",))
    with pytest.raises(ValidationError):
        run_factor_backtest(2, methods=("bogus",))


def test_factor_backtest_univariate_large_m():
    reports, traces = run_factor_backtest(
        100, window=300, horizon=20, methods=("naive-garch", "vhs"), seed=1
    )
    assert {r.method for r in reports} == {"Naive", "VHS"}
    for r in reports:
        assert 0.0 <= r.viol_pct <= 100.0
    vhs = next(r for r in reports if r.method == "VHS")
    assert vhs.dm_p is not None
    assert traces["var"]["vhs"].shape == (20,)
    assert traces["metadata"]["m"] == 100


def test_factor_backtest_deterministic():
    kwargs = dict(window=300, horizon=10, methods=("vhs",), seed=3)
    _, t1 = run_factor_backtest(10, **kwargs)
    _, t2 = run_factor_backtest(10, **kwargs)
    assert np.array_equal(t1["var"]["vhs"], t2["var"]["vhs"])


# --------------------------------------------------------------------------
# static crystallized illustration


def test_static_crystallized_shapes_and_fhs_vhs_identity():
    out = run_static_crystallized(seed=2, n=400, start=100)
    assert out.weights.shape == (401, 3)
    assert out.returns.shape == out.true_var.shape == (400,)
    assert np.array_equal(out.fhs, out.vhs, equal_nan=True)  # constant-volatility identity
    assert np.all(np.isnan(out.naive[:100]))
    assert np.all(np.isfinite(out.naive[100:]))
    assert np.all(out.true_var > 0)


def test_static_crystallized_estimates_track_truth():
    out = run_static_crystallized(seed=4, n=3000, start=500)
    tail = slice(2000, None)
    rel_fhs = np.abs(out.fhs[tail] - out.true_var[tail]) / out.true_var[tail]
    assert np.median(rel_fhs) < 0.25
    # the naive estimator ignores the composition drift; it should not be
    # dramatically better than the composition-aware one
    assert np.isfinite(out.naive[tail]).all()


def test_static_crystallized_validation():
    with pytest.raises(ValidationError):
        run_static_crystallized(start=5, alpha=0.05)


def test_static_crystallized_skip_estimates():
    out = run_static_crystallized(seed=2, n=300, compute_estimates=False)
    assert np.all(np.isnan(out.naive))
    assert out.true_var.shape == (300,)
