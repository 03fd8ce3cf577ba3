import numpy as np
import pytest
from scipy.stats import norm

from vhsvar.errors import UnsupportedFeatureError, ValidationError
from vhsvar.mgarch import (
    CdccParams,
    FactorModelParams,
    corr_sqrt,
    design_params,
    fhs_var,
    filter_sigma_path,
    fit_cdcc_bivariate,
    min_variance_composition,
    simulate_cdcc,
    simulate_factor_model,
    spherical_var,
)


# --------------------------------------------------------------------------
# correlation square root and parameter validation


@pytest.mark.parametrize("rho", [-0.9, -0.3, 0.0, 0.5, 0.99])
def test_corr_sqrt_squares_to_correlation(rho):
    m = corr_sqrt(rho)
    assert np.allclose(m @ m, [[1.0, rho], [rho, 1.0]], atol=1e-14)
    assert np.allclose(m, m.T)


def test_cdcc_params_validation():
    ok = dict(omega=np.array([0.1, 0.1]), A=0.05 * np.eye(2),
              B=np.array([0.9, 0.9]), s12=0.5, alpha_c=0.04, beta_c=0.9)
    CdccParams(**ok)
    with pytest.raises(ValidationError):
        CdccParams(**{**ok, "omega": np.array([0.1, -0.1])})
    with pytest.raises(ValidationError):
        CdccParams(**{**ok, "s12": 1.0})
    with pytest.raises(ValidationError):
        CdccParams(**{**ok, "alpha_c": 0.2, "beta_c": 0.9})
    with pytest.raises(ValidationError):
        CdccParams(**{**ok, "B": np.array([1.0, 0.9])})


def test_unconditional_variance_solves_recursion():
    p = CdccParams(np.array([0.2, 0.3]), np.array([[0.05, 0.02], [0.01, 0.06]]),
                   np.array([0.9, 0.85]), 0.4, 0.0, 0.0)
    hbar = p.unconditional_variance
    assert np.allclose(hbar, p.omega + (p.A + np.diag(p.B)) @ hbar)


# --------------------------------------------------------------------------
# simulation


def test_simulate_constant_correlation_sample_corr():
    p = CdccParams(np.array([0.1, 0.1]), 0.05 * np.eye(2),
                   np.array([0.9, 0.9]), 0.7, 0.0, 0.0)
    rets, path = simulate_cdcc(p, 100_000, seed=41, return_sigma=True)
    assert np.allclose(path.rho, 0.7, atol=1e-12)
    e = rets.returns / path.sigma
    assert abs(np.corrcoef(e[:, 0], e[:, 1])[0, 1] - 0.7) < 0.05


def test_simulate_uncorrelated_design():
    params, innovation = design_params("G")
    assert innovation == "gaussian"
    rets = simulate_cdcc(params, 40_000, innovation=innovation, seed=42)
    y = rets.returns
    n = y.shape[0]
    assert abs(np.corrcoef(y[:, 0], y[:, 1])[0, 1]) < 3.0 / np.sqrt(n)


def test_student7_margins_unit_variance_heavy_tails():
    p = CdccParams(np.array([0.1, 0.1]), 0.01 * np.eye(2),
                   np.array([0.5, 0.5]), 0.0, 0.0, 0.0)
    rets, path = simulate_cdcc(p, 300_000, innovation="student7", seed=43,
                               return_sigma=True)
    eta = rets.returns / path.sigma
    assert np.allclose(eta.var(axis=0), 1.0, rtol=0.03)
    # t7 margin kurtosis = 3 + 6/(7-4) = 5
    kurt = np.mean(eta**4, axis=0) / np.mean(eta**2, axis=0) ** 2
    assert np.allclose(kurt, 5.0, rtol=0.25)


def test_simulate_deterministic_by_seed():
    params, innovation = design_params("A")
    a = simulate_cdcc(params, 500, innovation=innovation, seed=44)
    b = simulate_cdcc(params, 500, innovation=innovation, seed=44)
    assert np.array_equal(a.returns, b.returns)


def test_design_lookup():
    assert set("ABCDEFGH") <= set(
        k for k in "ABCDEFGH" if design_params(k) is not None
    )
    with pytest.raises(UnsupportedFeatureError):
        design_params("A*")
    with pytest.raises(ValidationError):
        design_params("Z")


# --------------------------------------------------------------------------
# estimation


def test_fit_recovers_constant_correlation_target():
    medians = {"s12": [], "ac": []}
    for seed in range(6):
        p = CdccParams(np.array([0.1, 0.1]), 0.08 * np.eye(2),
                       np.array([0.88, 0.88]), 0.7, 0.0, 0.0)
        rets = simulate_cdcc(p, 3000, seed=100 + seed)
        fit = fit_cdcc_bivariate(rets)
        medians["s12"].append(fit.params.s12)
        medians["ac"].append(fit.params.alpha_c)
    assert abs(np.median(medians["s12"]) - 0.7) < 0.1
    assert np.median(medians["ac"]) <= 0.05


def test_fit_dynamic_correlation_design():
    p, innovation = design_params("E")
    rets = simulate_cdcc(p, 4000, innovation=innovation, seed=45)
    fit = fit_cdcc_bivariate(rets)
    assert 0.0 <= fit.params.alpha_c
    assert fit.params.alpha_c + fit.params.beta_c < 1.0
    assert abs(fit.params.s12 - 0.7) < 0.15


def test_fit_residuals_whitened():
    p = CdccParams(np.array([0.1, 0.1]), 0.08 * np.eye(2),
                   np.array([0.88, 0.88]), 0.6, 0.0, 0.0)
    rets = simulate_cdcc(p, 6000, seed=46)
    fit = fit_cdcc_bivariate(rets)
    eta = fit.residuals
    assert np.allclose(eta.mean(axis=0), 0.0, atol=0.05)
    cov = np.cov(eta.T)
    assert np.allclose(cov, np.eye(2), atol=0.1)


def test_fit_rejects_bad_input():
    from vhsvar.portfolio import ReturnMatrix

    with pytest.raises(ValidationError):
        fit_cdcc_bivariate(ReturnMatrix(np.random.default_rng(0).standard_normal((600, 3))))
    with pytest.raises(ValidationError):
        fit_cdcc_bivariate(ReturnMatrix(np.random.default_rng(0).standard_normal((100, 2))))


def test_filter_sigma_path_extends_fit():
    p = CdccParams(np.array([0.1, 0.1]), 0.08 * np.eye(2),
                   np.array([0.88, 0.88]), 0.6, 0.0, 0.0)
    rets = simulate_cdcc(p, 1500, seed=47)
    fit = fit_cdcc_bivariate(rets)
    path = filter_sigma_path(rets, fit)
    assert np.allclose(path.sigma, fit.sigma_path.sigma)
    assert np.isclose(path.next_rho, fit.sigma_path.next_rho)


# --------------------------------------------------------------------------
# spherical and FHS estimators


def test_spherical_gaussian_limit():
    pool = np.random.default_rng(48).standard_normal((500_000, 2))
    est = spherical_var(np.eye(2), np.array([1.0, 0.0]), pool, 0.05)
    assert abs(est.value - (-norm.ppf(0.05))) < 0.01


def test_spherical_zero_weights():
    pool = np.random.default_rng(49).standard_normal((1000, 2))
    est = spherical_var(np.eye(2), np.zeros(2), pool, 0.05)
    assert est.value == 0.0


def test_spherical_scales_with_row_norm():
    pool = np.random.default_rng(50).standard_normal((2000, 2))
    a = np.array([0.5, 0.5])
    base = spherical_var(np.eye(2), a, pool, 0.05)
    scaled = spherical_var(3.0 * np.eye(2), a, pool, 0.05)
    assert np.isclose(scaled.value, 3.0 * base.value, rtol=1e-12)


def test_spherical_rejects_rank_deficient():
    with pytest.raises(ValidationError):
        spherical_var(np.zeros((2, 2)), np.ones(2), np.ones((100, 2)), 0.05)


def test_fhs_projection_identity():
    # Sigma = I and a = e1: the scenario returns are the first residual
    # component, so FHS is its negated empirical quantile
    resid = np.random.default_rng(51).standard_normal((4000, 2))
    est = fhs_var(np.eye(2), np.array([1.0, 0.0]), resid, 0.05)
    from vhsvar.garch import residual_quantile

    expect = -residual_quantile(resid[:, 0], 0.05).xi
    assert np.isclose(est.value, expect, rtol=1e-12)


def test_fhs_close_to_spherical_for_gaussian_pool():
    resid = np.random.default_rng(52).standard_normal((100_000, 2))
    a = np.array([0.6, 0.4])
    sig = np.array([[1.0, 0.3], [0.0, 0.9]])
    f = fhs_var(sig, a, resid, 0.05)
    s = spherical_var(sig, a, resid, 0.05)
    assert np.isclose(f.value, s.value, rtol=0.05)


def test_fhs_mean_shift():
    resid = np.random.default_rng(53).standard_normal((10_000, 2))
    a = np.array([0.5, 0.5])
    base = fhs_var(np.eye(2), a, resid, 0.05)
    shifted = fhs_var(np.eye(2), a, resid, 0.05, mean=np.array([0.2, 0.2]))
    # adding a positive mean return lowers the VaR by a'mean
    assert np.isclose(shifted.value, base.value - 0.2, rtol=1e-10)


def test_min_variance_composition_identity():
    assert np.allclose(min_variance_composition(np.eye(2)), 0.5)


# --------------------------------------------------------------------------
# factor model


def test_factor_model_validation():
    with pytest.raises(ValidationError):
        FactorModelParams(m=1)
    with pytest.raises(ValidationError):
        FactorModelParams(m=4, idio_sd=-0.1)


def test_factor_model_degenerate_noise_duplicates_columns():
    params = FactorModelParams(m=4, idio_sd=0.0)
    y = simulate_factor_model(params, 500, seed=54).returns
    assert np.array_equal(y[:, 0], y[:, 2])
    assert np.array_equal(y[:, 1], y[:, 3])
    assert not np.array_equal(y[:, 0], y[:, 1])


def test_factor_model_within_group_correlation():
    params = FactorModelParams(m=6, idio_sd=0.1)
    y = simulate_factor_model(params, 60_000, seed=55).returns
    c02 = np.corrcoef(y[:, 0], y[:, 2])[0, 1]
    var_f1 = np.var(y[:, 0]) - params.idio_sd**2
    expect = var_f1 / (var_f1 + params.idio_sd**2)
    assert abs(c02 - expect) < 0.02
    # across groups the factors are independent
    assert abs(np.corrcoef(y[:, 0], y[:, 1])[0, 1]) < 0.05
