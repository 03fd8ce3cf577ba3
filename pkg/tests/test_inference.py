import math

import numpy as np
import pytest
from scipy.stats import norm

from vhsvar.errors import ValidationError
from vhsvar.garch import fit_qml
from vhsvar.inference import (
    assemble_sigma_alpha,
    bartlett_bandwidth,
    density_at_quantile,
    estimate_J_S11,
    gaussian_iid_inputs,
    hac_long_run,
    psi_indicator,
    psi_kernel,
    sigma_alpha_from_fit,
    sigma_alpha_iid,
    var_confidence_interval,
)

# Closed-form scalar variance of the residual-quantile error for standard
# normal innovations at level 0.05 (derived analytically from
# (kappa4-1) xi^2/4 + xi p/f + a(1-a)/f^2).
ZETA_GAUSS_05 = 3.1127897294680165


# --------------------------------------------------------------------------
# moment matrices


def test_J_S11_hand_values():
    d = np.vstack([np.eye(3), np.eye(3)])  # rows cycle through e1, e2, e3
    u = np.array([0.0, 2.0, 1.0, 1.0, 1.0, 1.0])  # (u^2-1)^2 = 1,9,0,0,0,0
    J, S11 = estimate_J_S11(d, u)
    assert np.allclose(J, np.eye(3) / 3.0)
    assert np.allclose(S11, np.diag([1.0, 9.0, 0.0]) / 6.0)


def test_J_singular_direction_rejected():
    from vhsvar.errors import FitError

    d = np.tile([1.0, 2.0, 0.0], (4, 1))
    with pytest.raises(FitError, match="singular"):
        estimate_J_S11(d, np.ones(4))


def test_S11_close_to_twice_J_for_gaussian(garch_series):
    fit = fit_qml(garch_series)
    J, S11 = estimate_J_S11(fit.d_paths, fit.residuals)
    # E(u^2-1)^2 = kappa4 - 1 = 2 for Gaussian innovations
    assert np.allclose(S11, 2.0 * J, rtol=0.25)
    assert np.isclose(np.trace(S11) / np.trace(J), 2.0, rtol=0.1)


def test_J_S11_shape_mismatch():
    with pytest.raises(ValidationError):
        estimate_J_S11(np.ones((5, 3)), np.ones(4))


# --------------------------------------------------------------------------
# HAC long-run estimators


def test_bartlett_bandwidth_values():
    assert bartlett_bandwidth(1000) == 11
    assert bartlett_bandwidth(27) == 3
    assert bartlett_bandwidth(8) == 2  # capped at n // 4


def test_hac_iid_indicator_variance():
    rng = np.random.default_rng(31)
    n, alpha = 200_000, 0.05
    u = rng.standard_normal(n)
    xi = float(norm.ppf(alpha))
    ind = (u < xi).astype(float) - alpha
    cross = (u**2 - 1.0)[:, None] * np.ones((n, 3))
    s22, s12 = hac_long_run(ind, cross)
    assert np.isclose(s22, alpha * (1 - alpha), rtol=0.15)
    # For iid normals S12 = one-sided sum; only h=0 survives:
    # E (u^2-1) 1{u<xi} = E u^2 1{u<xi} - alpha = -xi phi(xi)
    assert np.allclose(s12, -xi * norm.pdf(xi), atol=0.02)


def test_hac_ar1_long_run_variance():
    rng = np.random.default_rng(32)
    n, rho = 400_000, 0.5
    e = rng.standard_normal(n)
    x = np.empty(n)
    x[0] = e[0]
    for t in range(1, n):
        x[t] = rho * x[t - 1] + e[t]
    lrv, _ = hac_long_run(x - x.mean(), np.zeros((n, 1)), bandwidth=300)
    assert np.isclose(lrv, 1.0 / (1 - rho) ** 2, rtol=0.1)


def test_hac_bandwidth_zero_is_lag0_only():
    rng = np.random.default_rng(33)
    x = rng.standard_normal(5000)
    c = rng.standard_normal((5000, 2))
    s22, s12 = hac_long_run(x, c, bandwidth=0)
    assert np.isclose(s22, float(x @ x) / 5000)
    assert np.allclose(s12, c.T @ x / 5000)


def test_hac_brute_force_fixed_bandwidth():
    rng = np.random.default_rng(34)
    n, b = 300, 5
    x = rng.standard_normal(n)
    c = rng.standard_normal((n, 2))
    s22, s12 = hac_long_run(x, c, bandwidth=b)
    expect22 = float(x @ x) / n
    expect12 = c.T @ x / n
    for h in range(1, b + 1):
        w = 1.0 - h / (b + 1.0)
        expect22 += 2.0 * w * float(x[h:] @ x[:-h]) / n
        expect12 += w * (c[:-h].T @ x[h:]) / n
    assert np.isclose(s22, expect22, rtol=1e-12)
    assert np.allclose(s12, expect12, rtol=1e-12)


def test_hac_validation():
    with pytest.raises(ValidationError):
        hac_long_run(np.ones(10), np.ones((9, 3)))
    with pytest.raises(ValidationError):
        hac_long_run(np.ones(10), np.ones((10, 3)), bandwidth=10)


# --------------------------------------------------------------------------
# Psi estimators


def test_psi_indicator_uniform_density():
    # uniform residuals have density 1; with D_t = e1 the estimate is ~e1
    u = (np.arange(20_000) + 0.5) / 20_000
    d = np.tile([1.0, 0.0, 0.0], (20_000, 1))
    psi, empty = psi_indicator(u, d, 0.3, h_n=0.05)
    assert not empty
    assert np.allclose(psi, [1.0, 0.0, 0.0], atol=0.01)


def test_psi_indicator_empty_window_flag():
    u = np.full(100, 5.0)
    psi, empty = psi_indicator(u, np.ones((100, 3)), -2.0, h_n=0.1)
    assert empty
    assert np.allclose(psi, 0.0)


def test_psi_kernel_iid_factorizes(garch_series):
    fit = fit_qml(garch_series)
    u = fit.residuals
    d = fit.d_paths
    xi = float(np.quantile(u, 0.05))
    psi, f_bar, skipped = psi_kernel(u, d, xi)
    assert skipped == 0
    # iid innovations: Psi = f(xi) E D_t and f_bar = f(xi) ~ phi(xi)
    assert np.isclose(f_bar, norm.pdf(xi), rtol=0.15)
    assert np.allclose(psi, f_bar * d.mean(axis=0), rtol=0.3, atol=0.01)


def test_psi_kernel_close_to_indicator(garch_series):
    fit = fit_qml(garch_series)
    xi = float(np.quantile(fit.residuals, 0.05))
    pk, _, _ = psi_kernel(fit.residuals, fit.d_paths, xi)
    pi, _ = psi_indicator(fit.residuals, fit.d_paths, xi)
    assert np.allclose(pk, pi, rtol=0.5, atol=0.02)


def test_density_at_quantile_gaussian():
    u = np.random.default_rng(35).standard_normal(100_000)
    xi = float(norm.ppf(0.05))
    assert np.isclose(density_at_quantile(u, xi), norm.pdf(xi), rtol=0.1)


def test_psi_bandwidth_validation():
    with pytest.raises(ValidationError):
        psi_indicator(np.ones(10), np.ones((10, 3)), 0.0, h_n=0.0)
    with pytest.raises(ValidationError):
        psi_kernel(np.ones(10), np.ones((10, 3)), 0.0, h1=-1.0)


# --------------------------------------------------------------------------
# covariance assembly


def test_assemble_hand_arithmetic():
    # J = I, S11 = I, S12 = 0, psi = f e1: every block is hand-computable
    J = np.eye(3)
    S11 = np.eye(3)
    S12 = np.zeros(3)
    f, xi, S22 = 0.5, -1.0, 0.04
    psi = f * np.array([1.0, 0.0, 0.0])
    sa = assemble_sigma_alpha(J, S11, S12, S22, psi, f, xi)
    assert np.allclose(sa.v_theta, 0.25 * np.eye(3))
    # lam = -(xi/(4f)) psi = -(-1/2) * (0.5,0,0) = (0.25, 0, 0)
    assert np.allclose(sa.lam, [0.25, 0.0, 0.0])
    # zeta = (xi^2/4 * f^2 + S22) / f^2 = 0.25 + 0.04/0.25
    assert np.isclose(sa.zeta, 0.25 + 0.04 / 0.25)
    assert np.allclose(sa.full, sa.full.T)


def test_assemble_zero_score_block_collapses_zeta():
    # S11 = 0, S12 = 0: only the indicator long-run term survives,
    # zeta = alpha(1-alpha)/f^2 (the fixed-theta quantile variance)
    alpha, f = 0.05, 0.2
    sa = assemble_sigma_alpha(
        np.eye(3), np.zeros((3, 3)), np.zeros(3),
        alpha * (1 - alpha), f * np.ones(3), f, -1.6,
    )
    assert np.isclose(sa.zeta, alpha * (1 - alpha) / f**2)
    assert np.allclose(sa.v_theta, 0.0)


def test_assemble_rejects_bad_density():
    with pytest.raises(ValidationError):
        assemble_sigma_alpha(np.eye(3), np.eye(3), np.zeros(3), 0.05,
                             np.zeros(3), 0.0, -1.6)


def test_iid_gaussian_scalar_variance():
    xi, f, p_alpha, kappa4 = gaussian_iid_inputs(0.05)
    assert np.isclose(xi, norm.ppf(0.05))
    assert np.isclose(p_alpha, -xi * norm.pdf(xi))
    e1 = np.array([1.0, 0.0, 0.0])
    sa = sigma_alpha_iid(np.eye(3), e1, kappa4, f, p_alpha, 0.05, xi)
    assert np.isclose(sa.zeta, ZETA_GAUSS_05, rtol=1e-12)
    # Gaussian cross block vanishes: (kappa4-1) xi/4 * f + p/2 = 0 per entry
    assert np.allclose(sa.lam, 0.0, atol=1e-14)
    assert np.allclose(sa.v_theta, 0.5 * np.eye(3))


def test_iid_closed_form_matches_textbook_formula():
    alpha = 0.01
    xi, f, p_alpha, kappa4 = gaussian_iid_inputs(alpha)
    e1 = np.array([1.0, 0.0, 0.0])
    sa = sigma_alpha_iid(np.eye(3), e1, kappa4, f, p_alpha, alpha, xi)
    expect = ((kappa4 - 1) * xi**2 / 4 + xi * p_alpha / f
              + alpha * (1 - alpha) / f**2)
    assert np.isclose(sa.zeta, expect, rtol=1e-12)


def test_iid_validation():
    with pytest.raises(ValidationError):
        sigma_alpha_iid(np.eye(3), np.ones(3), 1.0, 0.1, 0.0, 0.05, -1.6)
    with pytest.raises(ValidationError):
        sigma_alpha_iid(np.eye(3), np.ones(3), 3.0, 0.0, 0.0, 0.05, -1.6)


def test_sigma_alpha_from_fit_routes_agree(garch_series):
    fit = fit_qml(garch_series)
    a = sigma_alpha_from_fit(fit, 0.05, psi_method="kernel")
    b = sigma_alpha_from_fit(fit, 0.05, psi_method="indicator")
    c = sigma_alpha_from_fit(fit, 0.05, iid=True)
    for sa in (a, b, c):
        assert sa.zeta > 0
        assert np.allclose(sa.full, sa.full.T)
        ev = np.linalg.eigvalsh(sa.full)
        assert ev[0] >= -1e-10
    # Gaussian simulated data: every route should land near the iid value
    assert np.isclose(a.zeta, c.zeta, rtol=0.5)
    assert np.isclose(b.zeta, c.zeta, rtol=0.5)
    with pytest.raises(ValidationError):
        sigma_alpha_from_fit(fit, 0.05, psi_method="bogus")


# --------------------------------------------------------------------------
# confidence interval


def test_ci_zero_covariance_zero_width(garch_series):
    fit = fit_qml(garch_series)
    sa = sigma_alpha_from_fit(fit, 0.05)
    import dataclasses

    flat = dataclasses.replace(sa, full=np.zeros((4, 4)))
    ci = var_confidence_interval(fit, flat, 0.05)
    assert ci.lower == ci.point == ci.upper
    assert ci.std_error == 0.0 and not ci.clamped


def test_ci_halfwidth_multiplier(garch_series):
    fit = fit_qml(garch_series)
    sa = sigma_alpha_from_fit(fit, 0.05)
    ci95 = var_confidence_interval(fit, sa, 0.05, level=0.95)
    ci90 = var_confidence_interval(fit, sa, 0.05, level=0.90)
    assert ci95.point == ci90.point
    hw95 = ci95.upper - ci95.point
    hw90 = ci90.upper - ci90.point
    assert np.isclose(hw95 / hw90, norm.ppf(0.975) / norm.ppf(0.95), rtol=1e-10)
    assert np.isclose(hw95, norm.ppf(0.975) * ci95.std_error, rtol=1e-12)
    assert ci95.lower < ci95.point < ci95.upper


def test_ci_level_validation(garch_series):
    fit = fit_qml(garch_series)
    sa = sigma_alpha_from_fit(fit, 0.05)
    with pytest.raises(ValidationError):
        var_confidence_interval(fit, sa, 0.05, level=1.0)
