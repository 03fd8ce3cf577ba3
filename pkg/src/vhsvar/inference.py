"""Asymptotic covariance of the (theta, quantile) estimator and VaR CIs.

The joint limit of the estimation errors (theta_hat - theta0, xi_n - xi)
has covariance

    Sigma_alpha = [[ (1/4) J^-1 S11 J^-1 , Lambda ],
                   [ Lambda'             , zeta   ]]

with J, S11 moment matrices of the score direction D_t, S22/S12 long-run
(HAC) terms built from the quantile hit indicator, and Lambda/zeta mixing
them through the density level f and the quantile xi.  The QML expansion
sqrt(n)(theta_hat - theta0) = (1/2) J^-1 n^{-1/2} sum (u_t^2-1) D_t + o(1)
fixes both the 1/4 factor on the theta block and the sign of the cross
block; both were verified against Monte Carlo covariances.  The delta
method then turns Sigma_alpha into a confidence interval for the
next-period VaR.
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass

import numpy as np
from scipy.stats import norm

from .errors import FitError, ValidationError
from .garch import GarchFit, residual_quantile

_COND_LIMIT = 1e12


# --------------------------------------------------------------------------
# Moment matrices


def estimate_J_S11(d_paths: np.ndarray, residuals: np.ndarray):
    """J = mean D_t D_t', S11 = mean (u_t^2 - 1)^2 D_t D_t'."""
    d = np.asarray(d_paths, dtype=np.float64)
    u = np.asarray(residuals, dtype=np.float64)
    if d.ndim != 2 or d.shape[0] != u.shape[0]:
        raise ValidationError("d_paths and residuals must align")
    J = d.T @ d / d.shape[0]
    w = (u**2 - 1.0) ** 2
    S11 = (d * w[:, None]).T @ d / d.shape[0]
    if np.linalg.cond(J) > _COND_LIMIT:
        raise FitError("information matrix J is numerically singular")
    return J, S11


def bartlett_bandwidth(n: int) -> int:
    """floor(1.1447 n^(1/3)) capped at n // 4."""
    return min(int(1.1447 * n ** (1.0 / 3.0)), n // 4)


def hac_long_run(
    indicator: np.ndarray,
    cross: np.ndarray,
    bandwidth: int | None = None,
):
    """Bartlett long-run terms of the hit indicator and score-hit covariance.

    ``indicator`` is the centered series 1{u_t < xi} - alpha; ``cross`` the
    centered (u_t^2 - 1) D_t rows.  Returns

      S22 = sum_{|h| <= b} w_h gamma_I(h)                (two-sided)
      S12 = sum_{0 <= h <= b} w_h (1/n) sum_t c_t I_{t+h} (one-sided)

    with Bartlett weights w_h = 1 - |h|/(b+1).  Bandwidth 0 degrades to the
    plain lag-0 covariance.
    """
    ind = np.asarray(indicator, dtype=np.float64)
    c = np.asarray(cross, dtype=np.float64)
    n = ind.shape[0]
    if c.shape[0] != n:
        raise ValidationError("indicator and cross series must align")
    if bandwidth is None:
        bandwidth = bartlett_bandwidth(n)
    if not 0 <= bandwidth < n:
        raise ValidationError(f"bandwidth {bandwidth} outside [0, n)")

    s22 = float(ind @ ind) / n
    s12 = c.T @ ind / n
    for h in range(1, bandwidth + 1):
        w = 1.0 - h / (bandwidth + 1.0)
        gamma = float(ind[h:] @ ind[:-h]) / n
        s22 += 2.0 * w * gamma
        s12 += w * (c[:-h].T @ ind[h:]) / n
    return s22, s12


# --------------------------------------------------------------------------
# Psi = E[f_{t-1}(xi) D_t] estimators


def _default_bandwidth(residuals: np.ndarray) -> float:
    n = residuals.shape[0]
    s = float(np.std(residuals))
    return 1.06 * s * n ** (-0.2)


def psi_indicator(
    residuals: np.ndarray,
    d_paths: np.ndarray,
    xi: float,
    h_n: float | None = None,
):
    """Finite-difference estimator of Psi from the hit indicator.

    Psi_hat = (1/(n h)) sum_t (1{u_t < xi+h} - 1{u_t < xi}) D_t.
    Returns (psi, empty_window) where the flag marks that no residual fell
    in [xi, xi+h) and the estimate collapsed to zero.
    """
    u = np.asarray(residuals, dtype=np.float64)
    d = np.asarray(d_paths, dtype=np.float64)
    if h_n is None:
        h_n = _default_bandwidth(u)
    if h_n <= 0:
        raise ValidationError("bandwidth must be positive")
    window = (u >= xi) & (u < xi + h_n)
    psi = d[window].sum(axis=0) / (u.shape[0] * h_n)
    return psi, not bool(window.any())


def psi_kernel(
    residuals: np.ndarray,
    d_paths: np.ndarray,
    xi: float,
    h1: float | None = None,
    h2: float | None = None,
    chunk: int = 512,
):
    """Nadaraya-Watson estimator of Psi and the mean density level.

    The conditional density of u_t at xi given u_{t-1} is smoothed with
    Gaussian kernels in both arguments:

      f_t(xi) = sum_s K_h2(u_{t-1} - u_{s-1}) K_h1(xi - u_s)
                / sum_s K_h2(u_{t-1} - u_{s-1})

    Psi_hat = mean_t f_t(xi) D_t and f_bar = mean_t f_t(xi).  The double
    sum is evaluated in chunks over t to stay O(n) in memory.  Times whose
    conditioning denominator underflows are skipped and counted.
    """
    u = np.asarray(residuals, dtype=np.float64)
    d = np.asarray(d_paths, dtype=np.float64)
    n = u.shape[0]
    if n < 3:
        raise ValidationError("kernel estimator needs at least 3 residuals")
    if h1 is None:
        h1 = _default_bandwidth(u)
    if h2 is None:
        h2 = _default_bandwidth(u)
    if h1 <= 0 or h2 <= 0:
        raise ValidationError("bandwidths must be positive")

    # pairs (u_{t-1}, u_t): conditioning value lag[i] = u[i], target cur[i]
    lag = u[:-1]
    cur = u[1:]
    d_cur = d[1:]
    k1 = np.exp(-0.5 * ((xi - cur) / h1) ** 2) / (h1 * math.sqrt(2.0 * math.pi))

    m = lag.shape[0]
    fvals = np.empty(m)
    skipped = 0
    tiny = np.finfo(np.float64).tiny
    for lo in range(0, m, chunk):
        hi = min(lo + chunk, m)
        # (chunk, m) kernel weights between conditioning values
        w = np.exp(-0.5 * ((lag[lo:hi, None] - lag[None, :]) / h2) ** 2)
        denom = w.sum(axis=1)
        fvals[lo:hi] = np.where(denom > tiny, (w @ k1) / np.maximum(denom, tiny), np.nan)
    good = np.isfinite(fvals)
    skipped = int(m - good.sum())
    if skipped == m:
        raise FitError("all conditioning denominators underflowed")
    psi = (d_cur[good] * fvals[good, None]).sum(axis=0) / good.sum()
    f_bar = float(fvals[good].mean())
    return psi, f_bar, skipped


def density_at_quantile(residuals: np.ndarray, xi: float, h: float | None = None):
    """Unconditional Gaussian-kernel density estimate of the residuals at xi."""
    u = np.asarray(residuals, dtype=np.float64)
    if h is None:
        h = _default_bandwidth(u)
    z = (xi - u) / h
    return float(np.mean(np.exp(-0.5 * z**2)) / (h * math.sqrt(2.0 * math.pi)))


# --------------------------------------------------------------------------
# Sigma_alpha assembly


@dataclass(frozen=True)
class SigmaAlpha:
    """Joint asymptotic covariance of (theta_hat, xi_n) and its pieces.

    ``full`` is the covariance of the estimation errors
    sqrt(n)(theta_hat - theta0, xi_n - xi): ``v_theta`` the theta block,
    ``lam`` the theta/quantile cross block, ``zeta`` the quantile variance.
    """

    full: np.ndarray          # 4 x 4, symmetric PSD
    v_theta: np.ndarray       # (1/4) J^-1 S11 J^-1
    lam: np.ndarray           # cross block, length 3
    zeta: float
    J: np.ndarray
    S11: np.ndarray
    S12: np.ndarray
    S22: float
    psi: np.ndarray
    f_bar: float
    xi: float
    warnings: tuple = ()


def assemble_sigma_alpha(
    J: np.ndarray,
    S11: np.ndarray,
    S12: np.ndarray,
    S22: float,
    psi: np.ndarray,
    f_bar: float,
    xi: float,
) -> SigmaAlpha:
    """Combine the moment blocks into the joint covariance matrix.

    With M = J^-1 S11 J^-1, the error covariance blocks are

      V_theta = (1/4) M
      Lambda  = -[(xi / 4f) M psi + (1 / 2f) J^-1 S12]
      zeta    = f^-2 (xi^2/4 psi'M psi + xi psi'J^-1 S12 + S22)

    (Lambda carries a minus sign because the quantile error xi_n - xi
    loads the score and hit-indicator sums with the opposite orientation
    to the theta error.)  A non-PSD assembly (possible in finite samples)
    is repaired by clipping negative eigenvalues at zero, recorded in
    ``warnings``.
    """
    if f_bar <= 0:
        raise ValidationError(f"density level must be positive, got {f_bar}")
    J = np.asarray(J, dtype=np.float64)
    S11 = np.asarray(S11, dtype=np.float64)
    S12 = np.asarray(S12, dtype=np.float64)
    psi = np.asarray(psi, dtype=np.float64)
    Jinv = np.linalg.inv(J)
    m = Jinv @ S11 @ Jinv
    m = 0.5 * (m + m.T)
    v_theta = 0.25 * m
    lam = -((xi / (4.0 * f_bar)) * (m @ psi) + (Jinv @ S12) / (2.0 * f_bar))
    zeta = (
        0.25 * xi**2 * float(psi @ m @ psi)
        + xi * float(psi @ Jinv @ S12)
        + S22
    ) / f_bar**2
    full = np.empty((4, 4))
    full[:3, :3] = v_theta
    full[:3, 3] = lam
    full[3, :3] = lam
    full[3, 3] = zeta
    warnings = ()
    eigvals, eigvecs = np.linalg.eigh(full)
    if eigvals[0] < -1e-10 * max(1.0, eigvals[-1]):
        full = (eigvecs * np.clip(eigvals, 0.0, None)) @ eigvecs.T
        full = 0.5 * (full + full.T)
        warnings = ("clipped negative eigenvalues to restore PSD",)
    return SigmaAlpha(
        full=full,
        v_theta=v_theta,
        lam=lam,
        zeta=float(zeta),
        J=J,
        S11=S11,
        S12=S12,
        S22=float(S22),
        psi=psi,
        f_bar=float(f_bar),
        xi=float(xi),
        warnings=warnings,
    )


def sigma_alpha_iid(
    J: np.ndarray,
    Omega: np.ndarray,
    kappa4: float,
    f_xi: float,
    p_alpha: float,
    alpha: float,
    xi: float,
) -> SigmaAlpha:
    """Closed-form Sigma_alpha when the rescaled innovations are iid.

    Under independence the long-run blocks collapse to
      S11 = (kappa4 - 1) J,  S22 = alpha (1 - alpha),  S12 = p_alpha Omega
    with p_alpha = E u^2 1{u < xi} - alpha and Omega = E D_t, and Psi
    factorizes as f(xi) Omega.  The general assembly applied to these
    inputs gives V_theta = ((kappa4-1)/4) J^-1 and the textbook scalar
      zeta = (kappa4-1) xi^2/4 + xi p_alpha / f + alpha(1-alpha) / f^2
    whenever Omega' J^-1 Omega = 1 (which holds at the true parameter).
    For Gaussian innovations the cross block vanishes exactly.
    """
    if kappa4 <= 1.0:
        raise ValidationError("kappa4 must exceed 1 for a non-degenerate limit")
    if f_xi <= 0:
        raise ValidationError("density at the quantile must be positive")
    J = np.asarray(J, dtype=np.float64)
    Omega = np.asarray(Omega, dtype=np.float64)
    return assemble_sigma_alpha(
        J=J,
        S11=(kappa4 - 1.0) * J,
        S12=p_alpha * Omega,
        S22=alpha * (1.0 - alpha),
        psi=f_xi * Omega,
        f_bar=f_xi,
        xi=xi,
    )


def gaussian_iid_inputs(alpha: float):
    """Analytic (xi, f, p_alpha, kappa4) for standard-normal innovations.

    p_alpha = E u^2 1{u < xi} - alpha = -xi * phi(xi) for the normal law.
    """
    xi = float(norm.ppf(alpha))
    f = float(norm.pdf(xi))
    p_alpha = -xi * f
    return xi, f, p_alpha, 3.0


def sigma_alpha_from_fit(
    fit: GarchFit,
    alpha: float,
    psi_method: str = "kernel",
    iid: bool = False,
    bandwidth: int | None = None,
) -> SigmaAlpha:
    """Estimate Sigma_alpha from a fitted GARCH: plug-in for every block.

    ``psi_method`` selects the Psi route ("kernel" or "indicator"; the
    indicator route takes the density level from an unconditional KDE).
    With ``iid=True`` the long-run sums are replaced by their independence
    short-cuts estimated from the residual sample.
    """
    u = fit.residuals
    d = fit.d_paths
    n = u.shape[0]
    xi = residual_quantile(u, alpha).xi
    J, S11 = estimate_J_S11(d, u)

    if iid:
        Omega = d.mean(axis=0)
        kappa4 = float(np.mean(u**4)) / float(np.mean(u**2)) ** 2
        f_xi = density_at_quantile(u, xi)
        p_alpha = float(np.mean(u**2 * (u < xi))) - alpha
        return sigma_alpha_iid(J, Omega, kappa4, f_xi, p_alpha, alpha, xi)

    indicator = (u < xi).astype(np.float64) - alpha
    cross = (u**2 - 1.0)[:, None] * d
    cross = cross - cross.mean(axis=0)
    S22, S12 = hac_long_run(indicator, cross, bandwidth)

    warnings = []
    if psi_method == "kernel":
        psi, f_bar, skipped = psi_kernel(u, d, xi)
        if skipped:
            warnings.append(f"kernel psi skipped {skipped} underflowed terms")
    elif psi_method == "indicator":
        psi, empty = psi_indicator(u, d, xi)
        f_bar = density_at_quantile(u, xi)
        if empty:
            warnings.append("indicator psi window was empty")
    else:
        raise ValidationError(f"unknown psi method {psi_method!r}")

    out = assemble_sigma_alpha(J, S11, S12, S22, psi, f_bar, xi)
    if warnings:
        out = dataclasses.replace(out, warnings=out.warnings + tuple(warnings))
    return out


# --------------------------------------------------------------------------
# Delta-method confidence interval


@dataclass(frozen=True)
class VarCI:
    point: float
    lower: float
    upper: float
    alpha: float
    level: float
    std_error: float
    clamped: bool = False


def var_confidence_interval(
    fit: GarchFit,
    sigma_alpha: SigmaAlpha,
    alpha: float,
    level: float = 0.95,
) -> VarCI:
    """Delta-method interval for the next-period VaR.

    The VaR estimate is -sigma_next * xi_n; the gradient with respect to
    (theta, xi) is delta = (xi * d sigma_next / d theta, sigma_next), so

      half-width = z_{(1+level)/2} sqrt(delta' Sigma_alpha delta / n).

    A negative quadratic form (possible after finite-sample assembly) is
    clamped at zero and flagged.
    """
    if not 0 < level < 1:
        raise ValidationError(f"confidence level must be in (0,1), got {level}")
    xi = sigma_alpha.xi
    sigma_next = math.sqrt(fit.sigma2_next)
    dsigma_next = fit.dsigma2_next / (2.0 * sigma_next)
    delta = np.concatenate([xi * dsigma_next, [sigma_next]])
    quad = float(delta @ sigma_alpha.full @ delta)
    clamped = quad < 0
    quad = max(quad, 0.0)
    se = math.sqrt(quad / fit.n)
    z = float(norm.ppf(0.5 + level / 2.0))
    point = -sigma_next * residual_quantile(fit.residuals, alpha).xi
    return VarCI(
        point=point,
        lower=point - z * se,
        upper=point + z * se,
        alpha=alpha,
        level=level,
        std_error=se,
        clamped=clamped,
    )
