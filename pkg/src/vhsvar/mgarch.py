"""Bivariate cDCC-GARCH simulation and estimation, plus multivariate VaR.

The conditional covariance factorizes as Sigma_t Sigma_t' with
Sigma_t = D_t R_t^{1/2}: D_t diagonal GARCH volatilities and R_t the cDCC
conditional correlation driven by the margin-standardized residuals.  The
module also provides the multivariate VaR baselines built on this model
(spherical/elliptical VaR and filtered historical simulation) and the
factor-structure return generator used in the large-m experiments.
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize

from .errors import FitError, UnsupportedFeatureError, ValidationError
from .garch import GarchParams, fit_qml, residual_quantile, simulate_garch11
from .kernels import cdcc_corr_filter
from .portfolio import ReturnMatrix, min_variance_weights


@dataclass(frozen=True)
class CdccParams:
    """Bivariate cDCC-GARCH parameters.

    Volatilities: h_t = omega + A y2_{t-1} + B h_{t-1} with y2 the squared
    returns and B diagonal.  Correlation: Q_t driven by (alpha_c, beta_c)
    around the unit-diagonal target S.
    """

    omega: np.ndarray          # (2,)
    A: np.ndarray              # (2, 2), nonnegative
    B: np.ndarray              # (2,), diagonal of B
    s12: float                 # off-diagonal of the correlation target S
    alpha_c: float
    beta_c: float

    def __post_init__(self):
        omega = np.asarray(self.omega, dtype=np.float64)
        A = np.asarray(self.A, dtype=np.float64)
        B = np.asarray(self.B, dtype=np.float64)
        object.__setattr__(self, "omega", omega)
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "B", B)
        if omega.shape != (2,) or not np.all(omega > 0):
            raise ValidationError("omega must be a positive 2-vector")
        if A.shape != (2, 2) or np.any(A < 0):
            raise ValidationError("A must be a nonnegative 2x2 matrix")
        if B.shape != (2,) or np.any(B < 0) or np.any(B >= 1):
            raise ValidationError("diag(B) must lie in [0, 1)")
        if not -1.0 < self.s12 < 1.0:
            raise ValidationError("s12 must lie in (-1, 1)")
        if self.alpha_c < 0 or self.beta_c < 0 or self.alpha_c + self.beta_c >= 1:
            raise ValidationError("need alpha_c, beta_c >= 0 and alpha_c+beta_c < 1")

    @property
    def covariance_stationary(self) -> bool:
        M = self.A + np.diag(self.B)
        return float(np.max(np.abs(np.linalg.eigvals(M)))) < 1.0

    @property
    def unconditional_variance(self) -> np.ndarray:
        """Stationary variance of the squared-return recursion; falls back
        to omega when the second moment does not exist."""
        if not self.covariance_stationary:
            return np.asarray(self.omega)
        M = self.A + np.diag(self.B)
        return np.linalg.solve(np.eye(2) - M, self.omega)


@dataclass(frozen=True)
class SigmaPath:
    """Filtered conditional volatility/correlation path plus one-step-ahead."""

    sigma: np.ndarray          # (n, 2) conditional standard deviations
    rho: np.ndarray            # (n,) conditional correlations
    next_sigma: np.ndarray     # (2,)
    next_rho: float

    def matrix(self, t: int) -> np.ndarray:
        """Sigma_t = D_t R_t^{1/2} at return row ``t`` (-1 for one-step-ahead)."""
        if t == -1 or t == self.rho.shape[0]:
            d, r = self.next_sigma, self.next_rho
        else:
            d, r = self.sigma[t], self.rho[t]
        return np.diag(d) @ corr_sqrt(r)


@dataclass(frozen=True)
class MarginFit:
    """One estimated volatility equation h_t = omega + a.y2_{t-1} + b h_{t-1}."""

    omega: float
    a: np.ndarray              # ARCH loadings on both squared returns
    beta: float
    h0: float
    converged: bool

    def as_array(self) -> np.ndarray:
        return np.array([self.omega, *self.a, self.beta])


@dataclass(frozen=True)
class CdccFit:
    params: CdccParams
    margins: tuple             # per-equation MarginFit
    sigma_path: SigmaPath
    residuals: np.ndarray      # (n, 2) fully whitened eta_hat
    std_residuals: np.ndarray  # (n, 2) margin-standardized eta*_hat
    converged: bool


def corr_sqrt(rho: float) -> np.ndarray:
    """Symmetric PSD square root of the 2x2 correlation [[1, rho], [rho, 1]]."""
    c = 0.5 * (math.sqrt(1.0 + rho) + math.sqrt(1.0 - rho))
    s = 0.5 * (math.sqrt(1.0 + rho) - math.sqrt(1.0 - rho))
    return np.array([[c, s], [s, c]])


def _draw_innovations(rng, n: int, innovation: str) -> np.ndarray:
    if innovation == "gaussian":
        return rng.standard_normal((n, 2))
    if innovation == "student7":
        # spherical bivariate Student t with 7 dof, unit-variance margins:
        # one chi-square mixing variable shared across components
        z = rng.standard_normal((n, 2))
        w = rng.chisquare(7, size=n)
        return z * np.sqrt(7.0 / w)[:, None] * math.sqrt(5.0 / 7.0)
    raise UnsupportedFeatureError(
        f"innovation family {innovation!r} is not supported"
    )


def simulate_cdcc(
    params: CdccParams,
    n: int,
    innovation: str = "gaussian",
    burn_in: int = 500,
    seed=None,
    rng=None,
    return_sigma: bool = False,
):
    """Simulate a bivariate cDCC-GARCH return path.

    Returns a ReturnMatrix (and, with ``return_sigma``, the true SigmaPath
    aligned with it).  Divergent variance paths abort with FitError.
    """
    if burn_in < 500:
        raise ValidationError("burn_in must be at least 500")
    if rng is None:
        rng = np.random.default_rng(seed)
    eta = _draw_innovations(rng, n + burn_in, innovation)

    w, A, B, s12 = params.omega, params.A, params.B, params.s12
    a_c, b_c = params.alpha_c, params.beta_c
    hbar = params.unconditional_variance
    cap = 1e10 * float(hbar.max())

    h = hbar.copy()
    q11 = q22 = 1.0
    q12 = s12
    total = n + burn_in
    y = np.empty((total, 2))
    sig = np.empty((total, 2))
    rho_path = np.empty(total)
    e_star = np.zeros(2)
    cbar = 1.0 - a_c - b_c
    for t in range(total):
        if t > 0:
            y2 = y[t - 1] ** 2
            h = w + A @ y2 + B * h
            if h[0] > cap or h[1] > cap:
                raise FitError("simulated variance diverged")
            q12 = cbar * s12 + a_c * math.sqrt(q11 * q22) * e_star[0] * e_star[1] + b_c * q12
            q11 = cbar + a_c * q11 * e_star[0] ** 2 + b_c * q11
            q22 = cbar + a_c * q22 * e_star[1] ** 2 + b_c * q22
        rho = q12 / math.sqrt(q11 * q22)
        rho = min(max(rho, -0.9999), 0.9999)
        d = np.sqrt(h)
        y[t] = d * (corr_sqrt(rho) @ eta[t])
        sig[t] = d
        rho_path[t] = rho
        e_star = y[t] / d

    returns = ReturnMatrix(y[burn_in:])
    if not return_sigma:
        return returns
    # one-step-ahead state after the last simulated observation
    y2 = y[-1] ** 2
    h_next = w + A @ y2 + B * h
    q12n = cbar * s12 + a_c * math.sqrt(q11 * q22) * e_star[0] * e_star[1] + b_c * q12
    q11n = cbar + a_c * q11 * e_star[0] ** 2 + b_c * q11
    q22n = cbar + a_c * q22 * e_star[1] ** 2 + b_c * q22
    rho_next = min(max(q12n / math.sqrt(q11n * q22n), -0.9999), 0.9999)
    path = SigmaPath(
        sigma=sig[burn_in:],
        rho=rho_path[burn_in:],
        next_sigma=np.sqrt(h_next),
        next_rho=rho_next,
    )
    return returns, path


def _vec_garch_filter(s: np.ndarray, omega: float, a: np.ndarray,
                      beta: float, h0: float) -> np.ndarray:
    """h_t = omega + a . s_{t-1} + beta h_{t-1} with h_0 given; s = y^2 rows."""
    from scipy.signal import lfilter

    driver = omega + s[:-1] @ a
    h = np.empty(s.shape[0])
    h[0] = h0
    h[1:], _ = lfilter([1.0], [1.0, -beta], driver, zi=[beta * h0])
    return h


def _margin_objective(x, s: np.ndarray, own: int, h0: float):
    """Gaussian QML value and gradient for one volatility equation."""
    from scipy.signal import lfilter

    omega, a1, a2, beta = x
    a = np.array([a1, a2])
    h = _vec_garch_filter(s, omega, a, beta, h0)
    n = s.shape[0]
    x2 = s[:, own]
    inv = 1.0 / h
    ratio = x2 * inv
    value = float(np.mean(ratio + np.log(h)))
    # dh/dtheta via the same IIR filter; h0 does not depend on theta
    zi = [0.0]
    dh = np.zeros((n, 4))
    dh[1:, 0], _ = lfilter([1.0], [1.0, -beta], np.ones(n - 1), zi=zi)
    dh[1:, 1], _ = lfilter([1.0], [1.0, -beta], s[:-1, 0], zi=zi)
    dh[1:, 2], _ = lfilter([1.0], [1.0, -beta], s[:-1, 1], zi=zi)
    dh[1:, 3], _ = lfilter([1.0], [1.0, -beta], h[:-1], zi=zi)
    grad = ((1.0 - ratio) * inv) @ dh / n
    return value, grad


def _fit_margin(s: np.ndarray, own: int, start: np.ndarray | None) -> MarginFit:
    """QML fit of one equation of the bivariate volatility recursion."""
    h0 = float(np.mean(s[:, own]))
    lb = 1e-10
    bounds = [(1e-8, 10.0 * max(h0, 1e-8)), (lb, 5.0), (lb, 5.0), (lb, 0.9999)]
    if start is not None:
        starts = [np.clip(start, [b[0] for b in bounds], [b[1] for b in bounds])]
    else:
        starts = []
        for a_own, b in ((0.05, 0.90), (0.10, 0.80), (0.30, 0.40)):
            w = max(h0 * (1.0 - a_own - b), 1e-8)
            starts.append(np.array([w, a_own if own == 0 else lb,
                                    a_own if own == 1 else lb, b]))
    best = None
    for x0 in starts:
        res = minimize(
            _margin_objective, x0, args=(s, own, h0), jac=True,
            method="L-BFGS-B", bounds=bounds,
            options={"ftol": 1e-12, "gtol": 1e-9, "maxiter": 300},
        )
        if best is None or res.fun < best.fun:
            best = res
    omega, a1, a2, beta = best.x
    return MarginFit(
        omega=float(omega), a=np.array([a1, a2]), beta=float(beta),
        h0=h0, converged=bool(best.success),
    )


def _filter_sigma_path(
    y: np.ndarray, margins, s12: float, a_c: float, b_c: float
) -> SigmaPath:
    """Run the volatility and correlation filters at given parameters."""
    s = y**2
    n = y.shape[0]
    sig = np.empty((n, 2))
    h_next = np.empty(2)
    for i in (0, 1):
        mf = margins[i]
        h = _vec_garch_filter(s, mf.omega, mf.a, mf.beta, mf.h0)
        sig[:, i] = np.sqrt(h)
        h_next[i] = mf.omega + mf.a @ s[-1] + mf.beta * h[-1]
    e = y / sig
    rho, _ = cdcc_corr_filter(
        np.ascontiguousarray(e[:, 0]), np.ascontiguousarray(e[:, 1]), s12, a_c, b_c
    )
    # replay the last Q update for the one-step-ahead correlation
    q11 = q22 = 1.0
    q12 = s12
    cbar = 1.0 - a_c - b_c
    for t in range(1, n + 1):
        q12 = cbar * s12 + a_c * math.sqrt(q11 * q22) * e[t - 1, 0] * e[t - 1, 1] + b_c * q12
        q11 = cbar + a_c * q11 * e[t - 1, 0] ** 2 + b_c * q11
        q22 = cbar + a_c * q22 * e[t - 1, 1] ** 2 + b_c * q22
    rho_next = min(max(q12 / math.sqrt(q11 * q22), -0.9999), 0.9999)
    return SigmaPath(
        sigma=sig, rho=rho, next_sigma=np.sqrt(h_next), next_rho=rho_next
    )


def fit_cdcc_bivariate(
    returns: ReturnMatrix,
    start_corr: tuple | None = None,
    start_margins: tuple | None = None,
) -> CdccFit:
    """Three-step QML fit: margins, correlation targeting, (alpha_c, beta_c).

    Step 1 fits each volatility equation h_it = w_i + A_i . y2_{t-1} +
    b_i h_{i,t-1} by Gaussian QML (the ARCH part loads both squared
    returns); step 2 sets the target S by the sample correlation of the
    standardized residuals; step 3 maximizes the Gaussian correlation
    likelihood over (alpha_c, beta_c) with S fixed.  ``start_corr`` and
    ``start_margins`` warm-start the optimizations.
    """
    y = returns.returns
    if y.ndim != 2 or y.shape[1] != 2:
        raise ValidationError("cDCC fit requires a bivariate return matrix")
    n = y.shape[0]
    if n < 500:
        raise ValidationError("cDCC fit needs at least 500 observations")

    s = y**2
    fits = tuple(
        _fit_margin(
            s, i, None if start_margins is None else start_margins[i].as_array()
        )
        for i in (0, 1)
    )
    sig = np.column_stack([
        np.sqrt(_vec_garch_filter(s, f.omega, f.a, f.beta, f.h0))
        for f in fits
    ])
    e = y / sig
    e1 = np.ascontiguousarray(e[:, 0])
    e2 = np.ascontiguousarray(e[:, 1])

    s12 = float(np.corrcoef(e1, e2)[0, 1])
    s12 = min(max(s12, -0.999), 0.999)

    def nll(x):
        a, b = x
        if a < 0 or b < 0 or a + b > 0.9990:
            return 1e12
        return cdcc_corr_filter(e1, e2, s12, a, b)[1] / n

    x0 = np.array(start_corr if start_corr is not None else (0.04, 0.90))
    res = minimize(
        nll,
        x0,
        method="Nelder-Mead",
        options={"xatol": 1e-7, "fatol": 1e-11, "maxiter": 500},
    )
    a_c, b_c = float(max(res.x[0], 0.0)), float(max(res.x[1], 0.0))
    if a_c + b_c > 0.9990:
        scale = 0.9990 / (a_c + b_c)
        a_c, b_c = a_c * scale, b_c * scale

    # dynamics collapsed: report the constant-correlation model
    if nll((a_c, b_c)) >= nll((0.0, 0.0)) - 1e-12:
        a_c = b_c = 0.0

    margins = fits
    params = CdccParams(
        omega=np.array([m.omega for m in margins]),
        A=np.vstack([m.a for m in margins]),
        B=np.array([m.beta for m in margins]),
        s12=s12,
        alpha_c=a_c,
        beta_c=b_c,
    )
    path = _filter_sigma_path(y, margins, s12, a_c, b_c)
    # fully whitened residuals: eta = R^{-1/2} eta*
    resid = np.empty_like(e)
    for t in range(n):
        rho = path.rho[t]
        cc = 0.5 * (math.sqrt(1.0 + rho) + math.sqrt(1.0 - rho))
        ss = 0.5 * (math.sqrt(1.0 + rho) - math.sqrt(1.0 - rho))
        det = math.sqrt(1.0 - rho * rho)
        resid[t, 0] = (cc * e[t, 0] - ss * e[t, 1]) / det
        resid[t, 1] = (-ss * e[t, 0] + cc * e[t, 1]) / det
    return CdccFit(
        params=params,
        margins=margins,
        sigma_path=path,
        residuals=resid,
        std_residuals=e,
        converged=bool(res.success) and all(f.converged for f in fits),
    )


def filter_sigma_path(returns: ReturnMatrix, fit: CdccFit) -> SigmaPath:
    """Re-run the fitted filters on a (possibly longer) return matrix."""
    return _filter_sigma_path(
        returns.returns, fit.margins, fit.params.s12,
        fit.params.alpha_c, fit.params.beta_c,
    )


# --------------------------------------------------------------------------
# Multivariate VaR estimators


def spherical_var(
    sigma_t: np.ndarray,
    a: np.ndarray,
    pooled: np.ndarray,
    alpha: float,
    t0: int = -1,
) -> "VarEstimate":
    """Elliptical VaR ||a' Sigma_t|| times the pooled radial quantile.

    ``pooled`` holds the components of the whitened residuals (any shape).
    A spherical law has symmetric margins, so the marginal VaR is the
    two-sided (1 - 2 alpha) quantile: the pool is augmented with its
    negation (2nm values) and the upper (1 - alpha) order statistic of the
    symmetrized sample estimates the residual VaR.
    """
    from .vhs import VarEstimate

    sigma_t = np.asarray(sigma_t, dtype=np.float64)
    if np.linalg.matrix_rank(sigma_t) < sigma_t.shape[0]:
        raise ValidationError("Sigma_t is rank deficient")
    comp = np.asarray(pooled, dtype=np.float64).ravel()
    sym = np.concatenate([comp, -comp])
    n = sym.shape[0]
    rank = math.ceil(n * (1.0 - alpha))
    if not 1 <= rank <= n or comp.shape[0] * alpha < 1:
        raise ValidationError("pooled sample too small for the quantile level")
    q = float(np.partition(sym, rank - 1)[rank - 1])
    norm_row = float(np.linalg.norm(np.asarray(a) @ sigma_t))
    return VarEstimate(
        value=norm_row * q, method="Spherical", t0=t0, alpha=alpha, xi=q
    )


def fhs_var(
    sigma_t: np.ndarray,
    a: np.ndarray,
    residuals: np.ndarray,
    alpha: float,
    mean: np.ndarray | float = 0.0,
    t0: int = -1,
) -> "VarEstimate":
    """Filtered historical simulation: re-dress residuals with Sigma_t.

    Scenario returns a'm + a' Sigma_t eta_s over the historical whitened
    draws; the VaR is minus their empirical alpha-quantile.
    """
    residuals = np.asarray(residuals, dtype=np.float64)
    if residuals.shape[0] * alpha < 1:
        raise ValidationError("residual pool too small for the quantile level")
    a = np.asarray(a, dtype=np.float64)
    loc = float(np.dot(a, mean)) if np.ndim(mean) else float(np.sum(a) * mean)
    scen = loc + residuals @ (a @ np.asarray(sigma_t))
    from .vhs import VarEstimate

    q = residual_quantile(scen, alpha)
    return VarEstimate(value=-q.xi, method="FHS", t0=t0, alpha=alpha, xi=q.xi)


def min_variance_composition(sigma_t: np.ndarray) -> np.ndarray:
    """Weights proportional to (Sigma_t Sigma_t')^{-1} e."""
    return min_variance_weights(sigma_t)


# --------------------------------------------------------------------------
# Design presets (Monte Carlo experiments)


def _design(omega, vecA, diagB, s12, a_c, b_c, innovation):
    # vecA is column-major: (a11, a21, a12, a22)
    A = np.array([[vecA[0], vecA[2]], [vecA[1], vecA[3]]])
    return (
        CdccParams(
            omega=np.array(omega),
            A=A,
            B=np.array(diagB),
            s12=s12,
            alpha_c=a_c,
            beta_c=b_c,
        ),
        innovation,
    )


DESIGN_TABLE = {
    "A": _design((1e-6, 4e-6), (0.01, 0.01, 0.01, 0.07), (0.0, 0.92), 0.7, 0.04, 0.95, "gaussian"),
    "B": _design((1e-6, 4e-6), (0.01, 0.01, 0.01, 0.07), (0.0, 0.92), 0.7, 0.04, 0.95, "student7"),
    "C": _design((1e-6, 4e-6), (0.01, 0.01, 0.01, 0.07), (0.0, 0.92), 0.0, 0.0, 0.0, "gaussian"),
    "D": _design((1e-6, 4e-6), (0.01, 0.01, 0.01, 0.07), (0.0, 0.92), 0.0, 0.0, 0.0, "student7"),
    "E": _design((1e-5, 1e-5), (0.07, 0.0, 0.0, 0.07), (0.92, 0.92), 0.7, 0.04, 0.95, "gaussian"),
    "F": _design((1e-5, 1e-5), (0.07, 0.0, 0.0, 0.07), (0.92, 0.92), 0.7, 0.04, 0.95, "student7"),
    "G": _design((1e-5, 1e-5), (0.07, 0.0, 0.0, 0.07), (0.92, 0.92), 0.0, 0.0, 0.0, "gaussian"),
    "H": _design((1e-5, 1e-5), (0.07, 0.0, 0.0, 0.07), (0.92, 0.92), 0.0, 0.0, 0.0, "student7"),
}


def design_params(design_id: str):
    """Look up a Monte Carlo design by letter; starred ids are out of scope."""
    key = design_id.strip().upper()
    if key.endswith("*"):
        raise UnsupportedFeatureError(
            f"design {design_id!r} uses the asymmetric exponential power "
            "innovation family, which is not implemented"
        )
    if key not in DESIGN_TABLE:
        raise ValidationError(f"unknown design {design_id!r}")
    return DESIGN_TABLE[key]


# --------------------------------------------------------------------------
# Factor-structure generator for the large-m experiments


@dataclass(frozen=True)
class FactorModelParams:
    """Two GARCH factors alternately loaded across m assets plus noise."""

    m: int
    theta1: GarchParams = GarchParams(1.0, 0.09, 0.87)
    theta2: GarchParams = GarchParams(0.1, 0.7, 0.01)
    idio_sd: float = 0.1

    def __post_init__(self):
        if self.m < 2:
            raise ValidationError("factor model needs at least 2 assets")
        if self.idio_sd < 0:
            raise ValidationError("idiosyncratic volatility must be >= 0")


def simulate_factor_model(
    params: FactorModelParams, n: int, seed=None, rng=None
) -> ReturnMatrix:
    """Odd-numbered assets load the first factor, even-numbered the second."""
    if rng is None:
        rng = np.random.default_rng(seed)
    f1 = simulate_garch11(params.theta1, n, rng=rng)
    f2 = simulate_garch11(params.theta2, n, rng=rng)
    y = np.empty((n, params.m))
    for j in range(params.m):
        base = f1 if j % 2 == 0 else f2
        y[:, j] = base
    if params.idio_sd > 0:
        y += params.idio_sd * rng.standard_normal((n, params.m))
    return ReturnMatrix(y)
