"""Scripted Monte Carlo studies comparing the VaR estimators.

Three study families:

* ``run_design``: bivariate cDCC worlds with a minimum-variance portfolio;
  the spherical / FHS / VHS estimates are scored in MSE against the
  full-information theoretical VaR.
* ``run_factor_backtest``: misspecified factor worlds with an alternating
  portfolio composition; methods are backtested out of sample.
* ``run_static_crystallized``: iid world with a crystallized portfolio,
  illustrating weight concentration and the failure of the naive method.

All runs are deterministic given their seed; replication r uses
base_seed + r.  Estimated parameters are held fixed after the estimation
window inside each replication (recorded in the result metadata).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.stats import norm, t as student_t

from .backtest import BacktestReport, loss_series, summarize
from .errors import (
    FitError,
    UnsupportedFeatureError,
    ValidationError,
    VhsvarError,
)
from .garch import fit_qml, residual_quantile
from .kernels import garch_filter
from .mgarch import (
    FactorModelParams,
    design_params,
    fhs_var,
    fit_cdcc_bivariate,
    min_variance_composition,
    simulate_cdcc,
    simulate_factor_model,
    spherical_var,
)
from .portfolio import ReturnMatrix


# --------------------------------------------------------------------------
# Design study (bivariate cDCC, minimum-variance portfolio)


@dataclass(frozen=True)
class DesignSpec:
    """Configuration of one Monte Carlo design run."""

    design_id: str
    n1: int = 500
    n_predictions: int = 200
    n_reps: int = 20
    alphas: tuple = (0.01, 0.05)
    seed: int = 0

    def __post_init__(self):
        design_params(self.design_id)  # validates the id
        if self.n1 < 500:
            raise ValidationError("estimation window n1 must be at least 500")
        if self.n_predictions < 1:
            raise ValidationError("need at least one out-of-sample prediction")
        if self.n_reps < 1:
            raise ValidationError("need at least one replication")
        for a in self.alphas:
            if not 0 < a < 0.5:
                raise ValidationError(f"alpha {a} outside (0, 0.5)")

    @classmethod
    def desk(cls, design_id: str, seed: int = 0) -> "DesignSpec":
        return cls(design_id=design_id, seed=seed)

    @classmethod
    def full(cls, design_id: str, seed: int = 0) -> "DesignSpec":
        import warnings

        warnings.warn(
            "full-scale design run (100 replications x 1000 predictions); "
            "expect a long runtime",
            stacklevel=2,
        )
        return cls(
            design_id=design_id, n_predictions=1000, n_reps=100, seed=seed
        )


@dataclass(frozen=True)
class RETable:
    """MSE ratios of the multivariate/univariate methods per alpha level."""

    design_id: str
    mse: dict                  # {alpha: {method: float}}
    ratios: dict               # {alpha: {"fhs_over_s", "vhs_over_s"}}
    n_reps_used: int
    n_failures: int
    traces: dict               # {alpha: {method: per-prediction squared errors}}
    metadata: dict


def _marginal_quantile(innovation: str, alpha: float) -> float:
    """alpha-quantile of one innovation component (unit variance)."""
    if innovation == "gaussian":
        return float(norm.ppf(alpha))
    if innovation == "student7":
        return float(student_t.ppf(alpha, 7)) * math.sqrt(5.0 / 7.0)
    raise UnsupportedFeatureError(f"no quantile for innovation {innovation!r}")


def _vhs_forecast(virtual: np.ndarray, n1: int, t: int, alpha: float, warm):
    """Fit on the first n1 virtual returns, filter volatility through t-1."""
    fit = fit_qml(virtual[:n1], start=warm)
    theta = fit.theta_hat
    xi = {a: residual_quantile(fit.residuals, a).xi for a in alpha}
    if t <= n1:
        s2_last = fit.sigma2_path.sigma2[-1]
        last = virtual[n1 - 1]
    else:
        s2 = garch_filter(
            np.ascontiguousarray(virtual[:t]),
            theta.omega, theta.alpha, theta.beta,
            fit.sigma2_path.init_sigma2,
        )
        s2_last = s2[-1]
        last = virtual[t - 1]
    s2_next = theta.omega + theta.alpha * last**2 + theta.beta * s2_last
    sigma = math.sqrt(s2_next)
    return {a: -sigma * xi[a] for a in alpha}, theta


def _run_design_replication(spec: DesignSpec, rep: int, accum):
    params, innovation = design_params(spec.design_id)
    n = spec.n1 + spec.n_predictions
    returns, true_path = simulate_cdcc(
        params, n, innovation=innovation, seed=spec.seed + rep,
        return_sigma=True,
    )
    y = returns.returns

    # portfolio composition from the true conditional covariance
    comp = np.empty((n, 2))
    for t in range(n):
        comp[t] = min_variance_composition(true_path.matrix(t))

    cfit = fit_cdcc_bivariate(ReturnMatrix(y[: spec.n1]))
    est_path = _refilter(y, cfit)
    pool = cfit.residuals[: spec.n1]

    q_true = {a: _marginal_quantile(innovation, a) for a in spec.alphas}
    warm = None
    for t in range(spec.n1, n):
        a_vec = comp[t]
        sig_true = true_path.matrix(t)
        truth = {
            a: -float(np.linalg.norm(a_vec @ sig_true)) * q_true[a]
            for a in spec.alphas
        }
        sig_est = est_path.matrix(t)
        virtual = y @ a_vec
        vhs, warm = _vhs_forecast(virtual, spec.n1, t, spec.alphas, warm)
        for a in spec.alphas:
            sph = spherical_var(sig_est, a_vec, pool, a, t0=t).value
            fhs = fhs_var(sig_est, a_vec, pool, a, t0=t).value
            accum[a]["Spherical"].append((sph - truth[a]) ** 2)
            accum[a]["FHS"].append((fhs - truth[a]) ** 2)
            accum[a]["VHS"].append((vhs[a] - truth[a]) ** 2)


def _refilter(y: np.ndarray, cfit):
    from .mgarch import filter_sigma_path

    return filter_sigma_path(ReturnMatrix(y), cfit)


def run_design(spec: DesignSpec) -> RETable:
    """Score spherical / FHS / VHS against the theoretical VaR in MSE.

    Replication-level fit failures are excluded when they stay below 5% of
    the replications; beyond that the run aborts.
    """
    accum = {
        a: {"Spherical": [], "FHS": [], "VHS": []} for a in spec.alphas
    }
    failures = 0
    used = 0
    for rep in range(spec.n_reps):
        snapshot = {a: {k: len(v) for k, v in accum[a].items()} for a in accum}
        try:
            _run_design_replication(spec, rep, accum)
            used += 1
        except VhsvarError:
            failures += 1
            for a in accum:       # drop any partial contribution
                for k in accum[a]:
                    del accum[a][k][snapshot[a][k]:]
    if failures / spec.n_reps >= 0.05 and failures > 0:
        raise FitError(
            f"design {spec.design_id}: {failures}/{spec.n_reps} replications "
            "failed (>= 5%); aborting"
        )
    mse = {
        a: {k: float(np.mean(v)) for k, v in accum[a].items()}
        for a in accum
    }
    ratios = {
        a: {
            "fhs_over_s": mse[a]["FHS"] / mse[a]["Spherical"],
            "vhs_over_s": mse[a]["VHS"] / mse[a]["Spherical"],
        }
        for a in mse
    }
    traces = {
        a: {k: np.asarray(v) for k, v in accum[a].items()} for a in accum
    }
    return RETable(
        design_id=spec.design_id,
        mse=mse,
        ratios=ratios,
        n_reps_used=used,
        n_failures=failures,
        traces=traces,
        metadata={
            "n1": spec.n1,
            "n_predictions": spec.n_predictions,
            "seed": spec.seed,
            "params_refit": "held fixed after the estimation window",
        },
    )


# --------------------------------------------------------------------------
# Factor-model rolling backtest


_UNIVARIATE = ("naive-garch", "naive-empirical", "vhs")
_MULTIVARIATE = ("spherical", "fhs")
_METHOD_LABEL = {
    "naive-garch": "Naive",
    "naive-empirical": "NaiveEmpirical",
    "vhs": "VHS",
    "spherical": "Spherical",
    "fhs": "FHS",
}


def default_methods(m: int) -> tuple:
    methods = ["naive-garch", "vhs"]
    if m == 2:
        methods += ["spherical", "fhs"]
    return tuple(methods)


def alternating_weights(n: int, m: int, switch_period: int) -> np.ndarray:
    """Equal weights on the even-numbered assets, switching to the
    odd-numbered ones every ``switch_period`` observations (1-based asset
    numbering, so the first block loads columns 1, 3, ... of the panel)."""
    w = np.zeros((n, m))
    even_cols = np.arange(1, m, 2)   # assets 2, 4, ... (1-based)
    odd_cols = np.arange(0, m, 2)    # assets 1, 3, ...
    for t in range(n):
        block = (t // switch_period) % 2
        cols = even_cols if block == 0 else odd_cols
        w[t, cols] = 1.0 / len(cols)
    return w


def run_factor_backtest(
    m: int,
    window: int = 1000,
    horizon: int = 400,
    switch_period: int = 100,
    seed: int = 0,
    alpha: float = 0.05,
    methods: tuple | None = None,
    factor_params: FactorModelParams | None = None,
):
    """Rolling-window backtest of the VaR methods on a factor-model panel.

    Returns (reports, traces): one BacktestReport per method with a DM
    p-value against the naive method, and the per-date VaR sequences.
    """
    if m < 2:
        raise ValidationError("factor backtest needs at least 2 assets")
    if methods is None:
        methods = default_methods(m)
    methods = tuple(methods)
    for meth in methods:
        if meth not in _UNIVARIATE + _MULTIVARIATE:
            raise ValidationError(f"unknown method {meth!r}")
    multivariate = [meth for meth in methods if meth in _MULTIVARIATE]
    if multivariate and m > 8:
        raise UnsupportedFeatureError(
            f"multivariate methods support at most 8 assets, got m={m}"
        )
    if multivariate and m != 2:
        raise UnsupportedFeatureError(
            "multivariate methods require m=2: only bivariate cDCC "
            "estimation is implemented"
        )

    if factor_params is None:
        factor_params = FactorModelParams(m=m)
    n = window + horizon
    y = simulate_factor_model(factor_params, n, seed=seed).returns
    weights = alternating_weights(n, m, switch_period)
    r = np.sum(weights * y, axis=1)

    var_seqs = {meth: np.empty(horizon) for meth in methods}
    warm = {meth: None for meth in methods}
    corr_warm = None
    for k in range(horizon):
        t = window + k
        lo = t - window
        w_t = weights[t]
        if "naive-garch" in methods:
            fit = fit_qml(r[lo:t], start=warm["naive-garch"])
            warm["naive-garch"] = fit.theta_hat
            xi = residual_quantile(fit.residuals, alpha).xi
            var_seqs["naive-garch"][k] = -math.sqrt(fit.sigma2_next) * xi
        if "naive-empirical" in methods:
            var_seqs["naive-empirical"][k] = -residual_quantile(
                r[lo:t], alpha
            ).xi
        if "vhs" in methods:
            virtual = y[lo:t] @ w_t
            fit = fit_qml(virtual, start=warm["vhs"])
            warm["vhs"] = fit.theta_hat
            xi = residual_quantile(fit.residuals, alpha).xi
            var_seqs["vhs"][k] = -math.sqrt(fit.sigma2_next) * xi
        if multivariate:
            cfit = fit_cdcc_bivariate(
                ReturnMatrix(y[lo:t]), start_corr=corr_warm
            )
            corr_warm = (cfit.params.alpha_c, cfit.params.beta_c)
            sig = cfit.sigma_path.matrix(-1)
            if "spherical" in methods:
                var_seqs["spherical"][k] = spherical_var(
                    sig, w_t, cfit.residuals, alpha, t0=t
                ).value
            if "fhs" in methods:
                var_seqs["fhs"][k] = fhs_var(
                    sig, w_t, cfit.residuals, alpha, t0=t
                ).value

    r_eval = r[window:]
    episode = f"m={m}"
    naive_loss = None
    if "naive-garch" in methods:
        naive_loss = loss_series(r_eval, var_seqs["naive-garch"], alpha)
    reports = []
    for meth in methods:
        ref = naive_loss if meth != "naive-garch" else None
        reports.append(
            summarize(
                r_eval, var_seqs[meth], alpha,
                method=_METHOD_LABEL[meth], episode=episode,
                reference_loss=ref,
            )
        )
    traces = {
        "returns": r_eval,
        "weights": weights[window:],
        "var": var_seqs,
        "metadata": {
            "m": m, "window": window, "horizon": horizon,
            "switch_period": switch_period, "seed": seed, "alpha": alpha,
        },
    }
    return reports, traces


# --------------------------------------------------------------------------
# Static iid world, crystallized portfolio


@dataclass(frozen=True)
class StaticPathBundle:
    """Per-date traces of the crystallized-portfolio illustration."""

    weights: np.ndarray        # (n+1, 3) composition path
    returns: np.ndarray        # (n,) portfolio returns
    true_var: np.ndarray       # (n,) theoretical conditional VaR
    naive: np.ndarray          # NaN before the start index
    spherical: np.ndarray
    fhs: np.ndarray
    vhs: np.ndarray
    start: int
    alpha: float


STATIC_D = np.diag([0.01, 0.02, 0.04])
STATIC_R = np.array([
    [1.0, -0.855, 0.855],
    [-0.855, 1.0, -0.810],
    [0.855, -0.810, 1.0],
])


def _sym_sqrt(mat: np.ndarray) -> np.ndarray:
    vals, vecs = np.linalg.eigh(mat)
    return (vecs * np.sqrt(np.clip(vals, 0.0, None))) @ vecs.T


def run_static_crystallized(
    seed: int = 0,
    n: int = 5000,
    alpha: float = 0.05,
    start: int = 100,
    compute_estimates: bool = True,
) -> StaticPathBundle:
    """Crystallized equal-unit portfolio of 3 iid Gaussian assets.

    The log-return covariance is D R D with the fixed D, R above; prices
    start at 1000 with one unit held per asset.  Quantile estimates begin
    at ``start`` observations of history.  In this constant-volatility
    world the FHS estimator reduces to the virtual-return quantile and
    coincides with VHS exactly.
    """
    if start < math.ceil(1.0 / alpha):
        raise ValidationError("start index too small for the quantile level")
    rng = np.random.default_rng(seed)
    cov = STATIC_D @ STATIC_R @ STATIC_D
    sig = _sym_sqrt(cov)
    y = rng.standard_normal((n, 3)) @ sig.T

    # crystallized weights: one unit of each asset, prices drift with y
    logp = np.vstack([np.zeros(3), np.cumsum(y, axis=0)])
    p = 1000.0 * np.exp(logp)
    weights = p / p.sum(axis=1, keepdims=True)

    r = np.sum(weights[:-1] * y, axis=1)
    true_var = -norm.ppf(alpha) * np.sqrt(
        np.einsum("ti,ij,tj->t", weights[:-1], cov, weights[:-1])
    )

    naive = np.full(n, np.nan)
    spherical = np.full(n, np.nan)
    fhs = np.full(n, np.nan)
    if compute_estimates:
        for t in range(start, n):
            a_vec = weights[t]
            hist = y[:t]
            naive[t] = -residual_quantile(r[:t], alpha).xi
            fhs[t] = -residual_quantile(hist @ a_vec, alpha).xi
            cov_hat = np.cov(hist, rowvar=False)
            sig_hat = _sym_sqrt(cov_hat)
            whitened = np.linalg.solve(sig_hat, hist.T).T
            spherical[t] = spherical_var(sig_hat, a_vec, whitened, alpha).value
    return StaticPathBundle(
        weights=weights,
        returns=r,
        true_var=true_var,
        naive=naive,
        spherical=spherical,
        fhs=fhs,
        vhs=fhs.copy(),       # constant volatility: VHS coincides with FHS
        start=start,
        alpha=alpha,
    )
