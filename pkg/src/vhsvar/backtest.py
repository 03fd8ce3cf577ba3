"""VaR backtests: violation counting, likelihood-ratio tests, loss scores.

Conventions: VaR is positive-oriented, a violation is r_t < -VaR_t (a tie
r_t = -VaR_t does not count).  Likelihood-ratio statistics drop 0*log(0)
terms; degenerate samples (no violations, zero-variance loss differential)
are reported with p-value 1 and an explicit flag rather than NaN.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.stats import chi2, norm

from .errors import ValidationError


@dataclass(frozen=True)
class ViolationSeries:
    hits: np.ndarray           # boolean, aligned with the evaluation window
    alpha: float

    @property
    def count(self) -> int:
        return int(self.hits.sum())

    @property
    def rate(self) -> float:
        return float(self.hits.mean())


@dataclass(frozen=True)
class ChristoffersenResult:
    lr_uc: float
    lr_ind: float
    lr_cc: float
    p_uc: float
    p_ind: float
    p_cc: float
    degenerate: bool = False


@dataclass(frozen=True)
class ScoreSummary:
    viol_pct: float
    var_bar: float
    av: float | None           # average violation depth; None without hits
    es: float | None           # empirical expected shortfall; None without hits
    loss: float                # mean asymmetric tick loss


@dataclass(frozen=True)
class DmResult:
    stat: float
    p_value: float
    degenerate: bool = False


@dataclass(frozen=True)
class BacktestReport:
    """One evaluated (method, episode) cell of a backtest table."""

    method: str
    episode: str
    viol_pct: float
    lr_uc_p: float
    lr_ind_p: float
    lr_cc_p: float
    var_bar: float
    av: float | None
    es: float | None
    loss: float
    dm_p: float | None = None

    def __post_init__(self):
        for p in (self.lr_uc_p, self.lr_ind_p, self.lr_cc_p):
            if not 0.0 <= p <= 1.0:
                raise ValidationError(f"p-value {p} outside [0, 1]")
        if not 0.0 <= self.viol_pct <= 100.0:
            raise ValidationError(f"violation rate {self.viol_pct} outside [0, 100]")


# Table layout: Viol, LRuc, LRind, LRcc, VaR-bar, AV, ES, Loss, DM; the LR
# columns carry raw p-values, with percentage duplicates appended to avoid
# the raw-vs-percent ambiguity.
REPORT_COLUMNS = (
    "episode", "method", "viol_pct", "lr_uc", "lr_ind", "lr_cc",
    "var_bar", "av", "es", "loss", "dm",
    "lr_uc_pct", "lr_ind_pct", "lr_cc_pct",
)


def _cell(value) -> str:
    return "" if value is None else repr(float(value))


def report_rows(reports) -> list:
    """Serialize BacktestReports into CSV rows under REPORT_COLUMNS."""
    rows = [list(REPORT_COLUMNS)]
    for r in reports:
        rows.append([
            r.episode, r.method, _cell(r.viol_pct),
            _cell(r.lr_uc_p), _cell(r.lr_ind_p), _cell(r.lr_cc_p),
            _cell(r.var_bar), _cell(r.av), _cell(r.es), _cell(r.loss),
            _cell(r.dm_p),
            _cell(100.0 * r.lr_uc_p), _cell(100.0 * r.lr_ind_p),
            _cell(100.0 * r.lr_cc_p),
        ])
    return rows


def summarize(
    r: np.ndarray,
    var_seq: np.ndarray,
    alpha: float,
    method: str,
    episode: str = "",
    reference_loss: np.ndarray | None = None,
) -> BacktestReport:
    """Full evaluation of one VaR sequence, optionally DM-tested against a
    reference method's per-date losses.

    ``reference_loss`` is the reference method's loss_series output.  The
    DM comparison runs on the positively-oriented tick loss (the negation
    of the reported Loss column), so a small p-value means this method
    improves on the reference.
    """
    series = violations(r, var_seq, alpha)
    lr = christoffersen_tests(series)
    scores = av_es_loss(r, var_seq, alpha)
    dm_p = None
    if reference_loss is not None:
        dm_p = dm_test(-np.asarray(reference_loss),
                       -loss_series(r, var_seq, alpha)).p_value
    return BacktestReport(
        method=method,
        episode=episode,
        viol_pct=scores.viol_pct,
        lr_uc_p=lr.p_uc,
        lr_ind_p=lr.p_ind,
        lr_cc_p=lr.p_cc,
        var_bar=scores.var_bar,
        av=scores.av,
        es=scores.es,
        loss=scores.loss,
        dm_p=dm_p,
    )


def violations(r: np.ndarray, var_seq: np.ndarray, alpha: float) -> ViolationSeries:
    """Mark the dates where the realized return breaches -VaR."""
    r = np.asarray(r, dtype=np.float64)
    v = np.asarray(var_seq, dtype=np.float64)
    if r.shape != v.shape or r.ndim != 1:
        raise ValidationError("returns and VaR sequences must be aligned 1-d")
    if not 0 < alpha < 1:
        raise ValidationError(f"alpha must be in (0,1), got {alpha}")
    return ViolationSeries(hits=r < -v, alpha=alpha)


def _xlogy(x: float, y: float) -> float:
    return 0.0 if x == 0 else x * math.log(y)


def christoffersen_tests(series: ViolationSeries) -> ChristoffersenResult:
    """Unconditional coverage, independence and conditional coverage LR tests.

    LRuc compares the hit rate with the nominal level (chi2, 1 dof); LRind
    tests first-order Markov dependence of the hit sequence (chi2, 1 dof);
    LRcc = LRuc + LRind (chi2, 2 dof).  An all-zero or all-one hit sequence
    makes the independence test vacuous: its statistic is 0 and the result
    is flagged degenerate.
    """
    hits = np.asarray(series.hits, dtype=bool)
    alpha = series.alpha
    n = hits.shape[0]
    if n < 2:
        raise ValidationError("need at least 2 observations to backtest")
    n1 = int(hits.sum())
    n0 = n - n1
    pi_hat = n1 / n

    lr_uc = -2.0 * (
        _xlogy(n0, 1.0 - alpha) + _xlogy(n1, alpha)
        - _xlogy(n0, 1.0 - pi_hat if n0 else 1.0)
        - _xlogy(n1, pi_hat if n1 else 1.0)
    )

    prev = hits[:-1]
    cur = hits[1:]
    n00 = int(np.sum(~prev & ~cur))
    n01 = int(np.sum(~prev & cur))
    n10 = int(np.sum(prev & ~cur))
    n11 = int(np.sum(prev & cur))
    degenerate = n1 == 0 or n0 == 0

    if degenerate or (n00 + n01) == 0 or (n10 + n11) == 0:
        lr_ind = 0.0
        p_ind = 1.0
        degenerate = True
    else:
        pi01 = n01 / (n00 + n01)
        pi11 = n11 / (n10 + n11)
        pi1 = (n01 + n11) / (n - 1)
        ll_alt = (
            _xlogy(n00, 1.0 - pi01 if pi01 < 1 else 1.0)
            + _xlogy(n01, pi01 if pi01 > 0 else 1.0)
            + _xlogy(n10, 1.0 - pi11 if pi11 < 1 else 1.0)
            + _xlogy(n11, pi11 if pi11 > 0 else 1.0)
        )
        ll_null = (
            _xlogy(n00 + n10, 1.0 - pi1 if pi1 < 1 else 1.0)
            + _xlogy(n01 + n11, pi1 if pi1 > 0 else 1.0)
        )
        lr_ind = max(-2.0 * (ll_null - ll_alt), 0.0)
        p_ind = float(chi2.sf(lr_ind, 1))

    lr_uc = max(lr_uc, 0.0)
    lr_cc = lr_uc + lr_ind
    return ChristoffersenResult(
        lr_uc=lr_uc,
        lr_ind=lr_ind,
        lr_cc=lr_cc,
        p_uc=float(chi2.sf(lr_uc, 1)),
        p_ind=p_ind,
        p_cc=float(chi2.sf(lr_cc, 2)),
        degenerate=degenerate,
    )


def loss_series(r: np.ndarray, var_seq: np.ndarray, alpha: float) -> np.ndarray:
    """Per-date asymmetric tick loss -(r_t + VaR_t)(alpha - 1{hit_t})."""
    r = np.asarray(r, dtype=np.float64)
    v = np.asarray(var_seq, dtype=np.float64)
    if r.shape != v.shape:
        raise ValidationError("returns and VaR sequences must be aligned")
    hit = (r < -v).astype(np.float64)
    return -(r + v) * (alpha - hit)


def av_es_loss(r: np.ndarray, var_seq: np.ndarray, alpha: float) -> ScoreSummary:
    """Violation rate, mean VaR, violation depth, shortfall and tick loss.

    AV averages the exceedance depth -(r + VaR) over violation dates; ES
    averages -r over the same dates.  Both are undefined (None) when no
    violation occurred.
    """
    r = np.asarray(r, dtype=np.float64)
    v = np.asarray(var_seq, dtype=np.float64)
    hits = r < -v
    k = int(hits.sum())
    av = float(np.mean(-(r[hits] + v[hits]))) if k else None
    es = float(np.mean(-r[hits])) if k else None
    return ScoreSummary(
        viol_pct=100.0 * k / r.shape[0],
        var_bar=float(np.mean(v)),
        av=av,
        es=es,
        loss=float(np.mean(loss_series(r, v, alpha))),
    )


def dm_test(loss_a: np.ndarray, loss_b: np.ndarray,
            bandwidth: int | None = None) -> DmResult:
    """One-sided Diebold-Mariano comparison of two per-date loss series.

    The statistic is mean(d) / sqrt(lrv(d)/n) with d = loss_a - loss_b and
    a Bartlett HAC long-run variance (bandwidth floor(n^(1/3)) unless
    given).  The p-value is the upper normal tail: small values reject
    equal accuracy in favor of method b.  A zero long-run variance is
    flagged degenerate; the p-value then follows the sign of the mean
    differential (constant positive difference: stat -> +inf, p = 0;
    identical losses: p = 1).
    """
    a = np.asarray(loss_a, dtype=np.float64)
    b = np.asarray(loss_b, dtype=np.float64)
    if a.shape != b.shape or a.ndim != 1:
        raise ValidationError("loss series must be aligned 1-d arrays")
    d = a - b
    n = d.shape[0]
    if n < 2:
        raise ValidationError("need at least 2 loss observations")
    if bandwidth is None:
        bandwidth = int(n ** (1.0 / 3.0))
    dc = d - d.mean()
    lrv = float(dc @ dc) / n
    for h in range(1, min(bandwidth, n - 1) + 1):
        w = 1.0 - h / (bandwidth + 1.0)
        lrv += 2.0 * w * float(dc[h:] @ dc[:-h]) / n
    if lrv <= 0:
        mean_d = float(d.mean())
        if mean_d > 0:
            return DmResult(stat=math.inf, p_value=0.0, degenerate=True)
        return DmResult(
            stat=-math.inf if mean_d < 0 else 0.0, p_value=1.0, degenerate=True
        )
    stat = float(d.mean() / math.sqrt(lrv / n))
    return DmResult(stat=stat, p_value=float(norm.sf(stat)))
