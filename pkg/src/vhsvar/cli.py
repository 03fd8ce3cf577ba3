"""Command-line interface: var, backtest, simulate and experiment commands.

Configuration can come from a line-oriented ``key=value`` file ('#' starts
a comment); command-line flags override file values.  All outputs are
deterministic given config + seed and land under the chosen output
directory.  Exit codes: 0 ok, 1 runtime/fit failure, 2 validation,
3 I/O, 4 unsupported feature.
"""

from __future__ import annotations

import argparse
import csv
import sys
from pathlib import Path

import numpy as np

from . import inference, vhs
from .backtest import report_rows, summarize, loss_series
from .errors import (
    DataError,
    DegeneratePortfolioError,
    FitError,
    UnsupportedFeatureError,
    ValidationError,
    VhsvarError,
)
from .garch import check_lemma2_conditions
from .portfolio import (
    Crystallized,
    MinVariance,
    RebalancedEvery,
    Static,
    compute_log_returns,
    evolve_composition,
    load_prices_csv,
    portfolio_returns,
    save_prices_csv,
    PriceMatrix,
)

EXIT_OK = 0
EXIT_RUNTIME = 1
EXIT_VALIDATION = 2
EXIT_IO = 3
EXIT_UNSUPPORTED = 4


# --------------------------------------------------------------------------
# Config plumbing


def read_config(path: str) -> dict:
    """Parse a key=value config file with '#' comments."""
    out = {}
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise IOError(f"cannot read config file {path}: {exc}") from exc
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValidationError(f"{path}:{lineno}: expected key=value")
        key, value = line.split("=", 1)
        out[key.strip().replace("-", "_")] = value.strip()
    return out


def merge_config(args: argparse.Namespace, parser_defaults: dict) -> dict:
    """Flags override config-file values, which override defaults."""
    merged = dict(parser_defaults)
    if getattr(args, "config", None):
        file_cfg = read_config(args.config)
        unknown = set(file_cfg) - set(parser_defaults)
        if unknown:
            raise ValidationError(
                "unknown config keys: " + ", ".join(sorted(unknown))
            )
        merged.update(file_cfg)
    for key, value in vars(args).items():
        if key in merged and value is not None:
            merged[key] = value
    return merged


def _collect(problems: list, condition: bool, message: str) -> None:
    if condition:
        problems.append(message)


def _finish_validation(problems: list) -> None:
    if problems:
        raise ValidationError(
            "invalid configuration:\n  " + "\n  ".join(problems)
        )


def parse_policy(spec: str, m: int):
    """Policy strings: static:equal | static:w1,w2 | crystallized:equal |
    crystallized:u1,u2 | rebalanced:PERIOD:w1,w2 | minvariance[:WINDOW]."""
    parts = spec.split(":")
    kind = parts[0]
    if kind == "static":
        if len(parts) != 2:
            raise ValidationError(f"policy {spec!r}: expected static:WEIGHTS")
        w = _weights(parts[1], m)
        return Static(w)
    if kind == "crystallized":
        if len(parts) != 2:
            raise ValidationError(f"policy {spec!r}: expected crystallized:UNITS")
        if parts[1] == "equal":
            return Crystallized(np.ones(m))
        return Crystallized(_floats(parts[1], m))
    if kind == "rebalanced":
        if len(parts) != 3:
            raise ValidationError(
                f"policy {spec!r}: expected rebalanced:PERIOD:WEIGHTS"
            )
        return RebalancedEvery(int(parts[1]), _weights(parts[2], m))
    if kind == "minvariance":
        window = int(parts[1]) if len(parts) > 1 else 250
        return MinVariance(window=window)
    raise ValidationError(f"unknown policy kind {kind!r}")


def _weights(text: str, m: int) -> np.ndarray:
    if text == "equal":
        return np.full(m, 1.0 / m)
    return _floats(text, m)


def _floats(text: str, m: int) -> np.ndarray:
    try:
        vals = np.array([float(v) for v in text.split(",")])
    except ValueError:
        raise ValidationError(f"cannot parse number list {text!r}") from None
    if vals.shape != (m,):
        raise ValidationError(
            f"expected {m} values for {m} assets, got {vals.shape[0]}"
        )
    return vals


def _resolve_t0(spec_value, prices: PriceMatrix) -> int:
    """'last' means the first unobserved period; a date targets its return row."""
    if spec_value in (None, "last"):
        return prices.n_dates - 1
    import datetime as _dt

    try:
        date = _dt.date.fromisoformat(str(spec_value))
    except ValueError:
        raise ValidationError(f"t0 must be 'last' or an ISO date, got {spec_value!r}")
    for idx, d in enumerate(prices.dates):
        if d == date:
            if idx == 0:
                raise ValidationError("t0 cannot be the first date")
            return idx
    raise ValidationError(f"date {spec_value} not present in the panel")


def _write_csv(path: Path, rows) -> None:
    with open(path, "w", newline="") as fh:
        csv.writer(fh).writerows(rows)


# --------------------------------------------------------------------------
# var command


def cmd_var(cfg: dict) -> int:
    problems = []
    alpha = float(cfg["alpha"])
    alpha0 = float(cfg["alpha0"])
    _collect(problems, not 0 < alpha < 0.5, f"alpha {alpha} outside (0, 0.5)")
    _collect(problems, not 0 < alpha0 < 1, f"alpha0 {alpha0} outside (0, 1)")
    method = cfg["method"]
    _collect(
        problems,
        method not in ("vhs", "naive-garch", "naive-empirical"),
        f"unknown method {method!r}",
    )
    window = cfg["window"]
    _collect(
        problems, window not in ("expanding", "rolling"),
        f"window must be expanding or rolling, got {window!r}",
    )
    _collect(problems, not cfg.get("prices"), "missing --prices")
    _finish_validation(problems)

    prices = load_prices_csv(cfg["prices"])
    policy = parse_policy(cfg["policy"], prices.n_assets)
    t0 = _resolve_t0(cfg.get("t0"), prices)
    kwargs = {"window": window}
    if cfg.get("rolling_length"):
        kwargs["rolling_length"] = int(cfg["rolling_length"])

    returns = compute_log_returns(prices)
    comp = evolve_composition(prices, policy)
    lines = []
    rows = [["key", "value"]]
    if method == "naive-empirical":
        r = portfolio_returns(returns, comp)
        est = vhs.naive_empirical_var(r, alpha, t0=t0)
        ci = None
    else:
        fn = (
            vhs.vhs_var_from_returns
            if method == "vhs"
            else vhs.naive_garch_var_from_returns
        )
        est = fn(returns, comp, alpha, t0, **kwargs)
        fit = est.fit
        if not fit.converged:
            raise FitError("volatility fit did not converge")
        sa = inference.sigma_alpha_from_fit(fit, alpha)
        ci = inference.var_confidence_interval(fit, sa, alpha, level=1.0 - alpha0)
        theta = fit.theta_hat
        lemma = check_lemma2_conditions(theta, fit.residuals)
        sigma_next = est.sigma_next
        delta = np.concatenate(
            [sa.xi * fit.dsigma2_next / (2.0 * sigma_next), [sigma_next]]
        )
        rows += [
            ["theta_omega", repr(theta.omega)],
            ["theta_alpha", repr(theta.alpha)],
            ["theta_beta", repr(theta.beta)],
            ["xi_alpha", repr(sa.xi)],
            ["sigma_next", repr(sigma_next)],
            ["ci_lower", repr(ci.lower)],
            ["ci_upper", repr(ci.upper)],
            ["ci_level", repr(ci.level)],
            ["std_error", repr(ci.std_error)],
            ["zeta", repr(sa.zeta)],
            ["f_bar", repr(sa.f_bar)],
        ]
        rows += [[f"delta_{i}", repr(float(v))] for i, v in enumerate(delta)]
        for i in range(3):
            for j in range(3):
                rows.append([f"vtheta_{i}{j}", repr(float(sa.v_theta[i, j]))])
            rows.append([f"lambda_{i}", repr(float(sa.lam[i]))])
        rows += [
            ["lemma2_log_moment", repr(lemma.log_moment)],
            ["lemma2_stationary", str(lemma.strictly_stationary)],
            ["lemma2_nondegenerate", str(lemma.non_degenerate)],
            ["lemma2_in_box", str(lemma.in_box)],
        ]
        lines.append(
            f"theta_hat = (omega={theta.omega:.6g}, alpha={theta.alpha:.6g}, "
            f"beta={theta.beta:.6g})"
        )
        lines.append(
            f"{100 * (1 - alpha0):g}% CI: [{ci.lower:.6g}, {ci.upper:.6g}]"
        )
    rows.insert(1, ["method", est.method])
    rows.insert(2, ["alpha", repr(alpha)])
    rows.insert(3, ["t0_index", str(t0)])
    rows.insert(4, ["var", repr(est.value)])
    lines.insert(0, f"{est.method} VaR(alpha={alpha:g}) at t0={t0}: {est.value:.6g}")

    out = Path(cfg["out"])
    out.mkdir(parents=True, exist_ok=True)
    _write_csv(out / "var_report.csv", rows)
    (out / "var_summary.txt").write_text("\n".join(lines) + "\n")
    print("\n".join(lines))
    return EXIT_OK


# --------------------------------------------------------------------------
# backtest command


def cmd_backtest(cfg: dict) -> int:
    problems = []
    alpha = float(cfg["alpha"])
    _collect(problems, not 0 < alpha < 0.5, f"alpha {alpha} outside (0, 0.5)")
    methods = tuple(m.strip() for m in str(cfg["methods"]).split(",") if m.strip())
    known = ("naive-garch", "naive-empirical", "vhs", "spherical", "fhs")
    for m in methods:
        _collect(problems, m not in known, f"unknown method {m!r}")
    _collect(problems, not methods, "no methods requested")
    _collect(problems, not cfg.get("prices"), "missing --prices")
    window = int(cfg["window_length"])
    _collect(problems, window < 100, f"window length {window} too small")
    _finish_validation(problems)

    prices = load_prices_csv(cfg["prices"])
    m_assets = prices.n_assets
    multivariate = [m for m in methods if m in ("spherical", "fhs")]
    if multivariate and m_assets > 8:
        raise UnsupportedFeatureError(
            f"multivariate methods support at most 8 assets, got m={m_assets}"
        )
    if multivariate and m_assets != 2:
        raise UnsupportedFeatureError(
            "multivariate methods require m=2: only bivariate cDCC "
            "estimation is implemented"
        )
    policy = parse_policy(cfg["policy"], m_assets)
    returns = compute_log_returns(prices)
    comp = evolve_composition(prices, policy)
    y = returns.returns
    n = y.shape[0]
    horizon = n - window
    if horizon < 100:
        raise ValidationError(
            f"only {horizon} evaluation points after a {window}-long window; "
            "need at least 100"
        )
    r = portfolio_returns(returns, comp)

    from .garch import fit_qml, residual_quantile
    from .mgarch import fhs_var, fit_cdcc_bivariate, spherical_var
    from .portfolio import ReturnMatrix
    import math

    var_seqs = {m: np.empty(horizon) for m in methods}
    warm = {m: None for m in methods}
    corr_warm = None
    for k in range(horizon):
        t = window + k
        lo = t - window
        w_t = comp.weights[t]
        if "naive-garch" in methods:
            fit = fit_qml(r[lo:t], start=warm["naive-garch"])
            warm["naive-garch"] = fit.theta_hat
            xi = residual_quantile(fit.residuals, alpha).xi
            var_seqs["naive-garch"][k] = -math.sqrt(fit.sigma2_next) * xi
        if "naive-empirical" in methods:
            var_seqs["naive-empirical"][k] = -residual_quantile(r[lo:t], alpha).xi
        if "vhs" in methods:
            fit = fit_qml(y[lo:t] @ w_t, start=warm["vhs"])
            warm["vhs"] = fit.theta_hat
            xi = residual_quantile(fit.residuals, alpha).xi
            var_seqs["vhs"][k] = -math.sqrt(fit.sigma2_next) * xi
        if multivariate:
            cfit = fit_cdcc_bivariate(ReturnMatrix(y[lo:t]), start_corr=corr_warm)
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
    reference = cfg.get("reference")
    ref_loss = None
    if reference and len(methods) > 1:
        if reference not in methods:
            raise ValidationError(
                f"reference method {reference!r} not among requested methods"
            )
        ref_loss = loss_series(r_eval, var_seqs[reference], alpha)
    reports = []
    for m in methods:
        ref = ref_loss if (ref_loss is not None and m != reference) else None
        reports.append(
            summarize(r_eval, var_seqs[m], alpha, method=m,
                      episode=Path(cfg["prices"]).name, reference_loss=ref)
        )
    out = Path(cfg["out"])
    out.mkdir(parents=True, exist_ok=True)
    _write_csv(out / "backtest_report.csv", report_rows(reports))
    var_rows = [["k", *methods]]
    for k in range(horizon):
        var_rows.append([str(k), *[repr(float(var_seqs[m][k])) for m in methods]])
    _write_csv(out / "backtest_var_paths.csv", var_rows)
    for rep in reports:
        print(
            f"{rep.method}: viol={rep.viol_pct:.2f}% var_bar={rep.var_bar:.4g} "
            f"loss={rep.loss:.4g}"
            + (f" dm_p={rep.dm_p:.4g}" if rep.dm_p is not None else "")
        )
    return EXIT_OK


# --------------------------------------------------------------------------
# simulate command


def cmd_simulate(cfg: dict) -> int:
    problems = []
    n = int(cfg["n"])
    seed = int(cfg["seed"])
    burn_in = int(cfg["burn_in"])
    _collect(problems, n < 2, f"n must be at least 2, got {n}")
    _collect(problems, burn_in < 500, f"burn_in must be at least 500, got {burn_in}")
    _collect(problems, not cfg.get("design"), "missing --design")
    _finish_validation(problems)

    from .mgarch import design_params, simulate_cdcc

    design_id = str(cfg["design"]).replace("star", "*")
    params, innovation = design_params(design_id)
    returns = simulate_cdcc(
        params, n, innovation=innovation, burn_in=burn_in, seed=seed
    )
    # returns-to-prices: cumulate log-returns from a base price of 100
    import datetime as _dt

    y = returns.returns
    logp = np.vstack([np.zeros(y.shape[1]), np.cumsum(y, axis=0)])
    prices_arr = 100.0 * np.exp(logp)
    base = _dt.date(2000, 1, 1)
    dates = tuple(base + _dt.timedelta(days=i) for i in range(n + 1))
    matrix = PriceMatrix(dates=dates, prices=prices_arr)

    out = Path(cfg["out"])
    out.mkdir(parents=True, exist_ok=True)
    save_prices_csv(out / "panel.csv", matrix)
    meta = [
        f"design={design_id}",
        f"n={n}",
        f"seed={seed}",
        f"burn_in={burn_in}",
        f"innovation={innovation}",
        f"omega={','.join(repr(v) for v in params.omega)}",
        f"vecA={','.join(repr(v) for v in params.A.flatten(order='F'))}",
        f"diagB={','.join(repr(v) for v in params.B)}",
        f"s12={params.s12!r}",
        f"alpha_c={params.alpha_c!r}",
        f"beta_c={params.beta_c!r}",
    ]
    (out / "panel.meta").write_text("\n".join(meta) + "\n")
    print(f"wrote {n}x{y.shape[1]} panel for design {design_id} to {out / 'panel.csv'}")
    return EXIT_OK


# --------------------------------------------------------------------------
# experiment command


def cmd_experiment(cfg: dict) -> int:
    from .experiments import (
        DesignSpec,
        run_design,
        run_factor_backtest,
        run_static_crystallized,
    )

    problems = []
    table = str(cfg["table"])
    _collect(
        problems, table not in ("1", "2", "static"),
        f"table must be 1, 2 or static, got {table!r}",
    )
    scale = cfg["scale"]
    _collect(
        problems, scale not in ("desk", "full"),
        f"scale must be desk or full, got {scale!r}",
    )
    seed = int(cfg["seed"])
    _finish_validation(problems)
    out = Path(cfg["out"])
    out.mkdir(parents=True, exist_ok=True)

    if table == "1":
        designs = [
            d.strip().replace("star", "*")
            for d in str(cfg["designs"]).split(",") if d.strip()
        ]
        factory = DesignSpec.desk if scale == "desk" else DesignSpec.full
        rows = [["design", "alpha", "mse_s", "mse_fhs", "mse_vhs",
                 "fhs_over_s", "vhs_over_s", "n_reps_used", "n_failures"]]
        for d in designs:
            spec = factory(d, seed=seed)
            tab = run_design(spec)
            for a in spec.alphas:
                rows.append([
                    d, repr(a),
                    repr(tab.mse[a]["Spherical"]), repr(tab.mse[a]["FHS"]),
                    repr(tab.mse[a]["VHS"]),
                    repr(tab.ratios[a]["fhs_over_s"]),
                    repr(tab.ratios[a]["vhs_over_s"]),
                    str(tab.n_reps_used), str(tab.n_failures),
                ])
            for a in spec.alphas:
                trace_rows = [["Spherical", "FHS", "VHS"]]
                tr = tab.traces[a]
                for i in range(len(tr["Spherical"])):
                    trace_rows.append([
                        repr(float(tr[k][i])) for k in ("Spherical", "FHS", "VHS")
                    ])
                _write_csv(out / f"re_trace_{d}_{a}.csv", trace_rows)
        _write_csv(out / "re_table.csv", rows)
        print(f"wrote {out / 're_table.csv'}")
        return EXIT_OK

    if table == "2":
        m = int(cfg["m"])
        horizon = 400 if scale == "desk" else 2000
        reports, traces = run_factor_backtest(
            m, window=int(cfg["window_length"]), horizon=horizon, seed=seed
        )
        _write_csv(out / "backtest_table.csv", report_rows(reports))
        var_rows = [["k", *traces["var"].keys()]]
        for k in range(horizon):
            var_rows.append(
                [str(k)] + [repr(float(v[k])) for v in traces["var"].values()]
            )
        _write_csv(out / "backtest_var_paths.csv", var_rows)
        print(f"wrote {out / 'backtest_table.csv'}")
        return EXIT_OK

    n = 5000 if scale == "desk" else 10000
    bundle = run_static_crystallized(seed=seed, n=n)
    rows = [["t", "w1", "w2", "w3", "return", "true_var",
             "naive", "spherical", "fhs", "vhs"]]
    for t in range(n):
        rows.append([
            str(t),
            *[repr(float(v)) for v in bundle.weights[t]],
            repr(float(bundle.returns[t])),
            repr(float(bundle.true_var[t])),
            repr(float(bundle.naive[t])),
            repr(float(bundle.spherical[t])),
            repr(float(bundle.fhs[t])),
            repr(float(bundle.vhs[t])),
        ])
    _write_csv(out / "static_paths.csv", rows)
    print(f"wrote {out / 'static_paths.csv'}")
    return EXIT_OK


# --------------------------------------------------------------------------
# entry point


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="vhsvar",
        description=(
            "Conditional VaR for dynamic portfolios via virtual returns. "
            "Exit codes: 0 ok, 1 runtime/fit failure, 2 validation, "
            "3 I/O, 4 unsupported feature."
        ),
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("var", help="one-shot VaR estimate with CI")
    p.add_argument("--config")
    p.add_argument("--prices")
    p.add_argument("--policy", default=None)
    p.add_argument("--alpha", default=None)
    p.add_argument("--alpha0", default=None)
    p.add_argument("--t0", default=None)
    p.add_argument("--method", default=None)
    p.add_argument("--window", default=None)
    p.add_argument("--rolling-length", dest="rolling_length", default=None)
    p.add_argument("--out", default=None)
    p.set_defaults(
        func=cmd_var,
        defaults={
            "prices": None, "policy": "static:equal", "alpha": "0.05",
            "alpha0": "0.10", "t0": "last", "method": "vhs",
            "window": "expanding", "rolling_length": None, "out": ".",
        },
    )

    p = sub.add_parser("backtest", help="rolling backtest of VaR methods")
    p.add_argument("--config")
    p.add_argument("--prices")
    p.add_argument("--policy", default=None)
    p.add_argument("--alpha", default=None)
    p.add_argument("--methods", default=None)
    p.add_argument("--reference", default=None)
    p.add_argument("--window-length", dest="window_length", default=None)
    p.add_argument("--out", default=None)
    p.set_defaults(
        func=cmd_backtest,
        defaults={
            "prices": None, "policy": "static:equal", "alpha": "0.05",
            "methods": "vhs,naive-garch", "reference": "naive-garch",
            "window_length": "1000", "out": ".",
        },
    )

    p = sub.add_parser("simulate", help="simulate a design panel to CSV")
    p.add_argument("--config")
    p.add_argument("--design")
    p.add_argument("--n", default=None)
    p.add_argument("--seed", default=None)
    p.add_argument("--burn-in", dest="burn_in", default=None)
    p.add_argument("--out", default=None)
    p.set_defaults(
        func=cmd_simulate,
        defaults={
            "design": None, "n": "2000", "seed": "0", "burn_in": "500",
            "out": ".",
        },
    )

    p = sub.add_parser("experiment", help="run a Monte Carlo study")
    p.add_argument("--config")
    p.add_argument("--table", default=None)
    p.add_argument("--designs", default=None)
    p.add_argument("--m", default=None)
    p.add_argument("--scale", default=None)
    p.add_argument("--seed", default=None)
    p.add_argument("--window-length", dest="window_length", default=None)
    p.add_argument("--out", default=None)
    p.set_defaults(
        func=cmd_experiment,
        defaults={
            "table": "1", "designs": "C,E", "m": "2", "scale": "desk",
            "seed": "0", "window_length": "1000", "out": ".",
        },
    )
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = merge_config(args, args.defaults)
        return args.func(cfg)
    except UnsupportedFeatureError as exc:
        print(f"unsupported: {exc}", file=sys.stderr)
        return EXIT_UNSUPPORTED
    except (ValidationError, DataError) as exc:
        print(f"invalid input: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except (IOError, OSError) as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (FitError, DegeneratePortfolioError, VhsvarError) as exc:
        print(f"run failed: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
