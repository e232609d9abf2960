"""Time-series modelling: STL decomposition, OLS baseline, SARIMAX with
exogenous weather regressors, AIC grid search and residual diagnostics.

SARIMAX is estimated in regression-with-SARIMA-errors form: the exogenous
effect is a linear term and the error follows a (seasonal) ARIMA process,
so exogenous coefficients read as demand change per unit regressor.
"""

from __future__ import annotations

import itertools
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy import stats as sstats
from statsmodels.tsa.seasonal import STL
from statsmodels.tsa.statespace.sarimax import SARIMAX
from statsmodels.stats.diagnostic import acorr_ljungbox
from statsmodels.tsa.stattools import acf as _sm_acf, pacf as _sm_pacf


class FitError(RuntimeError):
    """Estimation failed; .best carries the best attempt if any."""

    def __init__(self, message, best=None, diagnostics=None):
        super().__init__(message)
        self.best = best
        self.diagnostics = diagnostics or {}


@dataclass(frozen=True)
class ArimaSpec:
    p: int
    d: int
    q: int
    P: int = 0
    D: int = 0
    Q: int = 0
    s: int = 0
    exog_names: tuple = ()

    def __post_init__(self):
        if min(self.p, self.d, self.q, self.P, self.D, self.Q, self.s) < 0:
            raise ValueError("orders must be non-negative")
        if self.d + self.D > 2:
            raise ValueError("d + D must be <= 2")
        if self.s == 0 and (self.P or self.D or self.Q):
            raise ValueError("seasonal orders require s > 0")

    @property
    def order(self):
        return (self.p, self.d, self.q)

    @property
    def seasonal_order(self):
        return (self.P, self.D, self.Q, self.s)

    def key(self):
        return (self.p, self.d, self.q, self.P, self.D, self.Q, self.s)


@dataclass
class StlResult:
    trend: np.ndarray
    seasonal: np.ndarray
    remainder: np.ndarray
    period: int
    robust_iters: int


@dataclass
class ModelFit:
    spec: ArimaSpec | None
    beta: dict  # exogenous (and intercept) coefficients by name
    ar: list
    ma: list
    sar: list
    sma: list
    sigma2: float
    loglik: float
    aic: float
    rmse: float
    adj_r2: float
    residuals: np.ndarray
    std_errors: dict
    p_values: dict
    n_params: int
    n_obs: int
    converged: bool = True

    def coefficients(self):
        out = dict(self.beta)
        for name, vals in (("ar", self.ar), ("ma", self.ma),
                           ("sar", self.sar), ("sma", self.sma)):
            for lag, v in enumerate(vals, start=1):
                out[f"{name}.L{lag}"] = v
        out["sigma2"] = self.sigma2
        return out


def _values(series):
    vals = np.asarray(getattr(series, "values", series), dtype=float)
    if np.isnan(vals).any():
        raise ValueError("series contains NaN; impute upstream")
    return vals


def stl(series, period, seasonal_window=7, robust=False):
    """Seasonal-trend decomposition via repeated loess.

    The seasonal component is re-centred so it sums to zero over every
    full cycle; the removed per-cycle means move into the remainder.
    trend + seasonal + remainder reconstructs the input exactly.
    """
    vals = _values(series)
    if period < 2:
        raise ValueError("period must be >= 2")
    if len(vals) < 2 * period:
        raise ValueError(
            f"series length {len(vals)} is below the 2*period "
            f"requirement ({2 * period})")
    if seasonal_window % 2 == 0:
        raise ValueError("seasonal_window must be odd")
    res = STL(vals, period=period, seasonal=seasonal_window,
              robust=robust).fit()
    trend = np.asarray(res.trend, dtype=float)
    seasonal = np.asarray(res.seasonal, dtype=float).copy()
    for c in range(len(vals) // period):
        sl = slice(c * period, (c + 1) * period)
        seasonal[sl] -= seasonal[sl].mean()
    remainder = vals - trend - seasonal
    return StlResult(trend=trend, seasonal=seasonal, remainder=remainder,
                     period=period, robust_iters=10 if robust else 0)


def _gaussian_loglik(sse, n):
    sigma2 = sse / n
    return -0.5 * n * (np.log(2 * np.pi * sigma2) + 1.0)


def ols(y, X, names=None, add_intercept=True):
    """Ordinary least squares with Gaussian-likelihood AIC.

    X holds the regressors without an intercept column (one is added
    unless add_intercept=False). Rank deficiency raises naming the
    collinear columns.
    """
    y = np.asarray(y, dtype=float)
    X = np.atleast_2d(np.asarray(X, dtype=float))
    if X.shape[0] != len(y):
        X = X.T
    if names is None:
        names = [f"x{i + 1}" for i in range(X.shape[1])]
    if add_intercept:
        X = np.column_stack([np.ones(len(y)), X])
        names = ["intercept"] + list(names)
    n, k = X.shape
    _, R = np.linalg.qr(X)
    diag = np.abs(np.diag(R))
    bad = [names[i] for i in range(k) if diag[i] < 1e-10 * max(diag.max(), 1.0)]
    if bad:
        raise ValueError(f"rank-deficient design; collinear columns: {bad}")
    coef, _, _, _ = np.linalg.lstsq(X, y, rcond=None)
    resid = y - X @ coef
    sse = float(resid @ resid)
    sst = float(((y - y.mean()) ** 2).sum())
    loglik = _gaussian_loglik(sse, n)
    n_params = k + 1  # + sigma2
    aic = 2 * n_params - 2 * loglik
    r2 = 1.0 - sse / sst if sst > 0 else 1.0
    adj_r2 = 1.0 - (1.0 - r2) * (n - 1) / (n - k) if n > k else r2
    sigma2_hat = sse / (n - k) if n > k else np.nan
    cov = sigma2_hat * np.linalg.inv(X.T @ X)
    se = np.sqrt(np.diag(cov))
    with np.errstate(divide="ignore", invalid="ignore"):
        tvals = coef / se
    pvals = 2 * sstats.t.sf(np.abs(tvals), df=max(n - k, 1))
    return ModelFit(
        spec=None, beta=dict(zip(names, coef)), ar=[], ma=[], sar=[], sma=[],
        sigma2=sse / n, loglik=loglik, aic=aic,
        rmse=float(np.sqrt(sse / n)), adj_r2=adj_r2, residuals=resid,
        std_errors=dict(zip(names, se)), p_values=dict(zip(names, pvals)),
        n_params=n_params, n_obs=n)


def _extract_fit(res, spec, warmup):
    names = list(res.param_names)
    params = dict(zip(names, np.asarray(res.params, dtype=float)))
    se = dict(zip(names, np.asarray(res.bse, dtype=float)))
    pv = dict(zip(names, np.asarray(res.pvalues, dtype=float)))
    ar = [params[f"ar.L{i}"] for i in range(1, spec.p + 1)]
    ma = [params[f"ma.L{i}"] for i in range(1, spec.q + 1)]
    sar = [params[f"ar.S.L{i * spec.s}"] for i in range(1, spec.P + 1)]
    sma = [params[f"ma.S.L{i * spec.s}"] for i in range(1, spec.Q + 1)]
    beta = {k: v for k, v in params.items()
            if not (k.startswith(("ar.", "ma.")) or k == "sigma2")}
    resid = np.asarray(res.resid, dtype=float)[warmup:]
    y = np.asarray(res.model.endog, dtype=float).ravel()
    yd = y.copy()
    for _ in range(spec.d):
        yd = np.diff(yd)
    for _ in range(spec.D):
        yd = yd[spec.s:] - yd[:-spec.s]
    sse = float(resid @ resid)
    sst = float(((yd - yd.mean()) ** 2).sum())
    nd, k = len(yd), len(names)
    if sst > 0 and nd > k:
        adj_r2 = 1.0 - (sse / (nd - k)) / (sst / (nd - 1))
    else:
        adj_r2 = np.nan
    return ModelFit(
        spec=spec, beta=beta, ar=ar, ma=ma, sar=sar, sma=sma,
        sigma2=params["sigma2"], loglik=float(res.llf), aic=float(res.aic),
        rmse=float(np.sqrt(np.mean(resid ** 2))), adj_r2=adj_r2,
        residuals=resid, std_errors=se, p_values=pv,
        n_params=k, n_obs=len(y),
        converged=bool(res.mle_retvals.get("converged", True)))


def sarimax_fit(series, exog, spec, start_params=None, maxiter=500):
    """Gaussian MLE of a (seasonal) ARIMA-error regression.

    Stationarity and invertibility are enforced by construction. Several
    starting points are tried and the best converged likelihood kept;
    total failure raises FitError carrying the best attempt.
    """
    y = _values(series)
    n_param_guess = (spec.p + spec.q + spec.P + spec.Q + 1
                     + (0 if exog is None else np.atleast_2d(exog).shape[-1]))
    if len(y) <= 10 + n_param_guess:
        raise ValueError("series too short for requested specification")
    if exog is not None:
        exog = np.asarray(exog, dtype=float)
        if exog.ndim == 1:
            exog = exog[:, None]
        if exog.shape[0] != len(y):
            raise ValueError("exog not aligned with series")
    trend = "c" if spec.d + spec.D == 0 else "n"
    model = SARIMAX(y, exog=exog, order=spec.order,
                    seasonal_order=spec.seasonal_order, trend=trend,
                    enforce_stationarity=True, enforce_invertibility=True)
    starts = [None]
    if start_params is not None:
        starts.insert(0, np.asarray(start_params, dtype=float))
    best = None
    errors = []
    for sp in starts:
        try:
            with warnings.catch_warnings():
                warnings.simplefilter("ignore")
                res = model.fit(start_params=sp, method="lbfgs",
                                maxiter=maxiter, disp=False,
                                pgtol=1e-10, factr=100.0)
        except Exception as exc:  # numerical failure for this start
            errors.append(str(exc))
            continue
        if not np.isfinite(res.llf):
            errors.append("non-finite likelihood")
            continue
        if best is None or res.llf > best.llf:
            best = res
    if best is None:
        raise FitError("all optimizer starts failed",
                       diagnostics={"errors": errors})
    # simplex polish: gradient-free, tightens the flat-likelihood region
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            polished = model.fit(start_params=best.params, method="nm",
                                 maxiter=2000, disp=False,
                                 xtol=1e-10, ftol=1e-12)
        if np.isfinite(polished.llf) and polished.llf >= best.llf:
            best = polished
    except Exception:
        pass
    warmup = spec.d + spec.D * spec.s
    fit = _extract_fit(best, spec, warmup)
    if not fit.converged:
        raise FitError("optimizer did not converge", best=fit,
                       diagnostics={"errors": errors})
    # rename exog columns if caller supplied names on the spec
    if spec.exog_names:
        mapping = {}
        for i, name in enumerate(spec.exog_names):
            mapping[f"x{i + 1}"] = name
        for d in (fit.beta, fit.std_errors, fit.p_values):
            for old, new in mapping.items():
                if old in d:
                    d[new] = d.pop(old)
    return fit


def grid_search(series, exog=None, p_max=3, q_max=3, d_set=(0, 1),
                seasonal=False, s=0, P_set=(0, 1), Q_set=(0, 1),
                D_set=(0,), exog_names=()):
    """Fit every spec in the grid and rank by AIC ascending.

    Ties break toward fewer parameters, then lexicographic spec order.
    Failed fits are recorded in the table, not fatal; if everything
    fails a FitError with per-spec diagnostics is raised.
    """
    if seasonal and s <= 0:
        raise ValueError("seasonal grid requires s > 0")
    seas = (itertools.product(P_set, D_set, Q_set) if seasonal
            else [(0, 0, 0)])
    combos = []
    for (P, D, Q), p, d, q in itertools.product(
            seas, range(p_max + 1), sorted(d_set), range(q_max + 1)):
        if d + D > 2:
            continue
        combos.append(ArimaSpec(p, d, q, P, D, Q, s if seasonal else 0,
                                tuple(exog_names)))
    table = []
    fits = {}
    for spec in sorted(set(combos), key=lambda sp: sp.key()):
        try:
            fit = sarimax_fit(series, exog, spec)
            fits[spec.key()] = fit
            table.append({"spec": spec, "aic": fit.aic,
                          "n_params": fit.n_params, "ok": True, "error": None})
        except (FitError, ValueError, np.linalg.LinAlgError) as exc:
            table.append({"spec": spec, "aic": np.inf, "n_params": None,
                          "ok": False, "error": str(exc)})
    ok = [row for row in table if row["ok"]]
    if not ok:
        raise FitError("every specification failed",
                       diagnostics={r["spec"].key(): r["error"] for r in table})
    table.sort(key=lambda r: (r["aic"], r["n_params"] or 0, r["spec"].key()))
    best = fits[table[0]["spec"].key()]
    return best, table


def diagnostics(fit, max_lag):
    """Residual ACF/PACF (PACF by Durbin-Levinson) and Ljung-Box p-value."""
    resid = np.asarray(fit.residuals, dtype=float)
    if len(resid) <= max_lag:
        raise ValueError("residual series shorter than max_lag")
    acf = _sm_acf(resid, nlags=max_lag, fft=False)
    pacf = _sm_pacf(resid, nlags=max_lag, method="ldb")
    lb = acorr_ljungbox(resid, lags=[max_lag], return_df=True)
    return {"acf": np.asarray(acf), "pacf": np.asarray(pacf),
            "ljung_box_p": float(lb["lb_pvalue"].iloc[0])}


_STAR_LEVELS = ((0.001, "***"), (0.01, "**"), (0.05, "*"), (0.1, "."))


def significance_stars(p):
    for level, stars in _STAR_LEVELS:
        if p < level:
            return stars
    return ""


def model_report(fit):
    """JSON-ready report: spec, coefficients with stars, metric block."""
    coefs = []
    names = list(fit.beta) + [f"ar.L{i}" for i in range(1, len(fit.ar) + 1)] \
        + [f"ma.L{i}" for i in range(1, len(fit.ma) + 1)]
    if fit.spec is not None and fit.spec.s:
        names += [f"ar.S.L{i * fit.spec.s}" for i in range(1, len(fit.sar) + 1)]
        names += [f"ma.S.L{i * fit.spec.s}" for i in range(1, len(fit.sma) + 1)]
    flat = fit.coefficients()
    lagged = dict(flat)
    if fit.spec is not None and fit.spec.s:
        for kind, vals in (("ar", fit.sar), ("ma", fit.sma)):
            for i, v in enumerate(vals, start=1):
                lagged[f"{kind}.S.L{i * fit.spec.s}"] = v
    for name in names:
        est = lagged.get(name)
        se = fit.std_errors.get(name)
        p = fit.p_values.get(name)
        coefs.append({
            "name": name, "estimate": est, "std_error": se, "p_value": p,
            "stars": significance_stars(p) if p is not None else ""})
    spec = None
    if fit.spec is not None:
        spec = {"order": list(fit.spec.order),
                "seasonal_order": list(fit.spec.seasonal_order),
                "exog": list(fit.spec.exog_names)}
    return {
        "spec": spec,
        "coefficients": coefs,
        "metrics": {"aic": fit.aic, "rmse": fit.rmse, "adj_r2": fit.adj_r2,
                    "loglik": fit.loglik, "n_obs": fit.n_obs,
                    "n_params": fit.n_params},
    }
