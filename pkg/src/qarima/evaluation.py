"""Forecast evaluation: metrics, Diebold-Mariano tests, a classical ARIMA
comparator, and the rolling out-of-sample protocol.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.stats import norm as _norm

from .mamodel import ArmaModel, forecast as arma_forecast
from .series import (
    TimeSeries,
    build_delay_matrix,
    difference_anchors,
    generate_differences,
    invert_difference,
)


class EvaluationError(ValueError):
    pass


@dataclass(frozen=True)
class MetricReport:
    label: str
    n: int
    mse: float
    mape: float
    mae: float
    mape_excluded: int = 0  # zero-actual points dropped from MAPE


@dataclass(frozen=True)
class DMResult:
    quantum_pdq: tuple
    blocks_used: int
    loss_kind: str
    dm_stat: float
    p_value: float
    classical_mean_loss: float
    quantum_mean_loss: float
    delta_mean_loss: float
    degenerate: bool = False


@dataclass(frozen=True)
class ClassicalArima:
    """Grid-searched comparator: OLS AR part, Hannan-Rissanen MA part,
    intercept included, selected by AIC."""

    p: int
    d: int
    q: int
    intercept: float
    ar: np.ndarray
    ma: np.ndarray
    aic: float
    method: str
    stationary: bool


def metrics(actual, forecast, label: str = "") -> MetricReport:
    actual = np.asarray(actual, dtype=float)
    forecast = np.asarray(forecast, dtype=float)
    if actual.shape != forecast.shape or actual.ndim != 1 or actual.size < 1:
        raise EvaluationError("actual and forecast must be equal-length vectors")
    err = actual - forecast
    mse = float(np.mean(err**2))
    mae = float(np.mean(np.abs(err)))
    nonzero = actual != 0
    excluded = int(np.sum(~nonzero))
    if np.any(nonzero):
        mape = float(np.mean(np.abs(err[nonzero] / actual[nonzero])))
    else:
        mape = 0.0
    return MetricReport(
        label=label, n=actual.size, mse=mse, mape=mape, mae=mae,
        mape_excluded=excluded,
    )


def delta_metrics(classical: MetricReport, quantum: MetricReport):
    """Signed improvements (classical minus quantum); positive favors quantum."""
    if classical.n != quantum.n:
        raise EvaluationError("reports cover different sample sizes")
    return classical.mse - quantum.mse, classical.mape - quantum.mape


def dm_test(errors_classical, errors_quantum, loss_kind: str = "MSE",
            horizon: int = 1, harvey: bool = False, quantum_pdq=(0, 0, 0),
            blocks_used: int = 1) -> DMResult:
    """Diebold-Mariano test of equal forecast accuracy.

    The loss differential (classical minus quantum) is averaged and scaled
    by a rectangular-kernel HAC variance with lag horizon-1; p-values come
    from the standard normal reference.  ``harvey`` applies the small-sample
    correction factor.
    """
    ec = np.asarray(errors_classical, dtype=float)
    eq = np.asarray(errors_quantum, dtype=float)
    if ec.shape != eq.shape or ec.ndim != 1:
        raise EvaluationError("error sequences must be equal-length vectors")
    n = ec.size
    if n < 10:
        raise EvaluationError(f"need at least 10 points for DM, got {n}")
    if not (np.all(np.isfinite(ec)) and np.all(np.isfinite(eq))):
        raise EvaluationError("non-finite forecast errors")
    if loss_kind == "MSE":
        d = ec**2 - eq**2
    elif loss_kind == "MAE":
        d = np.abs(ec) - np.abs(eq)
    else:
        raise EvaluationError(f"unknown loss kind {loss_kind!r}")
    dbar = float(d.mean())
    dc = d - dbar
    var = float(np.dot(dc, dc)) / n
    for lag in range(1, horizon):
        var += 2.0 * float(np.dot(dc[:-lag], dc[lag:])) / n
    cl = float(np.mean(ec**2 if loss_kind == "MSE" else np.abs(ec)))
    ql = float(np.mean(eq**2 if loss_kind == "MSE" else np.abs(eq)))
    if var <= 1e-300:
        if abs(dbar) < 1e-300:
            return DMResult(
                quantum_pdq=tuple(quantum_pdq), blocks_used=blocks_used,
                loss_kind=loss_kind, dm_stat=0.0, p_value=1.0,
                classical_mean_loss=cl, quantum_mean_loss=ql,
                delta_mean_loss=cl - ql, degenerate=True,
            )
        stat = math.copysign(math.inf, dbar)
        return DMResult(
            quantum_pdq=tuple(quantum_pdq), blocks_used=blocks_used,
            loss_kind=loss_kind, dm_stat=stat, p_value=0.0,
            classical_mean_loss=cl, quantum_mean_loss=ql,
            delta_mean_loss=cl - ql, degenerate=True,
        )
    stat = dbar / math.sqrt(var / n)
    if harvey:
        h = horizon
        factor = (n + 1 - 2 * h + h * (h - 1) / n) / n
        stat *= math.sqrt(max(factor, 0.0))
    p = 2.0 * float(_norm.sf(abs(stat)))
    return DMResult(
        quantum_pdq=tuple(quantum_pdq), blocks_used=blocks_used,
        loss_kind=loss_kind, dm_stat=float(stat), p_value=p,
        classical_mean_loss=cl, quantum_mean_loss=ql,
        delta_mean_loss=cl - ql,
    )


def _hr_innovations(z: np.ndarray, long_ar: int) -> np.ndarray:
    """Stage-1 innovation estimates from a long AR with intercept."""
    innov = np.zeros(z.size)
    if z.size > long_ar + 4 and np.std(z) > 1e-12:
        dm = build_delay_matrix(z, long_ar)
        D = np.column_stack([np.ones(dm.targets.size), dm.regressors])
        beta, *_ = np.linalg.lstsq(D, dm.targets, rcond=None)
        innov[long_ar:] = dm.targets - D @ beta
    return innov


def _fit_pq(z: np.ndarray, p: int, q: int, innov: np.ndarray):
    """Conditional least squares for an ARMA(p, q) with intercept on the
    (already differenced) series z; returns (intercept, ar, ma, sse, nobs)."""
    m = max(p, q)
    n = z.size
    if n <= m + p + q + 2:
        return None
    rows = n - m
    cols = [np.ones(rows)]
    for i in range(1, p + 1):
        cols.append(z[m - i : n - i])
    for j in range(1, q + 1):
        cols.append(innov[m - j : n - j])
    D = np.column_stack(cols)
    target = z[m:]
    beta, *_ = np.linalg.lstsq(D, target, rcond=None)
    sse = float(np.sum((target - D @ beta) ** 2))
    return float(beta[0]), beta[1 : 1 + p], beta[1 + p :], sse, rows


def _ar_stationary(ar: np.ndarray) -> bool:
    if ar.size == 0:
        return True
    poly = np.concatenate([[1.0], -np.asarray(ar, dtype=float)])
    roots = np.roots(poly[::-1])
    return bool(np.all(np.abs(roots) > 1.0 + 1e-9)) if roots.size else True


def classical_fit(y, d: int, p_max: int = 5, q_max: int = 2) -> ClassicalArima:
    """AIC grid search over (p, q) at fixed d.

    AR parts by OLS, MA parts by two-stage conditional least squares, both
    with an intercept.  AIC = n ln(SSE/n) + 2 (p + q + 1); ties break toward
    fewer parameters.
    """
    vals = y.values if isinstance(y, TimeSeries) else np.asarray(y, dtype=float)
    if vals.size <= p_max + q_max + d + 10:
        raise EvaluationError("series too short for the requested grid")
    z = generate_differences(vals, d).levels[d] if d > 0 else vals.astype(float)
    long_ar = min(max(10, 2 * (p_max + q_max)), max(1, z.size // 4))
    innov = _hr_innovations(z, long_ar)
    best = None
    failures = []
    for p in range(0, p_max + 1):
        for q in range(0, q_max + 1):
            fit = _fit_pq(z, p, q, innov)
            if fit is None:
                failures.append((p, q, "insufficient data"))
                continue
            intercept, ar, ma, sse, nobs = fit
            aic = nobs * math.log(max(sse, 1e-300) / nobs) + 2 * (p + q + 1)
            key = (aic, p + q, p)
            if best is None or key < best[0]:
                best = (key, p, q, intercept, ar, ma, aic)
    if best is None:
        raise EvaluationError(f"all classical fits failed: {failures}")
    _, p, q, intercept, ar, ma, aic = best
    return ClassicalArima(
        p=p, d=d, q=q, intercept=intercept,
        ar=np.asarray(ar, dtype=float), ma=np.asarray(ma, dtype=float),
        aic=aic, method="ols+hannan-rissanen",
        stationary=_ar_stationary(np.asarray(ar, dtype=float)),
    )


def classical_fixed_fit(y, p: int, d: int, q: int) -> ClassicalArima:
    """Fit a specific (p, d, q) with the same CLS machinery as the grid."""
    vals = y.values if isinstance(y, TimeSeries) else np.asarray(y, dtype=float)
    z = generate_differences(vals, d).levels[d] if d > 0 else vals.astype(float)
    long_ar = min(max(10, 2 * (p + q)), max(1, z.size // 4))
    innov = _hr_innovations(z, long_ar)
    fit = _fit_pq(z, p, q, innov)
    if fit is None:
        raise EvaluationError("series too short for requested order")
    intercept, ar, ma, sse, nobs = fit
    aic = nobs * math.log(max(sse, 1e-300) / nobs) + 2 * (p + q + 1)
    return ClassicalArima(
        p=p, d=d, q=q, intercept=intercept,
        ar=np.asarray(ar, dtype=float), ma=np.asarray(ma, dtype=float),
        aic=aic, method="ols+hannan-rissanen",
        stationary=_ar_stationary(np.asarray(ar, dtype=float)),
    )


def _classical_innovation_recursion(model: ClassicalArima, z: np.ndarray) -> np.ndarray:
    eps = np.zeros(z.size)
    p, q = model.p, model.q
    for t in range(p, z.size):
        pred = model.intercept
        for i in range(1, p + 1):
            pred += model.ar[i - 1] * z[t - i]
        for j in range(1, q + 1):
            if t - j >= 0:
                pred += model.ma[j - 1] * eps[t - j]
        eps[t] = z[t] - pred
    return eps


def classical_forecast(model: ClassicalArima, history, horizon: int,
                       mode: str = "recursive") -> np.ndarray:
    """Original-scale forecasts from the comparator's difference-scale
    recursion (innovations seeded at zero)."""
    if horizon <= 0:
        raise EvaluationError("horizon must be positive")
    vals = history.values if isinstance(history, TimeSeries) else np.asarray(history, dtype=float)
    d = model.d
    z = generate_differences(vals, d).levels[d] if d > 0 else vals.astype(float)
    eps = _classical_innovation_recursion(model, z)
    zx = list(z)
    ex = list(eps)
    preds = []
    for _ in range(horizon):
        pred = model.intercept
        for i in range(1, model.p + 1):
            pred += model.ar[i - 1] * zx[-i]
        for j in range(1, model.q + 1):
            pred += model.ma[j - 1] * ex[-j]
        preds.append(pred)
        zx.append(pred)
        ex.append(0.0)
    anchors = difference_anchors(vals, d)
    return invert_difference(np.array(preds), anchors, d)


def rolling_forecasts(forecaster, y_values: np.ndarray, split: int) -> np.ndarray:
    """One-step forecasts across the OOS window with observed history.

    ``forecaster(history) -> next value`` is called with the expanding
    prefix; parameters are fixed (no refit).
    """
    n = y_values.size
    out = np.empty(n - split)
    for t in range(split, n):
        out[t - split] = float(forecaster(y_values[:t]))
    return out


@dataclass(frozen=True)
class EvaluationOutcome:
    reports: list = field(default_factory=list)
    dm_results: list = field(default_factory=list)
    reliably_outperforms: dict = field(default_factory=dict)
    warnings: list = field(default_factory=list)
    forecast_rows: list = field(default_factory=list)  # (model, step, actual, forecast)


def rolling_evaluate(y, split: int, models, classical: ClassicalArima,
                     loss_kinds=("MSE", "MAE"), horizon: int = 1) -> EvaluationOutcome:
    """Rolling one-step OOS evaluation of every model against the comparator.

    Emits a metric report per model, DM results per (model, loss kind) when
    the window allows (n >= 10), and a per-model flag that is true only when
    the model improves both MSE and MAPE and at least one DM p-value is at
    or below 0.05.
    """
    vals = y.values if isinstance(y, TimeSeries) else np.asarray(y, dtype=float)
    if not 0 < split < vals.size:
        raise EvaluationError("split must fall inside the series")
    actual = vals[split:]
    warnings = []

    cl_fc = rolling_forecasts(
        lambda h: classical_forecast(classical, h, 1)[0], vals, split
    )
    cl_report = metrics(actual, cl_fc, label=f"classical({classical.p},{classical.d},{classical.q})")
    cl_err = actual - cl_fc

    forecast_rows = [
        (cl_report.label, i, float(a), float(f))
        for i, (a, f) in enumerate(zip(actual, cl_fc))
    ]
    reports = [cl_report]
    dm_results = []
    reliably = {}
    for model in models:
        if not isinstance(model, ArmaModel):
            raise EvaluationError("models must be finalized ARMA rows")
        q_fc = rolling_forecasts(
            lambda h: arma_forecast(model, h, 1)[0], vals, split
        )
        label = f"quantum({model.p},{model.d},{model.q})"
        q_report = metrics(actual, q_fc, label=label)
        reports.append(q_report)
        forecast_rows.extend(
            (label, i, float(a), float(f))
            for i, (a, f) in enumerate(zip(actual, q_fc))
        )
        q_err = actual - q_fc
        model_dms = []
        if actual.size >= 10:
            for kind in loss_kinds:
                model_dms.append(
                    dm_test(
                        cl_err, q_err, loss_kind=kind, horizon=horizon,
                        quantum_pdq=(model.p, model.d, model.q),
                    )
                )
        else:
            warnings.append(f"{label}: OOS window {actual.size} < 10, DM skipped")
        dm_results.extend(model_dms)
        improves = q_report.mse < cl_report.mse and q_report.mape < cl_report.mape
        significant = any(dm.p_value <= 0.05 for dm in model_dms)
        reliably[label] = bool(improves and significant)
    return EvaluationOutcome(
        reports=reports, dm_results=dm_results,
        reliably_outperforms=reliably, warnings=warnings,
        forecast_rows=forecast_rows,
    )
