"""Configuration-driven orchestration of the full pipeline.

ingest -> differencing order -> lag correlograms -> candidate orders ->
AR refinement -> weak lags -> residuals -> MA -> ARMA table -> rolling
evaluation -> DM reports -> plot data.  All artifacts are written as CSV;
analytic-mode reruns of the same config are bitwise identical.
"""

from __future__ import annotations

import configparser
import csv
import json
import math
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .armodel import LossWeights, VqcConfig, residual_eval, vqc_ar_estimate, weak_lag_refine
from .diagnostics import (
    ThresholdConfig,
    estimate_d,
    export_lag_csv,
    qacf,
    qpacf,
)
from .evaluation import classical_fit, rolling_evaluate
from .mamodel import arma_finalize
from .series import TimeSeries, generate_differences, load_csv


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    """Every pipeline hyperparameter with its default.

    Defaults follow the documented estimation recipe; z = 1.96 gives the
    static 95% lag threshold.
    """

    # dataset
    dataset_path: str = ""
    dataset_column: str = "value"
    train_len: int = 0  # 0 means 80% of the series

    # differencing order search
    d_max: int = 2
    d_epsilon: float = 0.01
    d_patience: int = 2
    d_max_iter: int = 200
    d_loss_metric: str = "mse"

    # lag diagnostics
    max_lag: int = 10
    threshold_mode: str = "static"
    threshold_z: float = 1.96
    threshold_percentile_q: float = 90.0
    threshold_std_multiplier: float = 1.0
    fallback_ratio: float = 0.5
    enable_fallback: bool = True
    center: bool = True

    # loss weights (shared by AR and MA stages)
    lambda_cos: float = 0.0
    lambda_ent: float = 0.0
    lambda_l2: float = 0.0
    omega: float = 1.0

    # AR stage
    p_cap: int = 10
    vqc_layers: int = 2
    ar_max_iter: int = 200
    weak_count: int = 0
    weak_tau_stop: float = 0.0

    # MA stage
    q_min: int = 1
    q_max: int = 3
    ma_max_iter: int = 120
    tau_norm: float = 0.0  # 0 means sqrt(q)

    # evaluation
    dm_horizon: int = 1
    harvey: bool = False

    # global
    seed: int = 0
    shots: int = 0
    jobs: int = 1
    out_dir: str = "out"

    def loss_weights(self) -> LossWeights:
        return LossWeights(
            lambda_cos=self.lambda_cos,
            lambda_ent=self.lambda_ent,
            lambda_l2=self.lambda_l2,
            omega=self.omega,
            tau_norm=self.tau_norm if self.tau_norm > 0 else None,
        )

    def vqc_config(self) -> VqcConfig:
        return VqcConfig(reps=self.vqc_layers, shots=self.shots, seed=self.seed)

    def threshold_config(self) -> ThresholdConfig:
        return ThresholdConfig(
            mode=self.threshold_mode,
            z=self.threshold_z,
            percentile_q=self.threshold_percentile_q,
            std_multiplier=self.threshold_std_multiplier,
            fallback_ratio=self.fallback_ratio,
            enable_fallback=self.enable_fallback,
        )


_BOOL_FIELDS = {"enable_fallback", "center", "harvey"}
_INT_FIELDS = {
    "train_len", "d_max", "d_patience", "d_max_iter", "max_lag", "p_cap",
    "vqc_layers", "ar_max_iter", "weak_count", "q_min", "q_max",
    "ma_max_iter", "dm_horizon", "seed", "shots", "jobs",
}
_STR_FIELDS = {
    "dataset_path", "dataset_column", "d_loss_metric", "threshold_mode",
    "out_dir",
}


def load_config(path) -> RunConfig:
    """Parse the flat sectioned key-value config file."""
    parser = configparser.ConfigParser()
    read = parser.read(path)
    if not read:
        raise ConfigError(f"cannot read config file {path}")
    cfg = RunConfig()
    known = set(asdict(cfg))
    for section in parser.sections():
        for key, raw in parser.items(section):
            if key not in known:
                raise ConfigError(f"unknown config key {key!r} in [{section}]")
            if key in _BOOL_FIELDS:
                value = raw.strip().lower() in {"1", "true", "yes", "on"}
            elif key in _INT_FIELDS:
                value = int(raw)
            elif key in _STR_FIELDS:
                value = raw.strip()
            else:
                value = float(raw)
            setattr(cfg, key, value)
    return cfg


@dataclass
class RunManifest:
    config: dict
    version: str = __version__
    stage_seconds: dict = field(default_factory=dict)
    d_result: dict | None = None
    qacf_summary: dict | None = None
    qpacf_summary: dict | None = None
    ar_summary: list = field(default_factory=list)
    weak_summary: dict | None = None
    arma_rows: list = field(default_factory=list)
    metric_rows: list = field(default_factory=list)
    dm_rows: list = field(default_factory=list)
    reliably_outperforms: dict = field(default_factory=dict)
    warnings: list = field(default_factory=list)
    error: str | None = None


def _fmt(x) -> str:
    """Stable float formatting for bitwise-reproducible CSVs."""
    if isinstance(x, float):
        return repr(x)
    return str(x)


def _write_csv(path: Path, header, rows):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in rows:
            writer.writerow([_fmt(v) for v in row])


def run_pipeline(cfg: RunConfig, series: TimeSeries | None = None) -> RunManifest:
    """Execute all stages and write report files to cfg.out_dir.

    ``series`` overrides CSV ingestion (used by tests and synthetic runs).
    One loss-weight set, one circuit configuration and one optimizer budget
    serve every candidate model.
    """
    manifest = RunManifest(config=asdict(cfg))
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    weights = cfg.loss_weights()
    vqc = cfg.vqc_config()
    thresholds = cfg.threshold_config()

    def stage(name):
        class _Timer:
            def __enter__(self_inner):
                self_inner.t0 = time.perf_counter()

            def __exit__(self_inner, *exc):
                manifest.stage_seconds[name] = time.perf_counter() - self_inner.t0
                return False

        return _Timer()

    with stage("ingest"):
        if series is None:
            series = load_csv(cfg.dataset_path, cfg.dataset_column)
        values = series.values
        split = cfg.train_len if cfg.train_len > 0 else int(0.8 * values.size)
        if not 0 < split < values.size:
            raise ConfigError(f"train length {split} outside series of {values.size}")
        train = TimeSeries(values[:split], name=series.name)

    with stage("estimate_d"):
        d_res = estimate_d(
            train, d_max=cfg.d_max, epsilon=cfg.d_epsilon,
            patience=cfg.d_patience, max_iter=cfg.d_max_iter, seed=cfg.seed,
        )
        manifest.d_result = {
            "d_star": d_res.d_star,
            "alpha": d_res.alpha,
            "gamma": d_res.gamma,
            "converged_early": d_res.converged_early,
            "levels": [list(rec) for rec in d_res.metrics_log],
        }
    d_star = d_res.d_star
    z = (
        generate_differences(train.values, d_star).levels[d_star]
        if d_star > 0
        else train.values
    )

    with stage("correlograms"):
        K = min(cfg.max_lag, z.size - 2)
        acf_diag = qacf(z, K, shots=cfg.shots, thresholds=thresholds,
                        omega=cfg.omega, center=cfg.center, seed=cfg.seed)
        pacf_diag = qpacf(z, K, shots=cfg.shots, thresholds=thresholds,
                          center=cfg.center, seed=cfg.seed)
        export_lag_csv(acf_diag, out / "qacf.csv")
        export_lag_csv(pacf_diag, out / "qpacf.csv")
        manifest.qacf_summary = {
            "significant": sorted(acf_diag.significant),
            "fallback": sorted(acf_diag.fallback),
            "tau": acf_diag.tau,
        }
        manifest.qpacf_summary = {
            "significant": sorted(pacf_diag.significant),
            "fallback": sorted(pacf_diag.fallback),
            "tau": pacf_diag.tau,
        }

    with stage("ar"):
        candidates = sorted(
            p for p in (pacf_diag.significant | pacf_diag.fallback) if p <= cfg.p_cap
        )
        if not candidates:
            candidates = [1, 2]
        selection = vqc_ar_estimate(
            z, candidates, cfg=vqc, w=weights, t_max=cfg.ar_max_iter, seed=cfg.seed
        )
        manifest.ar_summary = [
            {
                "p": p,
                "loss": fit.loss,
                "b": [float(v) for v in fit.b],
                "residual_mean": fit.residual_mean,
                "residual_std": fit.residual_std,
            }
            for p, fit in sorted(selection.fits.items())
        ]
        _write_csv(
            out / "ar_summary.csv",
            ["p", "loss", "coefficients", "residual_mean", "residual_std"],
            [
                (p, fit.loss, ";".join(repr(float(v)) for v in fit.b),
                 fit.residual_mean, fit.residual_std)
                for p, fit in sorted(selection.fits.items())
            ],
        )

    with stage("weak_lags"):
        if cfg.weak_count > 0 and len(selection.fits) > 1:
            try:
                weak = weak_lag_refine(
                    train, d_star, selection, cfg.weak_count,
                    cfg=vqc, lw=weights, t_max=cfg.ar_max_iter, seed=cfg.seed,
                )
                manifest.weak_summary = {
                    "p_prime": weak.p_prime,
                    "loss": weak.loss,
                    "b_full": [float(v) for v in weak.b_full],
                    "lambda_dev": weak.lambda_dev,
                    "lambda_mag": weak.lambda_mag,
                    "k_reduced": weak.k_reduced,
                }
            except ValueError as exc:
                manifest.warnings.append(f"weak-lag stage skipped: {exc}")

    with stage("residuals_ma"):
        fits = residual_eval(z, list(selection.fits.values()))
        arma_rows = arma_finalize(
            d_star, fits, q_range=(cfg.q_min, cfg.q_max), w=weights,
            cfg=vqc, t_max=cfg.ma_max_iter, seed=cfg.seed,
        )
        manifest.arma_rows = [
            {
                "p": m.p, "d": m.d, "q": m.q,
                "b": [float(v) for v in m.b],
                "theta": [float(v) for v in m.theta],
                "sigma_ar": m.sigma_ar, "sigma_ma": m.sigma_ma,
            }
            for m in arma_rows
        ]
        _write_csv(
            out / "arma_models.csv",
            ["p", "d", "q", "b", "theta", "sigma_ar", "sigma_ma"],
            [
                (m.p, m.d, m.q,
                 ";".join(repr(float(v)) for v in m.b),
                 ";".join(repr(float(v)) for v in m.theta),
                 m.sigma_ar, m.sigma_ma)
                for m in arma_rows
            ],
        )

    with stage("evaluation"):
        classical = classical_fit(train, d_star, p_max=min(cfg.p_cap, 5),
                                  q_max=min(cfg.q_max, 2))
        outcome = rolling_evaluate(
            series, split, arma_rows, classical, horizon=cfg.dm_horizon
        )
        manifest.metric_rows = [
            {"model": r.label, "n": r.n, "mse": r.mse, "mape": r.mape, "mae": r.mae}
            for r in outcome.reports
        ]
        manifest.dm_rows = [
            {
                "quantum_pdq": list(dm.quantum_pdq),
                "blocks_used": dm.blocks_used,
                "loss": dm.loss_kind,
                "dm_stat": dm.dm_stat,
                "p_value": dm.p_value,
                "classical_mean_loss": dm.classical_mean_loss,
                "quantum_mean_loss": dm.quantum_mean_loss,
                "delta_mean_loss": dm.delta_mean_loss,
            }
            for dm in outcome.dm_results
        ]
        manifest.reliably_outperforms = outcome.reliably_outperforms
        manifest.warnings.extend(outcome.warnings)
        _write_csv(
            out / "forecasts.csv",
            ["model", "step", "actual", "forecast"],
            outcome.forecast_rows,
        )

    emit_reports(manifest, out)
    emit_plot_data(manifest, out)
    with open(out / "manifest.json", "w", encoding="utf-8") as fh:
        json.dump(asdict_manifest(manifest), fh, indent=2, sort_keys=True)
    return manifest


def asdict_manifest(manifest: RunManifest) -> dict:
    data = asdict(manifest)
    data["stage_seconds"] = {k: round(v, 6) for k, v in manifest.stage_seconds.items()}
    return data


def emit_reports(manifest: RunManifest, out_dir) -> list[Path]:
    """Metrics table plus one DM table per loss kind."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []
    path = out / "metrics.csv"
    _write_csv(
        path,
        ["model", "n", "mse", "mape", "mae"],
        [(r["model"], r["n"], r["mse"], r["mape"], r["mae"]) for r in manifest.metric_rows],
    )
    written.append(path)
    for kind in ("MSE", "MAE"):
        path = out / f"dm_{kind.lower()}.csv"
        _write_csv(
            path,
            ["quantum_pdq", "blocks_used", "loss", "dm_stat", "p_value",
             "classical_mean_loss", "quantum_mean_loss", "delta_mean_loss"],
            [
                ("({},{},{})".format(*r["quantum_pdq"]), r["blocks_used"],
                 r["loss"], r["dm_stat"], r["p_value"],
                 r["classical_mean_loss"], r["quantum_mean_loss"],
                 r["delta_mean_loss"])
                for r in manifest.dm_rows
                if r["loss"] == kind
            ],
        )
        written.append(path)
    return written


def emit_plot_data(manifest: RunManifest, out_dir, alpha: float = 0.05) -> Path:
    """Per-model MSE/MAPE and DM p-values with a -log10(p) column."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    rows = []
    for r in manifest.dm_rows:
        p = r["p_value"]
        neglog = -math.log10(p) if p > 0 else math.inf
        rows.append(
            ("({},{},{})".format(*r["quantum_pdq"]), r["loss"], r["dm_stat"],
             p, neglog, alpha)
        )
    path = out / "plot_data.csv"
    _write_csv(
        path,
        ["quantum_pdq", "loss", "dm_stat", "p_value", "neg_log10_p", "alpha"],
        rows,
    )
    return path
