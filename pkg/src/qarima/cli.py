"""Command-line entry point.

Verbs: run (full pipeline), diagnose (differencing order and correlograms
only), evaluate (metrics and DM tables from stored forecasts), report
(re-emit report CSVs from a manifest).  Exit codes: 0 success, 2 config
error, 3 data error, 4 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from .diagnostics import DiagnosticsError, estimate_d, export_lag_csv, qacf, qpacf
from .evaluation import EvaluationError, dm_test, metrics
from .pipeline import (
    ConfigError,
    RunManifest,
    asdict_manifest,
    emit_plot_data,
    emit_reports,
    load_config,
    run_pipeline,
)
from .series import IngestionError, SeriesError, generate_differences, load_csv

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DATA = 3
EXIT_NUMERICAL = 4


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="qarima",
        description="Quantum-inspired ARIMA order discovery, fitting and evaluation",
    )
    parser.add_argument("verb", choices=["run", "diagnose", "evaluate", "report"])
    parser.add_argument("--config", required=True, help="path to the run config file")
    parser.add_argument("--out", default=None, help="output directory override")
    parser.add_argument("--seed", type=int, default=None, help="seed override")
    parser.add_argument(
        "--shots", default=None,
        help="shot count override, or 'analytic' for exact probabilities",
    )
    parser.add_argument("--jobs", type=int, default=None, help="worker cap")
    return parser


def _apply_overrides(cfg, args):
    if args.out is not None:
        cfg.out_dir = args.out
    if args.seed is not None:
        cfg.seed = args.seed
    if args.shots is not None:
        cfg.shots = 0 if args.shots == "analytic" else int(args.shots)
    if args.jobs is not None:
        cfg.jobs = args.jobs
    return cfg


def _cmd_diagnose(cfg) -> int:
    series = load_csv(cfg.dataset_path, cfg.dataset_column)
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    d_res = estimate_d(
        series, d_max=cfg.d_max, epsilon=cfg.d_epsilon,
        patience=cfg.d_patience, max_iter=cfg.d_max_iter, seed=cfg.seed,
    )
    z = (
        generate_differences(series.values, d_res.d_star).levels[d_res.d_star]
        if d_res.d_star > 0
        else series.values
    )
    K = min(cfg.max_lag, z.size - 2)
    thresholds = cfg.threshold_config()
    export_lag_csv(
        qacf(z, K, shots=cfg.shots, thresholds=thresholds,
             omega=cfg.omega, center=cfg.center, seed=cfg.seed),
        out / "qacf.csv",
    )
    export_lag_csv(
        qpacf(z, K, shots=cfg.shots, thresholds=thresholds,
              center=cfg.center, seed=cfg.seed),
        out / "qpacf.csv",
    )
    with open(out / "diagnose.json", "w", encoding="utf-8") as fh:
        json.dump(
            {
                "d_star": d_res.d_star,
                "alpha": d_res.alpha,
                "gamma": d_res.gamma,
                "converged_early": d_res.converged_early,
            },
            fh, indent=2, sort_keys=True,
        )
    print(f"d_star={d_res.d_star} (diagnostics written to {out})")
    return EXIT_OK


def _cmd_evaluate(cfg) -> int:
    """Recompute metrics and DM tables from a stored forecasts.csv.

    The file needs columns model, actual, forecast; the classical row set is
    the DM reference.
    """
    import csv as _csv

    fc_path = Path(cfg.out_dir) / "forecasts.csv"
    if not fc_path.exists():
        raise IngestionError(f"no stored forecasts at {fc_path}")
    by_model: dict[str, list[tuple[float, float]]] = {}
    with open(fc_path, newline="", encoding="utf-8") as fh:
        for row in _csv.DictReader(fh):
            by_model.setdefault(row["model"], []).append(
                (float(row["actual"]), float(row["forecast"]))
            )
    classical_label = next(
        (m for m in by_model if m.startswith("classical")), None
    )
    if classical_label is None:
        raise EvaluationError("forecasts.csv has no classical rows")
    manifest = RunManifest(config={})
    ca, cf = map(np.array, zip(*by_model[classical_label]))
    cl_err = ca - cf
    rep = metrics(ca, cf, label=classical_label)
    manifest.metric_rows.append(
        {"model": rep.label, "n": rep.n, "mse": rep.mse, "mape": rep.mape, "mae": rep.mae}
    )
    for label, pairs in by_model.items():
        if label == classical_label:
            continue
        qa, qf = map(np.array, zip(*pairs))
        rep = metrics(qa, qf, label=label)
        manifest.metric_rows.append(
            {"model": rep.label, "n": rep.n, "mse": rep.mse, "mape": rep.mape, "mae": rep.mae}
        )
        pdq = label[label.find("(") :].strip("()").split(",") if "(" in label else []
        pdq = tuple(int(v) for v in pdq) if len(pdq) == 3 else (0, 0, 0)
        for kind in ("MSE", "MAE"):
            dm = dm_test(cl_err, qa - qf, loss_kind=kind,
                         horizon=cfg.dm_horizon, quantum_pdq=pdq)
            manifest.dm_rows.append(
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
            )
    emit_reports(manifest, cfg.out_dir)
    emit_plot_data(manifest, cfg.out_dir)
    print(f"evaluation reports written to {cfg.out_dir}")
    return EXIT_OK


def _cmd_report(cfg) -> int:
    manifest_path = Path(cfg.out_dir) / "manifest.json"
    if not manifest_path.exists():
        raise IngestionError(f"no manifest at {manifest_path}")
    with open(manifest_path, encoding="utf-8") as fh:
        data = json.load(fh)
    manifest = RunManifest(config=data.get("config", {}))
    manifest.metric_rows = data.get("metric_rows", [])
    manifest.dm_rows = data.get("dm_rows", [])
    missing = [
        name
        for name, rows in (("metrics", manifest.metric_rows),)
        if not rows
    ]
    if missing:
        print(f"manifest incomplete, missing stages: {missing}", file=sys.stderr)
    emit_reports(manifest, cfg.out_dir)
    emit_plot_data(manifest, cfg.out_dir)
    print(f"reports re-emitted to {cfg.out_dir}")
    return EXIT_OK


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        cfg = _apply_overrides(load_config(args.config), args)
        if args.verb == "run":
            manifest = run_pipeline(cfg)
            if manifest.error:
                print(manifest.error, file=sys.stderr)
                return EXIT_NUMERICAL
            print(json.dumps(asdict_manifest(manifest)["stage_seconds"], indent=2))
            return EXIT_OK
        if args.verb == "diagnose":
            return _cmd_diagnose(cfg)
        if args.verb == "evaluate":
            return _cmd_evaluate(cfg)
        return _cmd_report(cfg)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (IngestionError, SeriesError, DiagnosticsError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (EvaluationError, ValueError, FloatingPointError, np.linalg.LinAlgError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
