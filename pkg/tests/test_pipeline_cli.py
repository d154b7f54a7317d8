import json
import math

import numpy as np
import pytest

from qarima.cli import main
from qarima.pipeline import (
    ConfigError,
    RunConfig,
    RunManifest,
    emit_plot_data,
    emit_reports,
    load_config,
    run_pipeline,
)
from qarima.series import synth_ar1

REPORT_FILES = [
    "qacf.csv", "qpacf.csv", "ar_summary.csv", "arma_models.csv",
    "forecasts.csv", "metrics.csv", "dm_mse.csv", "dm_mae.csv",
    "plot_data.csv", "manifest.json",
]


def write_dataset(tmp_path, n=160, seed=1):
    y = synth_ar1(0.7, n, 1.0, seed=seed).values
    p = tmp_path / "data.csv"
    p.write_text("value\n" + "\n".join(repr(float(v)) for v in y) + "\n")
    return p


def write_config(tmp_path, dataset, out, extra=""):
    p = tmp_path / "run.ini"
    p.write_text(
        "[dataset]\n"
        f"dataset_path = {dataset}\n"
        "dataset_column = value\n"
        "train_len = 120\n"
        "[run]\n"
        "max_lag = 6\n"
        "ar_max_iter = 80\n"
        "ma_max_iter = 60\n"
        f"out_dir = {out}\n"
        + extra
    )
    return p


class TestRunConfig:
    def test_static_threshold_default(self):
        cfg = RunConfig()
        assert cfg.threshold_z == 1.96
        assert cfg.threshold_config().tau(np.zeros(3), 400) == 1.96 / math.sqrt(400)

    def test_tau_norm_zero_means_sqrt_q(self):
        assert RunConfig().loss_weights().tau_norm is None
        assert RunConfig(tau_norm=0.8).loss_weights().tau_norm == 0.8

    def test_vqc_config_carries_shots_and_seed(self):
        cfg = RunConfig(shots=64, seed=9, vqc_layers=3)
        vqc = cfg.vqc_config()
        assert (vqc.shots, vqc.seed, vqc.reps) == (64, 9, 3)


class TestLoadConfig:
    def test_round_trip(self, tmp_path):
        p = write_config(tmp_path, "x.csv", "outdir", extra="seed = 5\ncenter = no\n")
        cfg = load_config(p)
        assert cfg.dataset_path == "x.csv"
        assert cfg.train_len == 120
        assert cfg.seed == 5
        assert cfg.center is False

    def test_unknown_key(self, tmp_path):
        p = tmp_path / "bad.ini"
        p.write_text("[run]\nwarp_factor = 9\n")
        with pytest.raises(ConfigError):
            load_config(p)

    def test_missing_file(self, tmp_path):
        with pytest.raises(ConfigError):
            load_config(tmp_path / "ghost.ini")


@pytest.fixture(scope="module")
def run_dir(tmp_path_factory):
    tmp = tmp_path_factory.mktemp("pipe")
    series = synth_ar1(0.7, 160, 1.0, seed=1)
    cfg = RunConfig(train_len=120, max_lag=6, ar_max_iter=80,
                    ma_max_iter=60, out_dir=str(tmp / "out"))
    manifest = run_pipeline(cfg, series=series)
    return tmp / "out", manifest


class TestRunPipeline:

    def test_all_artifacts_written(self, run_dir):
        out, _ = run_dir
        for name in REPORT_FILES:
            assert (out / name).exists(), name

    def test_manifest_structure(self, run_dir):
        _, manifest = run_dir
        assert manifest.d_result is not None
        assert manifest.ar_summary
        assert manifest.arma_rows
        assert manifest.metric_rows
        assert set(manifest.stage_seconds) >= {
            "ingest", "estimate_d", "correlograms", "ar", "residuals_ma",
            "evaluation",
        }

    def test_single_shared_configuration(self, run_dir):
        # one loss-weight set and optimizer budget served every candidate
        _, manifest = run_dir
        cfg = manifest.config
        assert cfg["ar_max_iter"] == 80 and cfg["ma_max_iter"] == 60
        orders = [row["p"] for row in manifest.ar_summary]
        assert orders == sorted(orders)

    def test_dm_rows_have_both_kinds(self, run_dir):
        _, manifest = run_dir
        kinds = {r["loss"] for r in manifest.dm_rows}
        assert kinds == {"MSE", "MAE"}

    def test_bad_split(self):
        series = synth_ar1(0.5, 50, 1.0, seed=2)
        cfg = RunConfig(train_len=50)
        with pytest.raises(ConfigError):
            run_pipeline(cfg, series=series)


class TestEmit:
    def test_neg_log10_p(self, tmp_path):
        manifest = RunManifest(config={})
        manifest.dm_rows = [
            {"quantum_pdq": [1, 0, 1], "blocks_used": 1, "loss": "MSE",
             "dm_stat": 2.0, "p_value": 0.05, "classical_mean_loss": 2.0,
             "quantum_mean_loss": 1.0, "delta_mean_loss": 1.0}
        ]
        path = emit_plot_data(manifest, tmp_path)
        import csv

        with open(path, newline="") as fh:
            row = list(csv.DictReader(fh))[0]
        assert float(row["neg_log10_p"]) == pytest.approx(1.3010299956639813)
        assert float(row["alpha"]) == 0.05

    def test_empty_model_set_header_only(self, tmp_path):
        manifest = RunManifest(config={})
        written = emit_reports(manifest, tmp_path)
        for path in written:
            lines = path.read_text().strip().splitlines()
            assert len(lines) == 1  # header only

    def test_dm_rows_split_by_loss_kind(self, tmp_path):
        manifest = RunManifest(config={})
        for kind in ("MSE", "MAE", "MSE"):
            manifest.dm_rows.append(
                {"quantum_pdq": [1, 0, 0], "blocks_used": 1, "loss": kind,
                 "dm_stat": 0.0, "p_value": 1.0, "classical_mean_loss": 1.0,
                 "quantum_mean_loss": 1.0, "delta_mean_loss": 0.0}
            )
        emit_reports(manifest, tmp_path)
        mse = (tmp_path / "dm_mse.csv").read_text().strip().splitlines()
        mae = (tmp_path / "dm_mae.csv").read_text().strip().splitlines()
        assert len(mse) == 3 and len(mae) == 2


@pytest.fixture(scope="module")
def workspace(tmp_path_factory):
    tmp = tmp_path_factory.mktemp("cli")
    dataset = write_dataset(tmp)
    out = tmp / "out"
    config = write_config(tmp, dataset, out)
    return tmp, config, out


class TestCli:

    def test_run_verb(self, workspace, capsys):
        _, config, out = workspace
        assert main(["run", "--config", str(config)]) == 0
        for name in REPORT_FILES:
            assert (out / name).exists(), name

    def test_evaluate_verb_from_stored_forecasts(self, workspace):
        _, config, out = workspace
        assert main(["evaluate", "--config", str(config)]) == 0
        assert (out / "metrics.csv").exists()

    def test_report_verb(self, workspace):
        _, config, out = workspace
        assert main(["report", "--config", str(config)]) == 0

    def test_diagnose_verb(self, workspace):
        tmp, config, out = workspace
        assert main(["diagnose", "--config", str(config)]) == 0
        data = json.loads((out / "diagnose.json").read_text())
        assert "d_star" in data

    def test_out_and_seed_overrides(self, workspace, tmp_path):
        _, config, _ = workspace
        other = tmp_path / "alt"
        code = main([
            "diagnose", "--config", str(config), "--out", str(other),
            "--seed", "3", "--shots", "analytic",
        ])
        assert code == 0
        assert (other / "diagnose.json").exists()

    def test_bad_config_exit_2(self, tmp_path):
        bad = tmp_path / "bad.ini"
        bad.write_text("[run]\nnot_a_key = 1\n")
        assert main(["run", "--config", str(bad)]) == 2

    def test_missing_dataset_exit_3(self, tmp_path):
        cfg = write_config(tmp_path, tmp_path / "ghost.csv", tmp_path / "o")
        assert main(["run", "--config", str(cfg)]) == 3

    def test_evaluate_without_forecasts_exit_3(self, tmp_path):
        dataset = write_dataset(tmp_path)
        cfg = write_config(tmp_path, dataset, tmp_path / "empty_out")
        assert main(["evaluate", "--config", str(cfg)]) == 3
