"""End-to-end runs: dataset preparation, training, test scoring, sweeps."""

from __future__ import annotations

import itertools
import logging
from dataclasses import dataclass, replace

import numpy as np

from ..errors import ConfigError, HyperforecastError
from ..models.config import ABLATIONS, ModelConfig
from ..models.forecast import MetricReport
from ..models.params import ModelParams
from ..models.series import Normalizer, SeriesTable, WindowBatch
from ..utils.seeding import SeedStreams, seed_streams
from .data_service import apply_missingness, load_csv, make_windows, split_chronological
from .forecaster_service import init_params
from .metrics_service import evaluate
from .runspec_service import ExperimentConfig
from .synthetic_service import generate_synthetic
from .training_service import TrainResult, train

log = logging.getLogger("hf.train")


@dataclass
class Dataset:
    table: SeriesTable
    normalizer: Normalizer
    train: WindowBatch
    val: WindowBatch
    test: WindowBatch
    planted: np.ndarray | None = None

    @property
    def n(self) -> int:
        return self.table.n

    @property
    def c(self) -> int:
        return self.table.c


@dataclass
class RunOutcome:
    config: ModelConfig
    params: ModelParams
    result: TrainResult
    test: MetricReport


def load_table(exp: ExperimentConfig, streams: SeedStreams) -> tuple[SeriesTable, np.ndarray | None]:
    data = exp.data
    if data.synthetic:
        return generate_synthetic(data.synthetic_n, data.synthetic_t, data.synthetic_m,
                                  noise_std=data.synthetic_noise, rng=streams.data,
                                  disturbance=data.synthetic_disturbance, lead=data.synthetic_lead)
    return load_csv(data.path), None


def build_dataset(exp: ExperimentConfig, streams: SeedStreams) -> Dataset:
    """Load, hide entries, split, fit the normalizer on train and cut windows."""
    data = exp.data
    table, planted = load_table(exp, streams)
    if data.missing != "none" or data.sensor_fail_prob > 0:
        table = apply_missingness(table, data.missing, data.missing_ratio, data.sensor_fail_prob, streams.data)
    tau = exp.model.get("tau", ModelConfig.tau)
    upsilon = exp.model.get("upsilon", ModelConfig.upsilon)
    train_part, val_part, test_part = split_chronological(table, data.split, min_length=tau + upsilon)
    normalizer = Normalizer(data.normalizer).fit(train_part)
    windows = [make_windows(normalizer.transform(part), tau, upsilon, data.stride)
               for part in (train_part, val_part, test_part)]
    log.info("Dataset: %d series x %d steps (%d missing), windows %d/%d/%d",
             table.n, table.T, table.missing, *(w.size for w in windows))
    return Dataset(table, normalizer, *windows, planted=planted)


def run_training(exp: ExperimentConfig, dataset: Dataset, streams: SeedStreams | None = None,
                 ablation: str | None = None, prefetch_depth: int = 4) -> RunOutcome:
    """Train one variant and score the restored best snapshot on the test windows."""
    streams = streams if streams is not None else seed_streams(exp.train.seed)
    config = exp.model_config(dataset.n, dataset.c)
    if ablation is not None:
        config = replace(config, ablation=ablation).validate()
    params = init_params(config, streams.init)
    result = train(params, config, exp.train, dataset.train, dataset.val, dataset.normalizer,
                   streams=streams, prefetch_depth=prefetch_depth)
    report = evaluate(params, config, dataset.test, dataset.normalizer, exp.train.batch_size)
    log.info("%s test: MAE %.4f RMSE %.4f MAPE %.4f", config.ablation, report.mae, report.rmse, report.mape)
    return RunOutcome(config, params, result, report)


def run_ablations(exp: ExperimentConfig, variants=ABLATIONS, prefetch_depth: int = 4) -> dict:
    """variant → MetricReport, or the error message when that variant failed."""
    results = {}
    for variant in variants:
        streams = seed_streams(exp.train.seed)
        try:
            dataset = build_dataset(exp, streams)
            results[variant] = run_training(exp, dataset, streams, ablation=variant,
                                            prefetch_depth=prefetch_depth).test
        except HyperforecastError as exc:
            log.error("Ablation %s failed: %s", variant, exc)
            results[variant] = str(exc)
    return results


def parse_grid(items) -> dict:
    """``key=v1,v2`` strings → key → list of raw values."""
    grid = {}
    for item in items:
        key, sep, values = item.partition("=")
        choices = [v.strip() for v in values.split(",") if v.strip()]
        if not sep or not key.strip() or not choices:
            raise ConfigError(f"--grid expects key=v1,v2,..., got {item!r}")
        grid[key.strip()] = choices
    return grid


def sweep_points(grid: dict, one_at_a_time: bool = False) -> list[dict]:
    """Settings per run: the cartesian product, or each key varied on its own."""
    if one_at_a_time:
        return [{key: value} for key, values in grid.items() for value in values]
    keys = list(grid)
    return [dict(zip(keys, combo)) for combo in itertools.product(*(grid[k] for k in keys))]


def run_sweep(exp: ExperimentConfig, grid: dict, one_at_a_time: bool = False,
              prefetch_depth: int = 4) -> list[dict]:
    """Train every sweep point; failures are recorded, not raised."""
    rows = []
    for settings in sweep_points(grid, one_at_a_time):
        row = dict(settings)
        try:
            variant = exp.with_overrides(settings)
            streams = seed_streams(variant.train.seed)
            dataset = build_dataset(variant, streams)
            outcome = run_training(variant, dataset, streams, prefetch_depth=prefetch_depth)
            val = evaluate(outcome.params, outcome.config, dataset.val, dataset.normalizer,
                           variant.train.batch_size)
            row.update(val_mae=val.mae, val_rmse=val.rmse, test_mae=outcome.test.mae,
                       test_rmse=outcome.test.rmse, test_mape=outcome.test.mape, status="ok")
        except HyperforecastError as exc:
            log.error("Sweep point %s failed: %s", settings, exc)
            row.update(status=f"failed: {exc}")
        rows.append(row)
    return rows
