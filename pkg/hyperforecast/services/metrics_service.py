"""Original-scale evaluation metrics."""

from __future__ import annotations

import logging

import numpy as np

from ..errors import EmptyEvaluation, ShapeMismatch
from ..models.forecast import Forecast, MetricReport
from ..models.series import Normalizer, WindowBatch
from .forecaster_service import denormalize_forecast, predict

log = logging.getLogger("hf.train")

MAPE_FLOOR = 1e-8
INTERVAL_Z = 1.96


def _scores(point, target, observed):
    err = (point - target)[observed]
    if err.size == 0:
        return float("nan"), float("nan"), float("nan")
    mae = float(np.mean(np.abs(err)))
    rmse = float(np.sqrt(np.mean(err * err)))
    usable = observed & (np.abs(target) >= MAPE_FLOOR)
    if usable.any():
        mape = float(np.mean(np.abs((point - target)[usable]) / np.abs(target[usable])) * 100.0)
    else:
        mape = float("nan")
    return mae, rmse, mape


def compute_metrics(point: np.ndarray, target: np.ndarray, mask: np.ndarray | None = None,
                    sigma: np.ndarray | None = None) -> MetricReport:
    """MAE, RMSE and MAPE (percent) over observed entries of …×υ×c arrays."""
    point = np.asarray(point, dtype=np.float64)
    target = np.asarray(target, dtype=np.float64)
    if point.shape != target.shape:
        raise ShapeMismatch(f"forecast {list(point.shape)} vs target {list(target.shape)}")
    observed = np.ones(target.shape, dtype=bool) if mask is None else np.asarray(mask) > 0
    if not observed.any():
        raise EmptyEvaluation("no observed target entries to score")

    mae, rmse, mape = _scores(point, target, observed)
    per_horizon = []
    for k in range(target.shape[-2]):
        h_mae, h_rmse, h_mape = _scores(point[..., k, :], target[..., k, :], observed[..., k, :])
        per_horizon.append({"step": k + 1, "mae": h_mae, "rmse": h_rmse, "mape": h_mape})

    mean_sigma = coverage = None
    if sigma is not None:
        sigma = np.asarray(sigma, dtype=np.float64)
        mean_sigma = float(sigma[observed].mean())
        inside = np.abs(point - target) <= INTERVAL_Z * sigma
        coverage = float(inside[observed].mean())

    return MetricReport(mae=mae, rmse=rmse, mape=mape, count=int(observed.sum()),
                        per_horizon=per_horizon, mean_sigma=mean_sigma, coverage=coverage)


def forecast_windows(params, config, windows: WindowBatch, normalizer: Normalizer | None = None,
                     batch_size: int = 64) -> Forecast:
    """Deterministic forecasts for every window, in original scale when a normalizer is given."""
    points, sigmas = [], []
    for lo in range(0, windows.size, batch_size):
        part = windows.subset(slice(lo, lo + batch_size))
        fc = predict(part.inputs, config, params, mask=part.input_mask)
        points.append(fc.point)
        if fc.sigma is not None:
            sigmas.append(fc.sigma)
    fc = Forecast(point=np.concatenate(points), sigma=np.concatenate(sigmas) if sigmas else None)
    return denormalize_forecast(fc, normalizer) if normalizer is not None else fc


def evaluate(params, config, windows: WindowBatch, normalizer: Normalizer | None = None,
             batch_size: int = 64) -> MetricReport:
    """Score a parameter snapshot on windows; forecasts and targets are denormalized first."""
    if windows.size == 0:
        raise EmptyEvaluation("no windows to evaluate")
    fc = forecast_windows(params, config, windows, normalizer, batch_size)
    target = normalizer.denormalize(windows.targets, window=True) if normalizer is not None else windows.targets
    report = compute_metrics(fc.point, target, windows.target_mask, fc.sigma)
    log.debug("evaluated %d windows: MAE %.4f RMSE %.4f", windows.size, report.mae, report.rmse)
    return report
