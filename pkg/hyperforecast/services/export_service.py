"""Plot-ready CSV outputs: forecasts, structure, attention, metrics, comparisons."""

from __future__ import annotations

import logging
import re
from pathlib import Path

import numpy as np
import pandas as pd

from ..models.forecast import Forecast, IncidenceMatrix, MetricReport

log = logging.getLogger("hf.cli")

FORECAST_COLUMNS = ["step", "truth", "point", "sigma"]
METRIC_KEYS = ("mae", "rmse", "mape")


def safe_name(name: str) -> str:
    return re.sub(r"[^A-Za-z0-9._-]+", "_", str(name)) or "series"


def write_forecasts(out_dir, names: list, forecast: Forecast, truth: np.ndarray, mask: np.ndarray) -> list[Path]:
    """One ``forecast_<series>.csv`` per series (per channel when c > 1).

    Each window contributes υ consecutive rows; ``truth`` is blank where the
    target is unobserved and ``sigma`` is blank without an uncertainty head.
    """
    out_dir = Path(out_dir)
    b, n, steps, c = forecast.point.shape
    step_col = np.tile(np.arange(1, steps + 1), b)
    written = []
    for i, name in enumerate(names):
        for k in range(c):
            observed = mask[:, i, :, k].reshape(-1) > 0
            frame = pd.DataFrame({
                "step": step_col,
                "truth": np.where(observed, truth[:, i, :, k].reshape(-1), np.nan),
                "point": forecast.point[:, i, :, k].reshape(-1),
                "sigma": (forecast.sigma[:, i, :, k].reshape(-1) if forecast.sigma is not None
                          else np.full(b * steps, np.nan)),
            }, columns=FORECAST_COLUMNS)
            suffix = "" if c == 1 else f".ch{k}"
            path = out_dir / f"forecast_{safe_name(name)}{suffix}.csv"
            frame.to_csv(path, index=False, na_rep="")
            written.append(path)
    log.info("Wrote %d forecast file(s) to %s", len(written), out_dir)
    return written


def write_matrix(path, matrix: np.ndarray, row_names: list, col_prefix: str) -> Path:
    path = Path(path)
    frame = pd.DataFrame(np.asarray(matrix), index=list(row_names),
                         columns=[f"{col_prefix}{j}" for j in range(np.shape(matrix)[1])])
    frame.index.name = "name"
    frame.to_csv(path)
    return path


def write_structure(out_dir, names: list, soft: IncidenceMatrix, hard: IncidenceMatrix) -> tuple[Path, Path]:
    out_dir = Path(out_dir)
    soft_path = write_matrix(out_dir / "structure_soft.csv", soft.numpy(), names, "edge")
    hard_path = write_matrix(out_dir / "structure_hard.csv", hard.numpy().astype(int), names, "edge")
    return soft_path, hard_path


def write_attention(out_dir, names: list, alpha: np.ndarray | None, beta: np.ndarray | None) -> list[Path]:
    """Mean α (hyperedge × node) and β (node × hyperedge) matrices."""
    out_dir = Path(out_dir)
    written = []
    if alpha is not None:
        written.append(write_matrix(out_dir / "alpha.csv", alpha, [f"edge{j}" for j in range(alpha.shape[0])], ""))
        # columns of alpha are nodes
        frame = pd.read_csv(written[-1], index_col=0)
        frame.columns = list(names)
        frame.to_csv(written[-1])
    if beta is not None:
        written.append(write_matrix(out_dir / "beta.csv", beta, names, "edge"))
    return written


def write_metrics(path, report: MetricReport) -> Path:
    path = Path(path)
    rows = report.rows()
    if report.mean_sigma is not None:
        rows.append({"scope": "mean_sigma", "mae": report.mean_sigma, "rmse": np.nan, "mape": np.nan})
        rows.append({"scope": "coverage_95", "mae": report.coverage, "rmse": np.nan, "mape": np.nan})
    pd.DataFrame(rows, columns=["scope", *METRIC_KEYS]).to_csv(path, index=False, na_rep="")
    return path


def delta_pct(value: float, reference: float) -> float:
    """(value − reference) / reference · 100."""
    if reference == 0 or not np.isfinite(reference):
        return float("nan")
    return (value - reference) / reference * 100.0


def write_ablation(path, results: dict) -> Path:
    """``results`` maps variant → MetricReport or an error message string."""
    path = Path(path)
    full = results.get("full")
    rows = []
    for variant, outcome in results.items():
        row = {"variant": variant}
        if isinstance(outcome, MetricReport):
            row["status"] = "ok"
            for key in METRIC_KEYS:
                value = getattr(outcome, key)
                row[key] = value
                row[f"{key}_delta_pct"] = (delta_pct(value, getattr(full, key))
                                           if isinstance(full, MetricReport) else np.nan)
        else:
            row["status"] = f"failed: {outcome}"
        rows.append(row)
    columns = ["variant", *METRIC_KEYS, *(f"{k}_delta_pct" for k in METRIC_KEYS), "status"]
    pd.DataFrame(rows, columns=columns).to_csv(path, index=False, na_rep="")
    return path


def write_sweep(path, rows: list[dict]) -> Path:
    path = Path(path)
    pd.DataFrame(rows).to_csv(path, index=False, na_rep="")
    return path


def write_resolved_config(out_dir, text: str) -> Path:
    path = Path(out_dir) / "resolved_config.txt"
    path.write_text(text, encoding="utf-8")
    return path
