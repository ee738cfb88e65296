"""Tests for the CSV writers and sweep helpers."""

import math

import numpy as np
import pandas as pd
import pytest

from hyperforecast.errors import ConfigError
from hyperforecast.models.forecast import Forecast
from hyperforecast.services.experiment_service import parse_grid, sweep_points
from hyperforecast.services.export_service import (
    delta_pct, safe_name, write_ablation, write_forecasts, write_metrics,
)
from hyperforecast.services.metrics_service import compute_metrics


class TestWriters:
    def test_delta_pct(self):
        assert delta_pct(1.1, 1.0) == pytest.approx(10.0)
        assert math.isnan(delta_pct(1.0, 0.0))

    def test_safe_name(self):
        assert safe_name("loop 12/A") == "loop_12_A"

    def test_forecasts_with_sigma_and_missing_truth(self, tmp_path):
        point = np.arange(12.0).reshape(2, 1, 3, 2)
        mask = np.ones_like(point)
        mask[0, 0, 1, 1] = 0.0
        fc = Forecast(point=point, sigma=np.full_like(point, 0.5), scale="original")
        paths = write_forecasts(tmp_path, ["a"], fc, point + 1.0, mask)
        assert [p.name for p in paths] == ["forecast_a.ch0.csv", "forecast_a.ch1.csv"]
        frame = pd.read_csv(paths[1])
        assert len(frame) == 6
        assert math.isnan(frame["truth"][1])
        assert (frame["sigma"] == 0.5).all()

    def test_metrics_include_interval_rows(self, tmp_path):
        report = compute_metrics(np.zeros((1, 3, 1)), np.ones((1, 3, 1)), sigma=np.ones((1, 3, 1)))
        frame = pd.read_csv(write_metrics(tmp_path / "metrics.csv", report))
        assert frame["scope"].tolist()[-2:] == ["mean_sigma", "coverage_95"]

    def test_ablation_keeps_failed_rows(self, tmp_path):
        full = compute_metrics(np.zeros((1, 2, 1)), np.ones((1, 2, 1)))
        worse = compute_metrics(np.zeros((1, 2, 1)), np.full((1, 2, 1), 2.0))
        frame = pd.read_csv(write_ablation(tmp_path / "ablation.csv",
                                           {"full": full, "no_sttn": worse, "no_spatial": "diverged"}))
        assert frame["status"].tolist() == ["ok", "ok", "failed: diverged"]
        assert frame.loc[1, "mae_delta_pct"] == pytest.approx(100.0)
        assert math.isnan(frame.loc[2, "mae"])


class TestSweepHelpers:
    def test_parse_grid(self):
        assert parse_grid(["model.m=2, 5", "train.lr=0.01"]) == {"model.m": ["2", "5"], "train.lr": ["0.01"]}

    @pytest.mark.parametrize("item", ["model.m", "=1,2", "model.m="])
    def test_parse_grid_rejects(self, item):
        with pytest.raises(ConfigError):
            parse_grid([item])

    def test_cartesian_product(self):
        points = sweep_points({"model.m": ["2", "5"], "model.d": ["6", "18"]})
        assert len(points) == 4
        assert {"model.m": "5", "model.d": "6"} in points

    def test_one_at_a_time(self):
        points = sweep_points({"model.m": ["2", "5"], "model.d": ["6"]}, one_at_a_time=True)
        assert points == [{"model.m": "2"}, {"model.m": "5"}, {"model.d": "6"}]
