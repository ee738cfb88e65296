"""Model outputs: incidence matrices, forecasts and metric reports."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..core.tensor import Tensor


@dataclass
class IncidenceMatrix:
    """n×m hypernode-to-hyperedge membership weights in [0, 1]."""
    weights: Tensor
    mode: str = "soft"

    @property
    def n(self) -> int:
        return self.weights.shape[0]

    @property
    def m(self) -> int:
        return self.weights.shape[1]

    def numpy(self) -> np.ndarray:
        return self.weights.numpy()


@dataclass
class ModelOutput:
    """Raw forward-pass tensors in normalized scale."""
    mu: Tensor
    logvar: Tensor | None = None
    incidence: IncidenceMatrix | None = None


@dataclass
class Forecast:
    """Point forecasts with optional standard deviations (…×n×υ×c)."""
    point: np.ndarray
    sigma: np.ndarray | None = None
    scale: str = "normalized"

    def interval(self, z: float = 1.96):
        if self.sigma is None:
            return None
        return self.point - z * self.sigma, self.point + z * self.sigma


@dataclass
class MetricReport:
    """MAE/RMSE/MAPE in original scale, aggregate and per horizon step."""
    mae: float
    rmse: float
    mape: float
    count: int
    per_horizon: list = field(default_factory=list)
    mean_sigma: float | None = None
    coverage: float | None = None

    def horizon(self, step: int) -> dict | None:
        """Metrics at 1-based horizon ``step``."""
        for row in self.per_horizon:
            if row["step"] == step:
                return row
        return None

    def rows(self) -> list[dict]:
        out = [{"scope": "all", "mae": self.mae, "rmse": self.rmse, "mape": self.mape}]
        for k in (3, 6, 12):
            row = self.horizon(k)
            if row is not None:
                out.append({"scope": f"horizon@{k}", "mae": row["mae"], "rmse": row["rmse"], "mape": row["mape"]})
        for row in self.per_horizon:
            out.append({"scope": f"step{row['step']}", "mae": row["mae"], "rmse": row["rmse"], "mape": row["mape"]})
        return out
