"""Series tables, rolling-window batches and the per-series normalizer."""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np
import pandas as pd

from ..errors import ConfigError, NormalizerScopeError, ShapeMismatch

_STAT_FLOOR = 1e-8


@dataclass
class SeriesTable:
    """T×n×c values with a same-shape 0/1 observation mask.

    Missing entries carry mask 0; their values are left as they were read
    (zero for blank CSV cells) and are zero-filled again when windows are fed
    to the model. ``scope`` tags which split the table came from.
    """
    values: np.ndarray
    mask: np.ndarray
    names: list
    timestamps: pd.DatetimeIndex | None = None
    scope: str | None = None

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        self.mask = np.asarray(self.mask, dtype=np.float64)
        if self.values.ndim != 3:
            raise ShapeMismatch(f"series values must be T×n×c, got {list(self.values.shape)}")
        if self.mask.shape != self.values.shape:
            raise ShapeMismatch("mask shape differs from values shape")
        if len(self.names) != self.values.shape[1]:
            raise ShapeMismatch(f"{len(self.names)} names for {self.values.shape[1]} series")

    @property
    def T(self) -> int:
        return self.values.shape[0]

    @property
    def n(self) -> int:
        return self.values.shape[1]

    @property
    def c(self) -> int:
        return self.values.shape[2]

    @property
    def missing(self) -> int:
        return int(self.mask.size - self.mask.sum())

    def slice(self, start: int, stop: int, scope: str | None = None) -> "SeriesTable":
        ts = self.timestamps[start:stop] if self.timestamps is not None else None
        return SeriesTable(self.values[start:stop].copy(), self.mask[start:stop].copy(),
                           list(self.names), ts, scope)

    def with_mask(self, mask: np.ndarray) -> "SeriesTable":
        return replace(self, values=self.values.copy(), mask=np.asarray(mask, dtype=np.float64))


@dataclass
class WindowBatch:
    """b rolling windows: inputs b×n×τ×c, targets b×n×υ×c, plus masks."""
    inputs: np.ndarray
    targets: np.ndarray
    input_mask: np.ndarray
    target_mask: np.ndarray
    starts: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=int))

    @property
    def size(self) -> int:
        return self.inputs.shape[0]

    @property
    def observed(self) -> int:
        return int(self.target_mask.sum())

    def subset(self, index) -> "WindowBatch":
        starts = self.starts[index] if self.starts.size else self.starts
        return WindowBatch(self.inputs[index], self.targets[index],
                           self.input_mask[index], self.target_mask[index], starts)


class Normalizer:
    """Per-(series, channel) z-score or min-max scaling fitted on observed train entries."""

    KINDS = ("zscore", "minmax")

    def __init__(self, kind: str = "zscore"):
        if kind not in self.KINDS:
            raise ConfigError(f"unknown normalizer {kind!r} (expected zscore or minmax)")
        self.kind = kind
        self.center: np.ndarray | None = None
        self.scale: np.ndarray | None = None
        self.fitted_scope: str | None = None

    def fit(self, table: SeriesTable) -> "Normalizer":
        if table.scope != "train":
            raise NormalizerScopeError(f"normalizer must be fitted on the train split, got scope={table.scope!r}")
        observed = table.mask > 0
        count = observed.sum(axis=0)
        has = count > 0
        vals = np.where(observed, table.values, np.nan)
        with np.errstate(all="ignore"):
            if self.kind == "zscore":
                center = np.where(has, np.nansum(vals, axis=0) / np.maximum(count, 1), 0.0)
                var = np.nansum((vals - center) ** 2, axis=0) / np.maximum(count, 1)
                scale = np.sqrt(var)
            else:
                lo = np.where(has, np.nanmin(np.where(observed, table.values, np.inf), axis=0), 0.0)
                hi = np.where(has, np.nanmax(np.where(observed, table.values, -np.inf), axis=0), 1.0)
                center, scale = lo, hi - lo
        self.center = center
        self.scale = np.where(has, np.maximum(scale, _STAT_FLOOR), 1.0)
        self.fitted_scope = table.scope
        return self

    def _stats(self, window: bool):
        if self.center is None:
            raise NormalizerScopeError("normalizer has not been fitted")
        if window:
            return self.center[:, None, :], self.scale[:, None, :]
        return self.center, self.scale

    def normalize(self, values: np.ndarray, window: bool = False) -> np.ndarray:
        """Scale values laid out ``…×n×c`` (or ``…×n×steps×c`` with ``window``)."""
        center, scale = self._stats(window)
        return (values - center) / scale

    def denormalize(self, values: np.ndarray, window: bool = False) -> np.ndarray:
        center, scale = self._stats(window)
        return values * scale + center

    def denormalize_spread(self, sigma: np.ndarray, window: bool = True) -> np.ndarray:
        """Map a standard deviation back to original units (scale only, no shift)."""
        _, scale = self._stats(window)
        return sigma * scale

    def transform(self, table: SeriesTable) -> SeriesTable:
        values = np.where(table.mask > 0, self.normalize(table.values), 0.0)
        return replace(table, values=values, mask=table.mask.copy())
