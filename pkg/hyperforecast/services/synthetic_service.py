"""Planted-structure synthetic series.

n series split into m_true contiguous blocks; every series in a block follows
that block's seasonal driver with its own phase shift plus Gaussian noise.
Optionally each block also shares a persistent AR(1) disturbance, and the
first member of a block can run ``lead`` steps ahead of the others on it.
"""

from __future__ import annotations

import logging

import numpy as np
import pandas as pd

from ..errors import ConfigError
from ..models.series import SeriesTable

log = logging.getLogger("hf.data")

BASE_PERIOD = 12
PERIOD_STEP = 7
DISTURBANCE_PERSISTENCE = 0.8


def block_periods(m_true: int) -> list[int]:
    return [BASE_PERIOD + PERIOD_STEP * b for b in range(m_true)]


def planted_incidence(n: int, m_true: int) -> np.ndarray:
    size = n // m_true
    incidence = np.zeros((n, m_true))
    incidence[np.arange(n), np.arange(n) // size] = 1.0
    return incidence


def shared_disturbance(rng: np.random.Generator, steps: int, m_true: int, std: float) -> np.ndarray:
    """steps×m_true stationary AR(1) paths with marginal standard deviation ``std``."""
    phi = DISTURBANCE_PERSISTENCE
    shocks = rng.normal(size=(steps, m_true)) * std * np.sqrt(1.0 - phi ** 2)
    path = np.empty((steps, m_true))
    path[0] = rng.normal(size=m_true) * std
    for k in range(1, steps):
        path[k] = phi * path[k - 1] + shocks[k]
    return path


def generate_synthetic(n: int, T: int, m_true: int, noise_std=0.05,
                       rng: np.random.Generator | None = None, c: int = 1,
                       start: str = "2024-01-01", freq: str = "5min",
                       disturbance: float = 0.0, lead: int = 0):
    """Return ``(table, planted_incidence)``.

    ``noise_std`` is a scalar or one level per block; per-block levels give
    heteroscedastic series for uncertainty calibration. ``lead`` only shifts
    the shared disturbance, so it has no effect while ``disturbance`` is 0.
    """
    if n < 1 or T < 1 or m_true < 1 or c < 1:
        raise ConfigError("synthetic sizes must be >= 1")
    if n % m_true:
        raise ConfigError(f"n={n} is not divisible by m_true={m_true}")
    if disturbance < 0 or lead < 0:
        raise ConfigError("disturbance and lead must be non-negative")
    if np.ndim(noise_std) == 0:
        noise = np.full(m_true, float(noise_std))
    else:
        noise = np.asarray(noise_std, dtype=np.float64)
    if noise.shape != (m_true,) or np.any(noise < 0):
        raise ConfigError("noise_std must be a non-negative scalar or one value per block")
    rng = rng if rng is not None else np.random.default_rng(0)

    incidence = planted_incidence(n, m_true)
    block = np.argmax(incidence, axis=1)
    periods = np.asarray(block_periods(m_true), dtype=np.float64)[block]
    phase = rng.uniform(0.0, periods / 8.0)

    t = np.arange(T, dtype=np.float64)[:, None]
    clean = np.sin(2.0 * np.pi * (t + phase[None, :]) / periods[None, :])
    values = np.repeat(clean[:, :, None], c, axis=2)
    values = values + rng.normal(size=values.shape) * noise[block][None, :, None]

    if disturbance > 0:
        path = shared_disturbance(rng, T + lead, m_true, disturbance)
        # the leader reads the path `lead` steps later than its followers
        leader = np.arange(n) % (n // m_true) == 0
        offset = np.where(leader, lead, 0)
        rows = np.arange(T)[:, None] + offset[None, :]
        values = values + path[rows, block[None, :]][:, :, None]

    names = [f"s{i}" for i in range(n)]
    stamps = pd.date_range(start=start, periods=T, freq=freq)
    table = SeriesTable(values, np.ones_like(values), names, stamps)
    log.info("Generated synthetic table: n=%d T=%d blocks=%d disturbance=%.3g lead=%d",
             n, T, m_true, disturbance, lead)
    return table, incidence
