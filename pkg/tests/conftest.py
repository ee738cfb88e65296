"""Shared pytest fixtures for the hyperforecast test suite."""

import os

import numpy as np
import pytest

os.environ.setdefault("HF_ENV", "test")

from hyperforecast import create_runtime
from hyperforecast.core.tensor import constant
from hyperforecast.models.config import ModelConfig, TrainConfig
from hyperforecast.models.forecast import IncidenceMatrix
from hyperforecast.services.forecaster_service import init_params
from hyperforecast.services.synthetic_service import generate_synthetic


@pytest.fixture(scope="session", autouse=True)
def runtime():
    """Test runtime for the whole session (per-op non-finite checks on)."""
    return create_runtime("test")


@pytest.fixture
def rng():
    return np.random.default_rng(0)


@pytest.fixture
def toy_config():
    """4 series, τ=6, υ=3, d=8, m=2, two heads everywhere, no dropout."""
    return ModelConfig(n=4, c=1, tau=6, upsilon=3, d=8, m=2, hgat_heads=2, heads=2, dropout=0.0)


@pytest.fixture
def toy_params(toy_config):
    return init_params(toy_config, np.random.default_rng(1))


@pytest.fixture
def toy_batch(toy_config):
    """(inputs B×n×τ×c, targets B×n×υ×c) with B=2."""
    gen = np.random.default_rng(2)
    x = gen.normal(size=(2, toy_config.n, toy_config.tau, toy_config.c))
    y = gen.normal(size=(2, toy_config.n, toy_config.upsilon, toy_config.c))
    return x, y


@pytest.fixture
def fast_train_config():
    return TrainConfig(epochs=2, lr=1e-2, batch_size=8, max_steps=4, seed=0)


@pytest.fixture
def synthetic_table():
    table, _ = generate_synthetic(4, 80, 2, noise_std=0.05, rng=np.random.default_rng(3))
    return table


def incidence(rows):
    """IncidenceMatrix from a nested list (untracked)."""
    return IncidenceMatrix(constant(np.asarray(rows, dtype=np.float64)), "hard")


def zero_group(group):
    """Set every parameter of a group to zero in place."""
    for t in group.parameters():
        t.values[...] = 0.0
    return group
