"""Factory Boy factories for hyperforecast domain objects."""

import factory
import numpy as np

from hyperforecast.models.config import ModelConfig, TrainConfig
from hyperforecast.models.series import SeriesTable


class ModelConfigFactory(factory.Factory):
    class Meta:
        model = ModelConfig

    n = 4
    c = 1
    tau = 6
    upsilon = 3
    d = 8
    m = 2
    hgat_heads = 2
    heads = 2
    dropout = 0.0


class TrainConfigFactory(factory.Factory):
    class Meta:
        model = TrainConfig

    epochs = 2
    lr = 1e-2
    batch_size = 8
    max_steps = 4
    seed = factory.Sequence(lambda n: n)


class SeriesTableFactory(factory.Factory):
    class Meta:
        model = SeriesTable

    class Params:
        T = 20
        n = 3
        c = 1
        seed = 0

    values = factory.LazyAttribute(lambda o: np.random.default_rng(o.seed).normal(size=(o.T, o.n, o.c)))
    mask = factory.LazyAttribute(lambda o: np.ones((o.T, o.n, o.c)))
    names = factory.LazyAttribute(lambda o: [f"s{i}" for i in range(o.n)])
    timestamps = None
    scope = None
