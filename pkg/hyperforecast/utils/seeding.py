"""One seeded generator hierarchy per run."""

from dataclasses import dataclass

import numpy as np


@dataclass
class SeedStreams:
    """Independent generators derived from a single run seed.

    data: synthetic generation and missingness; init: parameter init;
    shuffle: batch order; noise: Gumbel draws and dropout masks.
    """
    seed: int
    data: np.random.Generator
    init: np.random.Generator
    shuffle: np.random.Generator
    noise: np.random.Generator


def seed_streams(seed: int) -> SeedStreams:
    data, init, shuffle, noise = np.random.SeedSequence(int(seed)).spawn(4)
    return SeedStreams(
        seed=int(seed),
        data=np.random.default_rng(data),
        init=np.random.default_rng(init),
        shuffle=np.random.default_rng(shuffle),
        noise=np.random.default_rng(noise),
    )
