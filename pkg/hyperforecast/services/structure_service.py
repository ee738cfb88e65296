"""Implicit hypergraph inference.

Node and hyperedge embeddings give pairwise connection probabilities; a
Gumbel-softmax relaxation of the connect/no-connect choice turns them into a
soft incidence matrix that is resampled on every forward pass.
"""

import logging

import numpy as np

from ..core import ops
from ..core.tensor import Tensor, constant
from ..errors import InvalidTemperature, ZeroNormEmbedding
from ..models.forecast import IncidenceMatrix
from ..models.params import EmbeddingBank

log = logging.getLogger("hf.structure")

_NORM_FLOOR = 1e-8


def _unit_rows(z: Tensor, label: str) -> Tensor:
    norms = np.linalg.norm(z.values, axis=-1)
    if np.any(norms < _NORM_FLOOR):
        bad = int(np.argmin(norms))
        raise ZeroNormEmbedding(f"{label} embedding {bad} has norm {norms[bad]:.3g}")
    length = ops.sqrt(ops.sum(ops.mul(z, z), axis=-1, keepdims=True))
    return ops.div(z, length)


def similarity(bank: EmbeddingBank) -> Tensor:
    """S = (cos(z_i, z_j) + 1) / 2 as an n×m tensor in [0, 1]."""
    zi = _unit_rows(bank.node_embeddings, "node")
    zj = _unit_rows(bank.edge_embeddings, "edge")
    cos = ops.matmul(zi, ops.transpose(zj))
    return ops.mul(ops.add(cos, 1.0), 0.5)


def pairwise_probabilities(bank: EmbeddingBank) -> Tensor:
    """n×m×2 tensor: channel 0 is σ(S), channel 1 is σ(1 − S)."""
    s = similarity(bank)
    return ops.sigmoid(ops.stack([s, ops.sub(1.0, s)], axis=-1))


def gumbel_noise(rng: np.random.Generator, shape) -> np.ndarray:
    u = rng.uniform(np.finfo(np.float64).tiny, 1.0, size=shape)
    return -np.log(-np.log(u))


def sample_incidence(probs: Tensor, gamma: float, epsilon: float = 1e-8,
                     rng: np.random.Generator | None = None,
                     noise: np.ndarray | None = None) -> IncidenceMatrix:
    """Soft incidence from a Gumbel-softmax over the two categories.

    Noise comes from ``noise`` when given, else from ``rng``. With neither the
    draw is skipped, which is the deterministic evaluation mode.
    """
    if gamma <= 0:
        raise InvalidTemperature(f"Gumbel temperature must be > 0, got {gamma}")
    if noise is None and rng is not None:
        noise = gumbel_noise(rng, probs.shape)
    logits = ops.add(probs, epsilon)
    if noise is not None:
        logits = ops.add(logits, constant(noise))
    soft = ops.softmax_lastdim(ops.mul(logits, 1.0 / gamma))
    return IncidenceMatrix(ops.take(soft, 0, axis=-1), "soft")


def harden_incidence(soft: IncidenceMatrix, threshold: float = 0.5) -> IncidenceMatrix:
    """Entry 1 where the soft weight reaches ``threshold``, else 0."""
    hard = (soft.weights.values >= threshold).astype(np.float64)
    return IncidenceMatrix(constant(hard), "hard")


def straight_through(soft: IncidenceMatrix, threshold: float = 0.5) -> IncidenceMatrix:
    """Hardened values forward, soft gradient backward."""
    hard = harden_incidence(soft, threshold).weights.values
    shift = constant(hard - soft.weights.values)
    return IncidenceMatrix(ops.add(soft.weights, shift), "hard")


def edge_density(incidence: IncidenceMatrix) -> float:
    """Fraction of node/edge pairs that are connected (mean weight)."""
    return float(incidence.weights.values.mean())


def learn_structure(bank: EmbeddingBank, config, rng: np.random.Generator | None = None) -> IncidenceMatrix:
    """Sample the incidence used by one forward pass."""
    probs = pairwise_probabilities(bank)
    incidence = sample_incidence(probs, config.gamma, config.epsilon, rng=rng)
    if config.straight_through:
        incidence = straight_through(incidence, config.harden_threshold)
    if log.isEnabledFor(logging.DEBUG):
        log.debug("sampled incidence (%s): density %.3f", "train" if rng is not None else "eval",
                  edge_density(harden_incidence(incidence, config.harden_threshold)))
    return incidence
