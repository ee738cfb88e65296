"""Hypergraph attention operator.

Node features are laid out B×n×υ×d (a leading batch axis is added when a
3-axis tensor is passed). The incidence matrix is shared across the batch.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from ..core import ops
from ..core.tensor import Tensor, as_tensor, constant
from ..errors import ShapeMismatch
from ..models.forecast import IncidenceMatrix

log = logging.getLogger("hf.structure")

NORM_EPS = 1e-5


@dataclass
class AttentionTrace:
    """Collects α (m×n) and β (n×m) matrices, averaged over the batch."""
    alpha: list = field(default_factory=list)
    beta: list = field(default_factory=list)

    def record(self, kind: str, layer: int, head: int, weights: Tensor) -> None:
        getattr(self, kind).append((layer, head, weights.values.mean(axis=0)))

    def mean(self, kind: str) -> np.ndarray | None:
        entries = getattr(self, kind)
        if not entries:
            return None
        return np.mean([w for _, _, w in entries], axis=0)


def _batched(x) -> tuple[Tensor, bool]:
    x = as_tensor(x)
    if x.ndim == 3:
        return ops.reshape(x, (1, *x.shape)), True
    if x.ndim != 4:
        raise ShapeMismatch(f"expected n×υ×d or B×n×υ×d features, got {list(x.shape)}")
    return x, False


def _unbatch(x: Tensor, squeeze: bool) -> Tensor:
    return ops.reshape(x, x.shape[1:]) if squeeze else x


def _check_incidence(h: Tensor, incidence: IncidenceMatrix):
    if incidence.weights.ndim != 2 or incidence.n != h.shape[1]:
        raise ShapeMismatch(f"incidence {list(incidence.weights.shape)} does not match {h.shape[1]} nodes")


def intra_edge_aggregate(node_feats, incidence: IncidenceMatrix, layer, trace: AttentionTrace | None = None,
                         layer_index: int = 0) -> Tensor:
    """Hyperedge representations: attention-pooled member nodes, summed over heads."""
    h, squeeze = _batched(node_feats)
    _check_incidence(h, incidence)
    B, n, steps, d = h.shape
    m = incidence.m
    weights_t = ops.transpose(incidence.weights)
    present = constant((incidence.weights.values.sum(axis=0) > 0).astype(np.float64).reshape(1, m, 1, 1))
    grid = constant(np.zeros((B, m, n)))

    out = None
    for z, head in enumerate(layer.heads):
        a = ops.matmul(h, head.w0)
        score = ops.mean(ops.relu(a), axis=(2, 3))
        logits = ops.add(ops.reshape(score, (B, 1, n)), grid)
        alpha = ops.softmax_lastdim(logits, weights_t)
        if trace is not None:
            trace.record("alpha", layer_index, z, alpha)
        pooled = ops.matmul(alpha, ops.reshape(a, (B, n, steps * d)))
        edge = ops.mul(ops.sigmoid(ops.reshape(pooled, (B, m, steps, d))), present)
        out = edge if out is None else ops.add(out, edge)
    return _unbatch(out, squeeze)


def inter_edge_aggregate(node_feats, edge_feats, incidence: IncidenceMatrix, layer,
                         trace: AttentionTrace | None = None, layer_index: int = 0) -> Tensor:
    """Node representations: self term plus attention over incident hyperedges."""
    h, squeeze = _batched(node_feats)
    e, _ = _batched(edge_feats)
    _check_incidence(h, incidence)
    B, n, steps, d = h.shape
    m = incidence.m
    if e.shape != (B, m, steps, d):
        raise ShapeMismatch(f"edge features {list(e.shape)} do not match {[B, m, steps, d]}")

    out = None
    for z, head in enumerate(layer.heads):
        node_side = ops.reshape(ops.take(head.w3, 0, axis=0), (d, 1))
        edge_side = ops.reshape(ops.take(head.w3, 1, axis=0), (d, 1))
        u = ops.reshape(ops.matmul(ops.matmul(h, head.w2), node_side), (B, n, 1, steps))
        v = ops.reshape(ops.matmul(ops.matmul(e, head.w2), edge_side), (B, 1, m, steps))
        phi = ops.mean(ops.relu(ops.add(u, v)), axis=-1)
        beta = ops.softmax_lastdim(phi, incidence.weights)
        if trace is not None:
            trace.record("beta", layer_index, z, beta)
        messages = ops.reshape(ops.matmul(e, head.w1), (B, m, steps * d))
        gathered = ops.reshape(ops.matmul(beta, messages), (B, n, steps, d))
        node = ops.relu(ops.add(ops.matmul(h, head.w0), gathered))
        out = node if out is None else ops.add(out, node)
    return _unbatch(out, squeeze)


def normalize_nodes(x: Tensor, scale: Tensor, shift: Tensor, eps: float = NORM_EPS) -> Tensor:
    """Per-feature normalization over the node axis (axis 1) with learned scale/shift.

    With a single node the variance is zero, so the result is just ``shift``
    and the update carries no information from ``x``.
    """
    centred = ops.sub(x, ops.mean(x, axis=1, keepdims=True))
    var = ops.mean(ops.mul(centred, centred), axis=1, keepdims=True)
    xhat = ops.div(centred, ops.sqrt(ops.add(var, eps)))
    return ops.add(ops.mul(xhat, scale), shift)


def _activate(x: Tensor, activation: str) -> Tensor:
    return ops.sigmoid(x) if activation == "sigmoid" else x


def gated_fuse(updated, original, gate, activation: str = "sigmoid") -> Tensor:
    """act(g ⊗ updated + (1 − g) ⊗ original) with g = σ(f_s(updated) + f_g(original)).

    ``gate`` is any group with ``f_s, b_s, f_g, b_g``.
    """
    updated, original = as_tensor(updated), as_tensor(original)
    if updated.shape != original.shape:
        raise ShapeMismatch(f"gated_fuse: {list(updated.shape)} vs {list(original.shape)}")
    g = ops.sigmoid(ops.add(ops.add(ops.matmul(updated, gate.f_s), gate.b_s),
                            ops.add(ops.matmul(original, gate.f_g), gate.b_g)))
    blend = ops.add(ops.mul(g, updated), ops.mul(ops.sub(1.0, g), original))
    return _activate(blend, activation)


def hgat_forward(node_feats, incidence: IncidenceMatrix, params, activation: str = "sigmoid",
                 dropout: float = 0.0, rng: np.random.Generator | None = None,
                 trace: AttentionTrace | None = None) -> Tensor:
    """Stacked HgAT layers; dropout only applies when ``rng`` is given."""
    h, squeeze = _batched(node_feats)
    for li, layer in enumerate(params.layers):
        edges = intra_edge_aggregate(h, incidence, layer, trace, li)
        updated = inter_edge_aggregate(h, edges, incidence, layer, trace, li)
        updated = normalize_nodes(updated, layer.norm_scale, layer.norm_shift)
        if rng is not None and dropout > 0:
            updated = ops.dropout(updated, dropout, rng)
        h = gated_fuse(updated, h, layer, activation)
    return _unbatch(h, squeeze)
