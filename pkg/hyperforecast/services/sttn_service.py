"""Dual-axis transformer: temporal self-attention, then spatial self-attention."""

from __future__ import annotations

import numpy as np

from ..core import ops
from ..core.tensor import Tensor, as_tensor
from ..errors import ConfigError, ShapeMismatch

LAYER_NORM_EPS = 1e-8
AXES = ("time", "nodes")


def layer_norm(x: Tensor, scale: Tensor | None = None, shift: Tensor | None = None,
               eps: float = LAYER_NORM_EPS) -> Tensor:
    """Normalize each feature vector (last axis) to mean 0, variance 1."""
    centred = ops.sub(x, ops.mean(x, axis=-1, keepdims=True))
    var = ops.mean(ops.mul(centred, centred), axis=-1, keepdims=True)
    out = ops.div(centred, ops.sqrt(ops.add(var, eps)))
    if scale is not None:
        out = ops.mul(out, scale)
    if shift is not None:
        out = ops.add(out, shift)
    return out


def _batched(x) -> tuple[Tensor, bool]:
    x = as_tensor(x)
    if x.ndim == 3:
        return ops.reshape(x, (1, *x.shape)), True
    if x.ndim != 4:
        raise ShapeMismatch(f"expected n×υ×d or B×n×υ×d input, got {list(x.shape)}")
    return x, False


def multihead_attention_over_axis(x, axis: str, params, heads: int,
                                  weights_out: list | None = None) -> Tensor:
    """Self-attention along the node axis (``nodes``) or the step axis (``time``).

    Input B×n×υ×d; the attended sequence is υ for ``time`` and n for
    ``nodes``. Attention distributions are appended to ``weights_out``.
    """
    if axis not in AXES:
        raise ConfigError(f"attention axis must be time or nodes, got {axis!r}")
    x, squeeze = _batched(x)
    d = x.shape[-1]
    if heads < 1 or d % heads:
        raise ConfigError(f"embedding size {d} is not divisible by {heads} heads")
    hd = d // heads

    seq = ops.swapaxes(x, 1, 2) if axis == "nodes" else x
    B, A, L, _ = seq.shape

    def split(t):
        return ops.transpose(ops.reshape(t, (B, A, L, heads, hd)), (0, 1, 3, 2, 4))

    q = split(ops.matmul(seq, params.wq))
    k = split(ops.matmul(seq, params.wk))
    v = split(ops.matmul(seq, params.wv))
    energy = ops.mul(ops.matmul(q, ops.swapaxes(k, -1, -2)), 1.0 / np.sqrt(hd))
    attention = ops.softmax_lastdim(energy)
    if weights_out is not None:
        weights_out.append(attention.values)
    merged = ops.reshape(ops.transpose(ops.matmul(attention, v), (0, 1, 3, 2, 4)), (B, A, L, d))
    out = ops.add(ops.matmul(merged, params.wo), params.bo)
    if axis == "nodes":
        out = ops.swapaxes(out, 1, 2)
    return ops.reshape(out, out.shape[1:]) if squeeze else out


def _mlp(x: Tensor, block) -> Tensor:
    hidden = ops.relu(ops.add(ops.matmul(x, block.mlp_w1), block.mlp_b1))
    return ops.add(ops.matmul(hidden, block.mlp_w2), block.mlp_b2)


def _maybe_dropout(x, dropout, rng):
    if rng is not None and dropout > 0:
        return ops.dropout(x, dropout, rng)
    return x


def encoder_block(x, axis: str, block, heads: int, post_norm: bool = False,
                  initial_connection: bool = True, dropout: float = 0.0,
                  rng: np.random.Generator | None = None) -> Tensor:
    """Attention and MLP sub-blocks with residuals (pre-norm unless ``post_norm``)."""
    x = as_tensor(x)
    if post_norm:
        y = layer_norm(ops.add(x, _maybe_dropout(multihead_attention_over_axis(x, axis, block.attn, heads), dropout, rng)),
                       block.ln1_scale, block.ln1_shift)
        z = layer_norm(ops.add(y, _maybe_dropout(_mlp(y, block), dropout, rng)), block.ln2_scale, block.ln2_shift)
    else:
        attn = multihead_attention_over_axis(layer_norm(x, block.ln1_scale, block.ln1_shift), axis, block.attn, heads)
        y = ops.add(x, _maybe_dropout(attn, dropout, rng))
        z = ops.add(y, _maybe_dropout(_mlp(layer_norm(y, block.ln2_scale, block.ln2_shift), block), dropout, rng))
    if initial_connection:
        z = ops.add(z, x)
    return z


def sttn_forward(x, params, heads: int, post_norm: bool = False, initial_connection: bool = True,
                 dropout: float = 0.0, rng: np.random.Generator | None = None,
                 temporal: bool = True, spatial: bool = True) -> Tensor:
    """Temporal blocks feed spatial blocks; either stage can be switched off."""
    out = as_tensor(x)
    kwargs = dict(heads=heads, post_norm=post_norm, initial_connection=initial_connection,
                  dropout=dropout, rng=rng)
    if temporal:
        for block in params.temporal:
            out = encoder_block(out, "time", block, **kwargs)
    if spatial:
        for block in params.spatial:
            out = encoder_block(out, "nodes", block, **kwargs)
    return out
