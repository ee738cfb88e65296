"""Hypergraph GRU: GRU gates whose input transform is an HgAT pass."""

from __future__ import annotations

import numpy as np

from ..core import ops
from ..core.tensor import Tensor, as_tensor, constant
from ..errors import ShapeMismatch
from ..models.forecast import IncidenceMatrix
from .hgat_service import hgat_forward


def gru_step(x_t, h_prev, incidence: IncidenceMatrix, params, activation: str = "sigmoid",
             dropout: float = 0.0, rng: np.random.Generator | None = None) -> Tensor:
    """One recurrent step on B×n×d (or n×d) inputs.

    U = σ([f ‖ H] W_u + b_u), R = σ([f ‖ H] W_r + b_r),
    C = tanh([f ‖ R⊗H] W_c + b_c), H' = U⊗H + (1−U)⊗C with f = HgAT(x_t).
    """
    x_t, h_prev = as_tensor(x_t), as_tensor(h_prev)
    if x_t.shape != h_prev.shape:
        raise ShapeMismatch(f"gru_step: input {list(x_t.shape)} vs state {list(h_prev.shape)}")
    lead = x_t.shape[:-1]
    d = x_t.shape[-1]
    feats = hgat_forward(ops.reshape(x_t, (*lead, 1, d)), incidence, params.hgat,
                         activation=activation, dropout=dropout, rng=rng)
    f = ops.reshape(feats, x_t.shape)

    joint = ops.concat([f, h_prev], axis=-1)
    update = ops.sigmoid(ops.add(ops.matmul(joint, params.w_u), params.b_u))
    reset = ops.sigmoid(ops.add(ops.matmul(joint, params.w_r), params.b_r))
    candidate = ops.tanh(ops.add(ops.matmul(ops.concat([f, ops.mul(reset, h_prev)], axis=-1), params.w_c),
                                 params.b_c))
    return ops.add(ops.mul(update, h_prev), ops.mul(ops.sub(1.0, update), candidate))


def hgrl_unroll(window, incidence: IncidenceMatrix, params, activation: str = "sigmoid",
                dropout: float = 0.0, rng: np.random.Generator | None = None,
                h0: Tensor | None = None) -> Tensor:
    """Run ``gru_step`` over the step axis of a B×n×υ×d window; returns all hidden states."""
    window = as_tensor(window)
    if window.ndim not in (3, 4):
        raise ShapeMismatch(f"expected n×υ×d or B×n×υ×d window, got {list(window.shape)}")
    step_axis = window.ndim - 2
    state_shape = window.shape[:step_axis] + window.shape[-1:]
    h = h0 if h0 is not None else constant(np.zeros(state_shape))

    states = []
    for t in range(window.shape[step_axis]):
        h = gru_step(ops.take(window, t, axis=step_axis), h, incidence, params,
                     activation=activation, dropout=dropout, rng=rng)
        states.append(h)
    return ops.stack(states, axis=step_axis)
