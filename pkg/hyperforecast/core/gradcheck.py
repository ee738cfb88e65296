"""Central-difference gradient checking."""

from __future__ import annotations

import logging
from typing import Callable

import numpy as np

from ..errors import DomainError
from .tape import Tape, backward
from .tensor import Tensor

log = logging.getLogger("hf.core")


def _as_list(x) -> list[Tensor]:
    if isinstance(x, Tensor):
        return [x]
    return list(x)


def analytic_gradients(f: Callable, x) -> list[np.ndarray]:
    """Run ``f(x)`` on a fresh tape and return d f / d x for every tensor in ``x``."""
    tensors = _as_list(x)
    saved = [(t.requires_grad, t.grad) for t in tensors]
    try:
        for t in tensors:
            t.requires_grad = True
            t.grad = None
        with Tape() as tape:
            loss = f(x)
        backward(loss, tape)
        return [np.zeros_like(t.values) if t.grad is None else t.grad.copy() for t in tensors]
    finally:
        for t, (req, grad) in zip(tensors, saved):
            t.requires_grad = req
            t.grad = grad


def grad_check(f: Callable, x, eps: float = 1e-5, max_entries: int | None = None,
               rng: np.random.Generator | None = None) -> float:
    """Max relative error between analytic and central-difference gradients.

    ``x`` is a tensor or a sequence of tensors; ``f`` is called with ``x``
    unchanged and must return a single-element tensor. With ``max_entries``
    only that many entries per tensor are checked (sampled with ``rng``).
    """
    if not 1e-7 <= eps <= 1e-3:
        raise DomainError(f"eps must lie in [1e-7, 1e-3], got {eps}")
    tensors = _as_list(x)
    analytic = analytic_gradients(f, x)
    rng = rng if rng is not None else np.random.default_rng(0)

    worst = 0.0
    for t, grad in zip(tensors, analytic):
        size = t.values.size
        indices = np.arange(size)
        if max_entries is not None and size > max_entries:
            indices = rng.choice(size, size=max_entries, replace=False)
        for k in indices:
            idx = np.unravel_index(k, t.shape)
            orig = t.values[idx]
            t.values[idx] = orig + eps
            plus = f(x).item()
            t.values[idx] = orig - eps
            minus = f(x).item()
            t.values[idx] = orig
            numeric = (plus - minus) / (2.0 * eps)
            err = abs(grad.reshape(-1)[k] - numeric) / max(1.0, abs(numeric))
            worst = max(worst, err)

    log.debug("grad_check over %d tensor(s): max rel error %.3e", len(tensors), worst)
    return worst
