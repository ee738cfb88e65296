"""Differentiable ops.

Every op computes its value with numpy, then registers a backward rule on the
active tape through ``tape.record``. Backward rules return one gradient per
input (``None`` for inputs that never need one).
"""

from __future__ import annotations

from typing import Sequence

import numpy as np

from ..errors import DomainError, NonFiniteValue, ShapeMismatch
from . import tensor as _tensor
from .tape import record
from .tensor import Tensor, as_tensor, constant


def _finish(op, values, inputs, backward_fn):
    out = Tensor(values, _check=False)
    if _tensor.debug_checks_enabled() and not np.all(np.isfinite(out.values)):
        raise NonFiniteValue(f"{op} produced NaN or Inf")
    return record(op, out, inputs, backward_fn)


def _unbroadcast(g, shape):
    """Sum ``g`` down to ``shape`` (inverse of numpy broadcasting)."""
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for axis, size in enumerate(shape):
        if size == 1 and g.shape[axis] != 1:
            g = g.sum(axis=axis, keepdims=True)
    return g


def _broadcast_shape(op, a, b):
    try:
        return np.broadcast_shapes(a.shape, b.shape)
    except ValueError:
        raise ShapeMismatch(f"{op}: shapes {list(a.shape)} and {list(b.shape)} do not broadcast") from None


def _norm_axes(axis, ndim):
    if axis is None:
        return tuple(range(ndim))
    if isinstance(axis, int):
        axis = (axis,)
    return tuple(sorted(a % ndim for a in axis))


# ── binary elementwise ──────────────────────────────────────────────────────

def add(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _broadcast_shape("add", a, b)

    def back(g):
        return _unbroadcast(g, a.shape), _unbroadcast(g, b.shape)
    return _finish("add", a.values + b.values, (a, b), back)


def sub(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _broadcast_shape("sub", a, b)

    def back(g):
        return _unbroadcast(g, a.shape), _unbroadcast(-g, b.shape)
    return _finish("sub", a.values - b.values, (a, b), back)


def mul(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _broadcast_shape("mul", a, b)

    def back(g):
        return _unbroadcast(g * b.values, a.shape), _unbroadcast(g * a.values, b.shape)
    return _finish("mul", a.values * b.values, (a, b), back)


def div(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _broadcast_shape("div", a, b)
    if np.any(b.values == 0):
        raise DomainError("div: denominator contains zeros")

    def back(g):
        return (_unbroadcast(g / b.values, a.shape),
                _unbroadcast(-g * a.values / (b.values * b.values), b.shape))
    return _finish("div", a.values / b.values, (a, b), back)


# ── unary elementwise ───────────────────────────────────────────────────────

def neg(t) -> Tensor:
    t = as_tensor(t)
    return _finish("neg", -t.values, (t,), lambda g: (-g,))


def exp(t) -> Tensor:
    t = as_tensor(t)
    y = np.exp(t.values)
    return _finish("exp", y, (t,), lambda g: (g * y,))


def log(t) -> Tensor:
    t = as_tensor(t)
    if np.any(t.values <= 0):
        raise DomainError("log of a non-positive value")
    return _finish("log", np.log(t.values), (t,), lambda g: (g / t.values,))


def sqrt(t) -> Tensor:
    t = as_tensor(t)
    if np.any(t.values < 0):
        raise DomainError("sqrt of a negative value")
    y = np.sqrt(t.values)
    return _finish("sqrt", y, (t,), lambda g: (g / (2.0 * y),))


def sigmoid(t) -> Tensor:
    t = as_tensor(t)
    # tanh form saturates to exactly 0/1 without overflow warnings
    y = 0.5 * (1.0 + np.tanh(0.5 * t.values))
    return _finish("sigmoid", y, (t,), lambda g: (g * y * (1.0 - y),))


def tanh(t) -> Tensor:
    t = as_tensor(t)
    y = np.tanh(t.values)
    return _finish("tanh", y, (t,), lambda g: (g * (1.0 - y * y),))


def relu(t) -> Tensor:
    t = as_tensor(t)
    on = t.values > 0
    return _finish("relu", np.where(on, t.values, 0.0), (t,), lambda g: (g * on,))


def abs(t) -> Tensor:  # noqa: A001
    t = as_tensor(t)
    return _finish("abs", np.abs(t.values), (t,), lambda g: (g * np.sign(t.values),))


def square(t) -> Tensor:
    return mul(t, t)


# ── reductions ──────────────────────────────────────────────────────────────

def sum(t, axis=None, keepdims=False) -> Tensor:  # noqa: A001
    t = as_tensor(t)
    axes = _norm_axes(axis, t.ndim)
    y = t.values.sum(axis=axes, keepdims=keepdims)

    def back(g):
        if not keepdims:
            g = np.expand_dims(g, axes) if axes else g
        return (np.broadcast_to(g, t.shape),)
    return _finish("sum", y, (t,), back)


def mean(t, axis=None, keepdims=False) -> Tensor:
    t = as_tensor(t)
    axes = _norm_axes(axis, t.ndim)
    count = int(np.prod([t.shape[a] for a in axes])) if axes else 1
    return mul(sum(t, axis=axis, keepdims=keepdims), 1.0 / count)


# ── linear algebra / shape ──────────────────────────────────────────────────

def matmul(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    if a.ndim < 2 or b.ndim < 2 or a.shape[-1] != b.shape[-2]:
        raise ShapeMismatch(f"matmul: {list(a.shape)} x {list(b.shape)}")
    try:
        np.broadcast_shapes(a.shape[:-2], b.shape[:-2])
    except ValueError:
        raise ShapeMismatch(f"matmul: leading axes {list(a.shape[:-2])} and {list(b.shape[:-2])} do not broadcast") from None

    def back(g):
        ga = np.matmul(g, np.swapaxes(b.values, -1, -2))
        gb = np.matmul(np.swapaxes(a.values, -1, -2), g)
        return _unbroadcast(ga, a.shape), _unbroadcast(gb, b.shape)
    return _finish("matmul", np.matmul(a.values, b.values), (a, b), back)


def reshape(t, shape) -> Tensor:
    t = as_tensor(t)
    try:
        y = t.values.reshape(shape)
    except ValueError:
        raise ShapeMismatch(f"reshape: {list(t.shape)} -> {list(shape)}") from None
    return _finish("reshape", y, (t,), lambda g: (g.reshape(t.shape),))


def transpose(t, axes=None) -> Tensor:
    t = as_tensor(t)
    axes = tuple(reversed(range(t.ndim))) if axes is None else tuple(a % t.ndim for a in axes)
    inverse = tuple(np.argsort(axes))
    return _finish("transpose", np.transpose(t.values, axes), (t,),
                   lambda g: (np.transpose(g, inverse),))


def swapaxes(t, a1, a2) -> Tensor:
    t = as_tensor(t)
    axes = list(range(t.ndim))
    axes[a1], axes[a2] = axes[a2], axes[a1]
    return transpose(t, axes)


def concat(tensors: Sequence, axis=-1) -> Tensor:
    tensors = tuple(as_tensor(t) for t in tensors)
    try:
        y = np.concatenate([t.values for t in tensors], axis=axis)
    except ValueError:
        raise ShapeMismatch("concat: " + ", ".join(str(list(t.shape)) for t in tensors)) from None
    ax = axis % y.ndim
    bounds = np.cumsum([t.shape[ax] for t in tensors])[:-1]

    def back(g):
        return tuple(np.split(g, bounds, axis=ax))
    return _finish("concat", y, tensors, back)


def concat_lastdim(tensors: Sequence) -> Tensor:
    return concat(tensors, axis=-1)


def stack(tensors: Sequence, axis=0) -> Tensor:
    tensors = tuple(as_tensor(t) for t in tensors)
    try:
        y = np.stack([t.values for t in tensors], axis=axis)
    except ValueError:
        raise ShapeMismatch("stack: " + ", ".join(str(list(t.shape)) for t in tensors)) from None
    ax = axis % y.ndim

    def back(g):
        return tuple(np.take(g, i, axis=ax) for i in range(len(tensors)))
    return _finish("stack", y, tensors, back)


def take(t, index: int, axis: int) -> Tensor:
    """Select one index along ``axis`` (the axis is dropped)."""
    t = as_tensor(t)
    ax = axis % t.ndim

    def back(g):
        full = np.zeros_like(t.values)
        sl = [slice(None)] * t.ndim
        sl[ax] = index
        full[tuple(sl)] = g
        return (full,)
    return _finish("take", np.take(t.values, index, axis=ax), (t,), back)


# ── attention helpers ───────────────────────────────────────────────────────

def softmax_lastdim(t, weights=None) -> Tensor:
    """Softmax over the last axis, optionally membership-weighted.

    With weights w the result is ``w*e^t / sum(w*e^t)``; slices whose weights
    are all zero come out as zeros.
    """
    t = as_tensor(t)
    if t.ndim == 0 or t.shape[-1] < 1:
        raise ShapeMismatch("softmax_lastdim needs a non-empty last axis")

    if weights is None:
        shift = t.values.max(axis=-1, keepdims=True)
        e = np.exp(t.values - shift)
        z = e.sum(axis=-1, keepdims=True)
        p = e / z

        def back(g):
            return (p * (g - (g * p).sum(axis=-1, keepdims=True)),)
        return _finish("softmax", p, (t,), back)

    w = as_tensor(weights)
    if np.broadcast_shapes(t.shape, w.shape) != t.shape:
        raise ShapeMismatch(f"softmax weights {list(w.shape)} do not fit logits {list(t.shape)}")
    wv = np.broadcast_to(w.values, t.shape)
    if np.any(wv < 0):
        raise DomainError("softmax weights must be non-negative")
    live = wv > 0
    masked = np.where(live, t.values, -np.inf)
    shift = masked.max(axis=-1, keepdims=True)
    shift = np.where(np.isfinite(shift), shift, 0.0)
    e = np.where(live, np.exp(np.minimum(t.values - shift, 0.0)), 0.0)
    num = wv * e
    z = num.sum(axis=-1, keepdims=True)
    empty = z <= 0
    safe = np.where(empty, 1.0, z)
    p = np.where(empty, 0.0, num / safe)
    # d/dw_j needs e^t_j / Z for zero-weight entries too; log space keeps it finite
    q = np.where(empty, 0.0, np.exp(np.minimum(t.values - shift - np.log(safe), 700.0)))

    def back(g):
        centred = g - (g * p).sum(axis=-1, keepdims=True)
        return p * centred, _unbroadcast(q * centred, w.shape)
    return _finish("softmax", p, (t, w), back)


def detach(t) -> Tensor:
    return constant(as_tensor(t).values)


def dropout(t, rate: float, rng: np.random.Generator) -> Tensor:
    """Inverted dropout; identity when ``rate`` is 0."""
    t = as_tensor(t)
    if rate <= 0:
        return t
    keep = (rng.random(t.shape) >= rate).astype(np.float64) / (1.0 - rate)
    return mul(t, constant(keep))


# ── dispatcher ──────────────────────────────────────────────────────────────

_UNARY = {
    "sigmoid": sigmoid, "tanh": tanh, "relu": relu, "exp": exp, "log": log,
    "neg": neg, "sum": sum, "mean": mean, "sqrt": sqrt, "abs": abs,
}
_BINARY = {"add": add, "mul": mul, "sub": sub, "div": div}


def apply_pointwise(t, fn: str, other=None) -> Tensor:
    """Apply a named elementwise function (binary names need ``other``)."""
    if fn in _UNARY:
        return _UNARY[fn](t)
    if fn in _BINARY:
        if other is None:
            raise ShapeMismatch(f"{fn} needs a second operand")
        return _BINARY[fn](t, other)
    if fn == "concat_lastdim":
        others = list(other) if isinstance(other, (list, tuple)) else [other]
        return concat_lastdim([t, *others])
    raise ValueError(f"unknown pointwise function {fn!r}")
