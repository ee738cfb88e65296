"""Dense float64 tensor with a gradient slot and a tape reference."""

from __future__ import annotations

import itertools
import logging
from typing import Iterable, Sequence

import numpy as np

from ..errors import NonFiniteValue, ShapeMismatch

log = logging.getLogger("hf.core")

_DEBUG_CHECKS = False
_ids = itertools.count(1)


def set_debug_checks(enabled: bool) -> None:
    """Turn per-op non-finite detection on or off for the whole process."""
    global _DEBUG_CHECKS
    _DEBUG_CHECKS = bool(enabled)


def debug_checks_enabled() -> bool:
    return _DEBUG_CHECKS


class Tensor:
    """Row-major float64 array plus autodiff bookkeeping.

    ``requires_grad`` marks a trainable leaf. Tensors produced by ops carry the
    id of the tape that recorded them in ``tape_id`` (``None`` for constants).
    """

    __slots__ = ("values", "grad", "tape_id", "requires_grad", "name", "uid", "__weakref__")

    def __init__(self, values, *, requires_grad: bool = False, name: str | None = None,
                 _check: bool = True):
        arr = np.asarray(values, dtype=np.float64)
        if _check and not np.all(np.isfinite(arr)):
            label = f"tensor {name!r}" if name else "tensor"
            raise NonFiniteValue(f"{label} contains NaN or Inf")
        self.values = arr
        self.grad: np.ndarray | None = None
        self.tape_id: int | None = None
        self.requires_grad = requires_grad
        self.name = name
        self.uid = next(_ids)

    # ── introspection ───────────────────────────────────────────────────

    @property
    def shape(self) -> tuple:
        return self.values.shape

    @property
    def ndim(self) -> int:
        return self.values.ndim

    @property
    def size(self) -> int:
        return self.values.size

    def numpy(self) -> np.ndarray:
        return self.values.copy()

    def item(self) -> float:
        if self.values.size != 1:
            raise ShapeMismatch(f"item() needs a single element, shape is {self.shape}")
        return float(self.values.reshape(()))

    def zero_grad(self) -> None:
        self.grad = None

    def __repr__(self):
        tag = f" name={self.name!r}" if self.name else ""
        return f"Tensor(shape={list(self.shape)}{tag}, grad={'set' if self.grad is not None else 'none'})"

    # ── operator sugar (implemented in ops) ─────────────────────────────

    def __add__(self, other):
        from . import ops
        return ops.add(self, other)

    def __radd__(self, other):
        from . import ops
        return ops.add(other, self)

    def __sub__(self, other):
        from . import ops
        return ops.sub(self, other)

    def __rsub__(self, other):
        from . import ops
        return ops.sub(other, self)

    def __mul__(self, other):
        from . import ops
        return ops.mul(self, other)

    def __rmul__(self, other):
        from . import ops
        return ops.mul(other, self)

    def __truediv__(self, other):
        from . import ops
        return ops.div(self, other)

    def __rtruediv__(self, other):
        from . import ops
        return ops.div(other, self)

    def __neg__(self):
        from . import ops
        return ops.neg(self)

    def __matmul__(self, other):
        from . import ops
        return ops.matmul(self, other)

    def sum(self, axis=None, keepdims=False):
        from . import ops
        return ops.sum(self, axis=axis, keepdims=keepdims)

    def mean(self, axis=None, keepdims=False):
        from . import ops
        return ops.mean(self, axis=axis, keepdims=keepdims)

    def reshape(self, *shape):
        from . import ops
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        return ops.reshape(self, shape)

    def transpose(self, *axes):
        from . import ops
        if len(axes) == 1 and isinstance(axes[0], (tuple, list)):
            axes = tuple(axes[0])
        return ops.transpose(self, axes or None)


def build_tensor(shape: Sequence[int], values: Iterable[float], *, requires_grad: bool = False,
                 name: str | None = None) -> Tensor:
    """Build a tensor from an extent list and a flat row-major value list."""
    shape = tuple(int(s) for s in shape)
    flat = np.asarray(list(values), dtype=np.float64)
    expected = int(np.prod(shape)) if shape else 1
    if flat.size != expected:
        raise ShapeMismatch(f"shape {list(shape)} needs {expected} values, got {flat.size}")
    if not np.all(np.isfinite(flat)):
        raise NonFiniteValue("values contain NaN or Inf")
    return Tensor(flat.reshape(shape), requires_grad=requires_grad, name=name, _check=False)


def constant(values) -> Tensor:
    """Untracked tensor (no gradient ever flows into it)."""
    if isinstance(values, Tensor):
        return Tensor(values.values, _check=False)
    return Tensor(values, _check=False)


def parameter(values, name: str | None = None) -> Tensor:
    """Trainable leaf."""
    return Tensor(values, requires_grad=True, name=name)


def as_tensor(value) -> Tensor:
    if isinstance(value, Tensor):
        return value
    return Tensor(value, _check=False)
