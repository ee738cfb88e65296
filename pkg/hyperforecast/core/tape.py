"""Operation tape and the reverse pass over it.

A tape records every op whose inputs include a trainable leaf or a tensor
already on that tape. ``backward`` walks the nodes once, in reverse, and
consumes the tape; a second call raises ``DetachedTensor``.
"""

from __future__ import annotations

import itertools
import threading
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from ..errors import DetachedTensor, NotScalar
from .tensor import Tensor

_tape_ids = itertools.count(1)
_local = threading.local()


@dataclass
class Node:
    op: str
    inputs: tuple
    output: Tensor
    backward: Callable[[np.ndarray], tuple]

    @property
    def input_ids(self):
        return tuple(t.uid for t in self.inputs)

    @property
    def output_id(self):
        return self.output.uid


@dataclass
class Tape:
    id: int = field(default_factory=lambda: next(_tape_ids))
    nodes: list = field(default_factory=list)
    consumed: bool = False

    def __enter__(self):
        _stack().append(self)
        return self

    def __exit__(self, *exc_info):
        stack = _stack()
        if stack and stack[-1] is self:
            stack.pop()
        return False

    def tracks(self, t: Tensor) -> bool:
        return t.requires_grad or t.tape_id == self.id

    def __len__(self):
        return len(self.nodes)


def _stack():
    stack = getattr(_local, "stack", None)
    if stack is None:
        stack = _local.stack = []
    return stack


def active_tape() -> Tape | None:
    stack = _stack()
    return stack[-1] if stack else None


def record(op: str, out: Tensor, inputs: tuple, backward_fn) -> Tensor:
    """Append a node to the active tape if any input is tracked by it."""
    tape = active_tape()
    if tape is None or tape.consumed:
        return out
    if not any(tape.tracks(t) for t in inputs):
        return out
    out.tape_id = tape.id
    tape.nodes.append(Node(op, inputs, out, backward_fn))
    return out


def backward(loss: Tensor, tape: Tape) -> None:
    """Populate ``grad`` on every trainable leaf reachable from ``loss``."""
    if loss.values.size != 1:
        raise NotScalar(f"loss must be a single element, shape is {list(loss.shape)}")
    if tape.consumed or loss.tape_id != tape.id:
        raise DetachedTensor("loss was not produced on this tape (or the tape was already consumed)")

    grads = {loss.uid: np.ones_like(loss.values)}
    for node in reversed(tape.nodes):
        g = grads.pop(node.output_id, None)
        if g is None:
            continue
        in_grads = node.backward(g)
        for inp, ig in zip(node.inputs, in_grads):
            if ig is None or not tape.tracks(inp):
                continue
            if inp.requires_grad:
                inp.grad = ig.copy() if inp.grad is None else inp.grad + ig
            else:
                prev = grads.get(inp.uid)
                grads[inp.uid] = ig if prev is None else prev + ig

    tape.consumed = True
    tape.nodes.clear()
