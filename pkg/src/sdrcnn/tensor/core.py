"""Batched 4-D tensors with reverse-mode autodiff.

Every op in ops.py produces a new Tensor4 holding a closure that routes the
upstream gradient to the op's inputs.  backward() on a scalar tail
topologically sorts the recorded graph and runs the closures in reverse.
Values are float64 and checked finite after every op.
"""
from __future__ import annotations

import numpy as np

from ..errors import NonFiniteValueError, ShapeMismatchError


class Tensor4:
    __slots__ = ("data", "grad", "requires_grad", "_parents", "_grad_fn", "_backward_done")

    def __init__(self, data, requires_grad: bool = False):
        arr = np.asarray(data, dtype=np.float64)
        if arr.ndim != 4:
            raise ShapeMismatchError(
                f"Tensor4 holds (n, c, h, w) arrays, got shape {arr.shape}"
            )
        if not np.isfinite(arr).all():
            raise NonFiniteValueError("tensor holds non-finite values")
        self.data = np.ascontiguousarray(arr)
        self.grad = None
        self.requires_grad = bool(requires_grad)
        self._parents = ()
        self._grad_fn = None
        self._backward_done = False

    # shape accessors
    @property
    def shape(self):
        return self.data.shape

    @property
    def n(self):
        return self.data.shape[0]

    @property
    def c(self):
        return self.data.shape[1]

    @property
    def h(self):
        return self.data.shape[2]

    @property
    def w(self):
        return self.data.shape[3]

    def item(self) -> float:
        if self.data.size != 1:
            raise ValueError(f"item() needs a single-element tensor, got shape {self.shape}")
        return float(self.data.reshape(()))

    def detach(self) -> "Tensor4":
        return Tensor4(self.data.copy())

    def accumulate_grad(self, g: np.ndarray) -> None:
        if self.grad is None:
            self.grad = np.zeros_like(self.data)
        self.grad += g

    def backward(self) -> None:
        """Populate .grad for every requires_grad tensor reachable from here."""
        if self.data.size != 1:
            raise ValueError("backward() starts from a scalar loss tensor")
        if self._backward_done:
            raise RuntimeError(
                "backward() was already run from this tensor; run a new forward pass first"
            )
        self._backward_done = True
        order = _toposort(self)
        self.accumulate_grad(np.ones_like(self.data))
        for node in reversed(order):
            if node._grad_fn is not None and node.grad is not None:
                node._grad_fn(node.grad)

    def __repr__(self):
        return f"Tensor4(shape={self.shape}, requires_grad={self.requires_grad})"


def _toposort(tail: Tensor4):
    order = []
    seen = set()
    stack = [(tail, False)]
    while stack:
        node, emitted = stack.pop()
        if emitted:
            order.append(node)
            continue
        if id(node) in seen:
            continue
        seen.add(id(node))
        stack.append((node, True))
        for parent in node._parents:
            if id(parent) not in seen:
                stack.append((parent, False))
    return order


def from_op(data: np.ndarray, parents, grad_fn) -> Tensor4:
    """Wrap an op result, keeping the tape only when a parent needs gradients."""
    out = Tensor4(data)
    if any(p.requires_grad for p in parents):
        out.requires_grad = True
        out._parents = tuple(parents)
        out._grad_fn = grad_fn
    return out
