"""Central finite-difference verification of analytic gradients."""
from __future__ import annotations

import numpy as np

from .core import Tensor4


def grad_check(fn, inputs, eps: float = 1e-5) -> float:
    """Max relative error between analytic and numeric gradients.

    fn maps the Tensor4 inputs to a scalar Tensor4 and must rebuild its
    graph on every call (closures over fixed weights are fine).  Error per
    coordinate is |analytic - central| / max(1, |central|); the max over
    all coordinates of all requires_grad inputs is returned.
    """
    if not (1e-7 <= eps <= 1e-4):
        raise ValueError(f"eps must lie in [1e-7, 1e-4], got {eps}")
    inputs = list(inputs)
    for t in inputs:
        t.grad = None
    loss = fn(*inputs)
    loss.backward()
    analytic = [
        (t.grad.copy() if t.grad is not None else np.zeros_like(t.data))
        for t in inputs if t.requires_grad
    ]
    worst = 0.0
    ai = 0
    for t in inputs:
        if not t.requires_grad:
            continue
        flat = t.data.ravel()
        aflat = analytic[ai].ravel()
        ai += 1
        for idx in range(flat.size):
            orig = flat[idx]
            flat[idx] = orig + eps
            fp = fn(*inputs).item()
            flat[idx] = orig - eps
            fm = fn(*inputs).item()
            flat[idx] = orig
            numeric = (fp - fm) / (2.0 * eps)
            err = abs(aflat[idx] - numeric) / max(1.0, abs(numeric))
            if err > worst:
                worst = err
    return worst
