"""Adaptive-moment optimizer over named parameter dicts."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import NonFiniteValueError


@dataclass
class OptimizerState:
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step: int = 0
    m: dict = field(default_factory=dict)
    v: dict = field(default_factory=dict)


def adam_step(params: dict, state: OptimizerState) -> None:
    """One bias-corrected update of every parameter, in name order."""
    state.step += 1
    t = state.step
    c1 = 1.0 - state.beta1 ** t
    c2 = 1.0 - state.beta2 ** t
    for name in params:
        p = params[name]
        g = p.grad if p.grad is not None else np.zeros_like(p.data)
        if name not in state.m:
            state.m[name] = np.zeros_like(p.data)
            state.v[name] = np.zeros_like(p.data)
        m = state.m[name]
        v = state.v[name]
        m *= state.beta1
        m += (1.0 - state.beta1) * g
        v *= state.beta2
        v += (1.0 - state.beta2) * g * g
        with np.errstate(invalid="ignore", over="ignore"):
            new = p.data - state.lr * (m / c1) / (np.sqrt(v / c2) + state.eps)
        if not np.isfinite(new).all():
            raise NonFiniteValueError(f"optimizer produced non-finite values in {name}")
        p.data = new


def zero_grads(params: dict) -> None:
    for p in params.values():
        p.grad = None
