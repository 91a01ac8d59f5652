from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .params import ParamSet
from .tape import NumericError


@dataclass
class AdamState:
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step: int = 0
    m: dict[str, np.ndarray] = field(default_factory=dict)
    v: dict[str, np.ndarray] = field(default_factory=dict)


def adam_update(params: ParamSet, state: AdamState, lr: float, grads: dict[str, np.ndarray] | None = None):
    """One bias-corrected Adam step, in place on ``params`` and ``state``.

    Gradients default to each parameter's accumulated ``.grad``.
    """
    if lr <= 0:
        raise ValueError("learning rate must be positive")
    if grads is None:
        grads = {name: p.grad for name, p in params.items()}
    for name, g in grads.items():
        if not np.isfinite(g).all():
            raise NumericError(f"non-finite gradient for {name}")
    state.step += 1
    b1, b2 = state.beta1, state.beta2
    bc1 = 1.0 - b1 ** state.step
    bc2 = 1.0 - b2 ** state.step
    for name, p in params.items():
        g = grads[name]
        if g.shape != p.value.shape:
            raise ValueError(f"{name}: gradient shape {g.shape} != {p.value.shape}")
        m = state.m.get(name)
        if m is None:
            m = state.m[name] = np.zeros_like(p.value)
            state.v[name] = np.zeros_like(p.value)
        v = state.v[name]
        state.m[name] = m = b1 * m + (1.0 - b1) * g
        state.v[name] = v = b2 * v + (1.0 - b2) * (g * g)
        p.value = p.value - lr * (m / bc1) / (np.sqrt(v / bc2) + state.eps)


class Adam:
    def __init__(self, params: ParamSet, lr: float, beta1=0.9, beta2=0.999, eps=1e-8):
        self.params = params
        self.lr = lr
        self.state = AdamState(beta1, beta2, eps)

    def step(self):
        adam_update(self.params, self.state, self.lr)
