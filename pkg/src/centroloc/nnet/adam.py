"""Adam updates, kept functional: (tensors, grads, state) -> new (tensors, state).

Moments are bias-corrected and epsilon sits outside the square root, so a
fresh state's first step with constant gradient g moves each parameter by
-lr * g / (|g| + eps).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import ShapeError


@dataclass
class AdamState:
    """Per-parameter first/second moments plus the shared step counter and
    hyperparameters. m and v mirror the learnable tensors exactly."""

    m: dict[str, np.ndarray]
    v: dict[str, np.ndarray]
    t: int = 0
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8


def adam_init(tensors: dict[str, np.ndarray], lr=1e-3, beta1=0.9, beta2=0.999,
              epsilon=1e-8) -> AdamState:
    m = {k: np.zeros_like(v) for k, v in tensors.items()}
    v = {k: np.zeros_like(vv) for k, vv in tensors.items()}
    return AdamState(m, v, 0, lr, beta1, beta2, epsilon)


def adam_step(tensors: dict[str, np.ndarray], grads: dict[str, np.ndarray],
              state: AdamState) -> tuple[dict[str, np.ndarray], AdamState]:
    """One update. ``tensors`` may hold extra (non-optimized) entries; every
    key in the state must have a gradient. Inputs are left untouched."""
    if set(grads) != set(state.m):
        missing = sorted(set(state.m) ^ set(grads))
        raise ShapeError(f"gradient keys do not match optimizer state: {missing}")
    t = state.t + 1
    bc1 = 1.0 - state.beta1**t
    bc2 = 1.0 - state.beta2**t
    out = dict(tensors)
    new_m: dict[str, np.ndarray] = {}
    new_v: dict[str, np.ndarray] = {}
    for name, m_old in state.m.items():
        g = grads[name]
        p = tensors[name]
        if g.shape != p.shape:
            raise ShapeError(
                f"gradient shape {g.shape} != parameter shape {p.shape} for {name!r}"
            )
        m = state.beta1 * m_old + (1.0 - state.beta1) * g
        v = state.beta2 * state.v[name] + (1.0 - state.beta2) * (g * g)
        out[name] = p - state.lr * (m / bc1) / (np.sqrt(v / bc2) + state.epsilon)
        new_m[name] = m
        new_v[name] = v
    return out, AdamState(new_m, new_v, t, state.lr, state.beta1, state.beta2, state.epsilon)
