"""Adam optimizer with bias correction."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass
class AdamState:
    """Moment estimates for one parameter list, plus hyperparameters."""

    m: list = field(default_factory=list)
    v: list = field(default_factory=list)
    step_count: int = 0
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8


def adam_init(params, lr=1e-3, beta1=0.9, beta2=0.999, eps=1e-8):
    return AdamState(
        m=[np.zeros_like(p.values) for p in params],
        v=[np.zeros_like(p.values) for p in params],
        lr=lr,
        beta1=beta1,
        beta2=beta2,
        eps=eps,
    )


def adam_step(params, grads, state):
    """One Adam update, in place on ``params[i].values``.

    ``grads[i]`` may be None (parameter skipped this step but moments kept
    aligned by treating it as a zero gradient).
    """
    if len(params) != len(state.m):
        raise ValueError("adam: state was initialized for a different parameter list")
    state.step_count += 1
    t = state.step_count
    bc1 = 1.0 - state.beta1**t
    bc2 = 1.0 - state.beta2**t
    for i, p in enumerate(params):
        g = grads[i]
        if g is None:
            g = np.zeros_like(p.values)
        if g.shape != p.values.shape:
            raise ValueError(
                f"adam: gradient shape {g.shape} != parameter shape {p.values.shape}"
            )
        state.m[i] = state.beta1 * state.m[i] + (1 - state.beta1) * g
        state.v[i] = state.beta2 * state.v[i] + (1 - state.beta2) * g * g
        m_hat = state.m[i] / bc1
        v_hat = state.v[i] / bc2
        p.values -= state.lr * m_hat / (np.sqrt(v_hat) + state.eps)
    return state


class Adam:
    """Convenience wrapper reading gradients straight off the tensors."""

    def __init__(self, params, lr=1e-3, beta1=0.9, beta2=0.999, eps=1e-8):
        self.params = list(params)
        self.state = adam_init(self.params, lr, beta1, beta2, eps)

    def step(self):
        grads = [p.grad for p in self.params]
        adam_step(self.params, grads, self.state)

    def zero_grad(self):
        for p in self.params:
            p.zero_grad()
