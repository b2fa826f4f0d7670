"""Central-difference gradient verification.

The fragment under test is a zero-argument callable that rebuilds its
computation graph from scratch and returns a scalar loss tensor. It must
be deterministic: dropout off, batch norm either in inference mode or fed
a fixed batch.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import NumericsError


@dataclass
class GradCheckReport:
    max_rel_err: float
    per_param: dict
    h: float
    tol: float

    @property
    def passed(self):
        return self.max_rel_err < self.tol


def _rel_err(a, n):
    denom = max(abs(a), abs(n))
    if denom < 1e-8:
        return 0.0
    return abs(a - n) / denom


def grad_check(loss_fn, params, h=1e-5, tol=1e-4):
    """Compare analytic gradients of ``loss_fn`` against central differences.

    ``params`` maps names to the leaf tensors perturbed by the check.
    Raises ``NumericsError`` if two identical forward passes disagree.
    """
    if not isinstance(params, dict):
        params = {p.name or f"param{i}": p for i, p in enumerate(params)}

    first = float(loss_fn().values)
    second = float(loss_fn().values)
    if first != second:
        raise NumericsError(
            "non-deterministic fragment: two identical forward passes disagree"
        )

    for p in params.values():
        p.zero_grad()
    loss = loss_fn()
    loss.backward()
    analytic = {
        name: (np.zeros_like(p.values) if p.grad is None else p.grad.copy())
        for name, p in params.items()
    }

    per_param = {}
    for name, p in params.items():
        worst = 0.0
        flat = p.values.reshape(-1)
        aflat = analytic[name].reshape(-1)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + h
            f_plus = float(loss_fn().values)
            flat[i] = orig - h
            f_minus = float(loss_fn().values)
            flat[i] = orig
            numeric = (f_plus - f_minus) / (2.0 * h)
            worst = max(worst, _rel_err(aflat[i], numeric))
        per_param[name] = worst

    overall = max(per_param.values()) if per_param else 0.0
    return GradCheckReport(max_rel_err=overall, per_param=per_param, h=h, tol=tol)
