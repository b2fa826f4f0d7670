import numpy as np
import pytest

from sedlearn import nn


def test_first_step_is_signed_lr():
    p = nn.Tensor(np.array([1.0, -1.0, 0.5]), requires_grad=True)
    state = nn.adam_init([p], lr=1e-3)
    g = np.array([0.3, -4.0, 1e-2])
    nn.adam_step([p], [g], state)
    # bias-corrected first step: -lr * g / (|g| + eps') ~= -lr * sign(g)
    assert np.allclose(p.values, np.array([1.0, -1.0, 0.5]) - 1e-3 * np.sign(g), atol=1e-5)
    assert state.step_count == 1


def test_zero_gradient_is_noop_on_values():
    p = nn.Tensor(np.array([2.0]), requires_grad=True)
    state = nn.adam_init([p])
    for _ in range(5):
        nn.adam_step([p], [np.zeros(1)], state)
    assert p.values[0] == 2.0
    assert state.step_count == 5


def test_quadratic_descent_converges():
    w = nn.Tensor(np.array([0.0]), requires_grad=True)
    opt = nn.Adam([w], lr=0.1)
    for _ in range(200):
        opt.zero_grad()
        loss = (w - 3.0) ** 2.0
        nn.tsum(loss).backward()
        opt.step()
    assert abs(w.values[0] - 3.0) < 0.05


def test_shape_mismatch_rejected():
    p = nn.Tensor(np.zeros(3), requires_grad=True)
    state = nn.adam_init([p])
    with pytest.raises(ValueError):
        nn.adam_step([p], [np.zeros(2)], state)


def test_none_gradient_treated_as_zero():
    p = nn.Tensor(np.array([1.5]), requires_grad=True)
    state = nn.adam_init([p])
    nn.adam_step([p], [None], state)
    assert p.values[0] == 1.5
