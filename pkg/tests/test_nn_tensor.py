import numpy as np
import pytest

from sedlearn import nn
from sedlearn.errors import NumericsError


def test_add_mul_broadcast_gradients():
    a = nn.Tensor(np.arange(6.0).reshape(2, 3), requires_grad=True)
    b = nn.Tensor(np.array([1.0, 2.0, 3.0]), requires_grad=True)
    out = nn.tsum(a * b + b)
    out.backward()
    assert np.allclose(a.grad, np.tile([1.0, 2.0, 3.0], (2, 1)))
    assert np.allclose(b.grad, a.values.sum(axis=0) + 2)


def test_matmul_matches_naive_product():
    rng = np.random.default_rng(0)
    w = rng.normal(size=(3, 4))
    x = rng.normal(size=(4, 5))
    out = nn.matmul(nn.Tensor(w), nn.Tensor(x))
    naive = np.zeros((3, 5))
    for i in range(3):
        for j in range(5):
            for k in range(4):
                naive[i, j] += w[i, k] * x[k, j]
    assert np.allclose(out.values, naive, atol=1e-12)


def test_matmul_batch_broadcast_gradient():
    rng = np.random.default_rng(1)
    w = nn.Tensor(rng.normal(size=(2, 3)), requires_grad=True)
    x = nn.Tensor(rng.normal(size=(4, 3, 5)), requires_grad=True)
    loss = nn.tmean(nn.matmul(w, x))
    loss.backward()
    assert w.grad.shape == (2, 3)
    assert x.grad.shape == (4, 3, 5)
    rep = nn.grad_check(lambda: nn.tmean(nn.matmul(w, x)), {"w": w, "x": x})
    assert rep.passed, rep.per_param


def test_nan_detection_raises():
    with pytest.raises(NumericsError):
        nn.Tensor(np.array([1.0, np.nan]))
    with pytest.raises(NumericsError):
        nn.log(nn.Tensor(np.array([0.0, 1.0])))


def test_magnitude_subgradient_zero_at_origin():
    re = nn.Tensor(np.array([[0.0, 3.0]]), requires_grad=True)
    im = nn.Tensor(np.array([[0.0, 4.0]]), requires_grad=True)
    s = nn.magnitude(re, im)
    assert np.allclose(s.values, [[0.0, 5.0]])
    nn.tsum(s).backward()
    assert re.grad[0, 0] == 0.0 and im.grad[0, 0] == 0.0
    assert np.isclose(re.grad[0, 1], 3.0 / 5.0)
    assert np.isclose(im.grad[0, 1], 4.0 / 5.0)


def test_pool_max_tie_breaks_to_lowest_index():
    x = nn.Tensor(np.array([[2.0, 2.0, 1.0, 3.0]]), requires_grad=True)
    out = nn.pool_max(x, 2, axis=1)
    assert np.allclose(out.values, [[2.0, 3.0]])
    nn.tsum(out).backward()
    assert np.allclose(x.grad, [[1.0, 0.0, 0.0, 1.0]])


def test_take_time_and_stack_last_roundtrip():
    x = nn.Tensor(np.arange(24.0).reshape(2, 3, 4), requires_grad=True)
    cols = [nn.take_time(x, t) for t in range(4)]
    out = nn.stack_last(cols)
    assert np.allclose(out.values, x.values)
    nn.tsum(out * 2.0).backward()
    assert np.allclose(x.grad, 2.0)


def test_no_grad_blocks_graph_recording():
    w = nn.Tensor(np.ones((2, 2)), requires_grad=True)
    with nn.no_grad():
        out = nn.matmul(w, nn.Tensor(np.ones((2, 2))))
    assert not out.requires_grad and out._parents == ()


def test_clip_gradient_masked_outside_range():
    x = nn.Tensor(np.array([-1.0, 0.5, 2.0]), requires_grad=True)
    nn.tsum(nn.clip(x, 0.0, 1.0)).backward()
    assert np.allclose(x.grad, [0.0, 1.0, 0.0])


@pytest.mark.parametrize(
    "build",
    [
        lambda x: nn.relu(x),
        lambda x: nn.sigmoid(x),
        lambda x: nn.tanh(x),
        lambda x: nn.log(nn.sigmoid(x)),
        lambda x: nn.magnitude(x, x * 0.5),
        lambda x: nn.clip(x, -0.4, 0.4),
        lambda x: nn.pool_max(x, 2, axis=0),
        lambda x: nn.reshape(x, (2, 3)),
        lambda x: x**2.0,
        lambda x: nn.tmean(x, axis=0, keepdims=True),
    ],
)
def test_primitive_ops_pass_gradcheck(build):
    # values kept away from the relu/clip kinks so central differences stay valid
    x = nn.Tensor([0.31, -0.22, 0.17, 0.62, -0.85, 0.09], requires_grad=True)
    rep = nn.grad_check(lambda: nn.tsum(build(x)), {"x": x})
    assert rep.passed, rep.max_rel_err
