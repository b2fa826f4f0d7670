"""Reverse-mode automatic differentiation over numpy arrays.

A ``Tensor`` wraps a float64 ndarray plus an optional gradient. Every
operation checks its result for NaN/Inf and records the closures needed to
push gradients back to its parents; ``Tensor.backward`` replays them in
reverse topological order. The op set is the minimum needed by the
front-end and the CRNN: elementwise arithmetic with broadcasting, matmul,
reductions, the usual activations, magnitude, clipping, max-pooling with
argmax routing, and shape plumbing (reshape / permute / time slicing).

Inference paths should run under ``no_grad()`` so no graph is recorded.
"""

from __future__ import annotations

import contextlib

import numpy as np

from ..errors import NumericsError

_grad_enabled = True


@contextlib.contextmanager
def no_grad():
    """Disable graph recording inside the block (inference, metrics)."""
    global _grad_enabled
    prev = _grad_enabled
    _grad_enabled = False
    try:
        yield
    finally:
        _grad_enabled = prev


def _require_finite(arr, op):
    if not np.all(np.isfinite(arr)):
        raise NumericsError(f"non-finite values produced by '{op}'")


def _unbroadcast(g, shape):
    """Sum ``g`` down to ``shape`` (inverse of numpy broadcasting)."""
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for axis, n in enumerate(shape):
        if n == 1 and g.shape[axis] != 1:
            g = g.sum(axis=axis, keepdims=True)
    return g


class Tensor:
    """float64 array with an accumulated adjoint.

    Parameters with ``requires_grad=True`` receive gradients on
    ``backward``; everything derived from them joins the graph
    automatically. ``grad`` is lazily allocated.
    """

    __slots__ = ("values", "grad", "requires_grad", "_parents", "name")

    def __init__(self, values, requires_grad=False, name=""):
        arr = np.asarray(values, dtype=np.float64)
        _require_finite(arr, name or "tensor")
        self.values = arr
        self.grad = None
        self.requires_grad = bool(requires_grad)
        self._parents = ()
        self.name = name

    @property
    def shape(self):
        return self.values.shape

    @property
    def ndim(self):
        return self.values.ndim

    def __repr__(self):
        flag = ", requires_grad=True" if self.requires_grad else ""
        return f"Tensor(shape={self.values.shape}{flag}, name={self.name!r})"

    def zero_grad(self):
        self.grad = None

    def item(self):
        return float(self.values)

    def backward(self, seed=None):
        """Accumulate gradients of ``self`` w.r.t. every graph parameter.

        ``seed`` is the upstream adjoint; it defaults to ones and is
        mandatory in spirit for non-scalar outputs (a scalar loss needs
        none).
        """
        if seed is None:
            seed = np.ones_like(self.values)
        else:
            seed = np.asarray(seed, dtype=np.float64)
            if seed.shape != self.values.shape:
                raise ValueError(
                    f"seed shape {seed.shape} != output shape {self.values.shape}"
                )

        topo = []
        visited = set()
        stack = [(self, False)]
        while stack:
            node, expanded = stack.pop()
            if expanded:
                topo.append(node)
                continue
            if id(node) in visited:
                continue
            visited.add(id(node))
            stack.append((node, True))
            for parent, _ in node._parents:
                if id(parent) not in visited:
                    stack.append((parent, False))

        adjoint = {id(self): seed}
        for node in reversed(topo):
            g = adjoint.pop(id(node), None)
            if g is None:
                continue
            if node.requires_grad and not node._parents:
                node.grad = g if node.grad is None else node.grad + g
            for parent, pull in node._parents:
                contrib = pull(g)
                key = id(parent)
                if key in adjoint:
                    adjoint[key] = adjoint[key] + contrib
                else:
                    adjoint[key] = contrib

    # -- operator sugar ----------------------------------------------------

    def __add__(self, other):
        return add(self, other)

    def __radd__(self, other):
        return add(as_tensor(other), self)

    def __sub__(self, other):
        return sub(self, other)

    def __rsub__(self, other):
        return sub(as_tensor(other), self)

    def __mul__(self, other):
        return mul(self, other)

    def __rmul__(self, other):
        return mul(as_tensor(other), self)

    def __neg__(self):
        return mul(self, -1.0)

    def __matmul__(self, other):
        return matmul(self, other)

    def __pow__(self, exponent):
        return pow_const(self, exponent)


def as_tensor(x):
    return x if isinstance(x, Tensor) else Tensor(x)


def from_op(values, parents, name):
    """Build an op result; records parents only while grad is enabled."""
    _require_finite(values, name)
    out = Tensor.__new__(Tensor)
    out.values = values
    out.grad = None
    out.name = name
    if _grad_enabled:
        tracked = tuple((p, pull) for p, pull in parents if p.requires_grad)
        out._parents = tracked
        out.requires_grad = bool(tracked)
    else:
        out._parents = ()
        out.requires_grad = False
    return out


# -- arithmetic -------------------------------------------------------------


def add(a, b):
    a, b = as_tensor(a), as_tensor(b)
    return from_op(
        a.values + b.values,
        [
            (a, lambda g: _unbroadcast(g, a.values.shape)),
            (b, lambda g: _unbroadcast(g, b.values.shape)),
        ],
        "add",
    )


def sub(a, b):
    a, b = as_tensor(a), as_tensor(b)
    return from_op(
        a.values - b.values,
        [
            (a, lambda g: _unbroadcast(g, a.values.shape)),
            (b, lambda g: _unbroadcast(-g, b.values.shape)),
        ],
        "sub",
    )


def mul(a, b):
    a, b = as_tensor(a), as_tensor(b)
    return from_op(
        a.values * b.values,
        [
            (a, lambda g: _unbroadcast(g * b.values, a.values.shape)),
            (b, lambda g: _unbroadcast(g * a.values, b.values.shape)),
        ],
        "mul",
    )


def matmul(a, b):
    """np.matmul with broadcasting; gradients sum over broadcast axes.

    Both operands must be at least 2-D (promote vectors before calling).
    """
    a, b = as_tensor(a), as_tensor(b)
    if a.values.ndim < 2 or b.values.ndim < 2:
        raise ValueError("matmul operands must be at least 2-D")
    out = np.matmul(a.values, b.values)

    def pull_a(g):
        ga = np.matmul(g, np.swapaxes(b.values, -1, -2))
        return _unbroadcast(ga, a.values.shape)

    def pull_b(g):
        gb = np.matmul(np.swapaxes(a.values, -1, -2), g)
        return _unbroadcast(gb, b.values.shape)

    return from_op(out, [(a, pull_a), (b, pull_b)], "matmul")


def pow_const(a, exponent):
    a = as_tensor(a)
    p = float(exponent)
    out = a.values**p
    return from_op(
        out, [(a, lambda g: g * p * a.values ** (p - 1.0))], f"pow:{p}"
    )


# -- elementwise nonlinearities ---------------------------------------------


def relu(a):
    a = as_tensor(a)
    mask = a.values > 0
    return from_op(np.where(mask, a.values, 0.0), [(a, lambda g: g * mask)], "relu")


def sigmoid(a):
    a = as_tensor(a)
    # piecewise form avoids overflow for large |x|
    v = a.values
    out = np.where(v >= 0, 1.0 / (1.0 + np.exp(-np.abs(v))), np.exp(-np.abs(v)) / (1.0 + np.exp(-np.abs(v))))
    return from_op(out, [(a, lambda g: g * out * (1.0 - out))], "sigmoid")


def tanh(a):
    a = as_tensor(a)
    out = np.tanh(a.values)
    return from_op(out, [(a, lambda g: g * (1.0 - out * out))], "tanh")


def log(a):
    a = as_tensor(a)
    if np.any(a.values <= 0):
        raise NumericsError("log: nonpositive argument")
    return from_op(np.log(a.values), [(a, lambda g: g / a.values)], "log")


def magnitude(re, im):
    """sqrt(re**2 + im**2) with the subgradient at 0 fixed to 0."""
    re, im = as_tensor(re), as_tensor(im)
    if re.values.shape != im.values.shape:
        raise ValueError(
            f"magnitude: shape mismatch {re.values.shape} vs {im.values.shape}"
        )
    out = np.hypot(re.values, im.values)
    safe = np.where(out > 0, out, 1.0)

    def pull_re(g):
        return g * np.where(out > 0, re.values / safe, 0.0)

    def pull_im(g):
        return g * np.where(out > 0, im.values / safe, 0.0)

    return from_op(out, [(re, pull_re), (im, pull_im)], "magnitude")


def clip(a, lo, hi):
    """Clamp values; gradient passes only where unclipped."""
    a = as_tensor(a)
    mask = (a.values >= lo) & (a.values <= hi)
    return from_op(
        np.clip(a.values, lo, hi), [(a, lambda g: g * mask)], "clip"
    )


# -- reductions ---------------------------------------------------------------


def tsum(a, axis=None, keepdims=False):
    a = as_tensor(a)
    out = a.values.sum(axis=axis, keepdims=keepdims)

    def pull(g):
        if axis is None:
            return np.broadcast_to(g, a.values.shape).copy()
        gg = g if keepdims else np.expand_dims(g, axis)
        return np.broadcast_to(gg, a.values.shape).copy()

    return from_op(np.asarray(out, dtype=np.float64), [(a, pull)], "sum")


def tmean(a, axis=None, keepdims=False):
    a = as_tensor(a)
    if axis is None:
        count = a.values.size
    else:
        axes = axis if isinstance(axis, tuple) else (axis,)
        count = int(np.prod([a.values.shape[ax] for ax in axes]))
    return mul(tsum(a, axis=axis, keepdims=keepdims), 1.0 / count)


# -- structure ops -----------------------------------------------------------


def reshape(a, shape):
    a = as_tensor(a)
    return from_op(
        a.values.reshape(shape),
        [(a, lambda g: g.reshape(a.values.shape))],
        "reshape",
    )


def permute(a, axes):
    a = as_tensor(a)
    inverse = np.argsort(axes)
    return from_op(
        np.transpose(a.values, axes),
        [(a, lambda g: np.transpose(g, inverse))],
        "permute",
    )


def take_time(a, t):
    """Slice index ``t`` from the last axis; gradient scatters back."""
    a = as_tensor(a)

    def pull(g):
        full = np.zeros_like(a.values)
        full[..., t] = g
        return full

    return from_op(np.ascontiguousarray(a.values[..., t]), [(a, pull)], "take_time")


def stack_last(tensors):
    """Stack equally shaped tensors along a new trailing axis."""
    tensors = [as_tensor(t) for t in tensors]
    out = np.stack([t.values for t in tensors], axis=-1)
    parents = [
        (t, (lambda i: lambda g: g[..., i])(i)) for i, t in enumerate(tensors)
    ]
    return from_op(out, parents, "stack_last")


def pool_max(a, pool, axis):
    """Non-overlapping max over groups of ``pool`` along ``axis``.

    The group argmax routes the gradient; numpy argmax already breaks
    ties toward the lowest index.
    """
    a = as_tensor(a)
    axis = axis % a.values.ndim
    size = a.values.shape[axis]
    if pool < 1 or size % pool != 0:
        raise ValueError(f"pool_max: {pool} does not divide axis size {size}")
    grouped_shape = (
        a.values.shape[:axis] + (size // pool, pool) + a.values.shape[axis + 1 :]
    )
    grouped = a.values.reshape(grouped_shape)
    idx = np.argmax(grouped, axis=axis + 1)
    out = np.take_along_axis(grouped, np.expand_dims(idx, axis + 1), axis + 1)
    out = np.squeeze(out, axis=axis + 1)

    def pull(g):
        full = np.zeros(grouped_shape)
        np.put_along_axis(
            full, np.expand_dims(idx, axis + 1), np.expand_dims(g, axis + 1), axis + 1
        )
        return full.reshape(a.values.shape)

    return from_op(out, [(a, pull)], "pool_max")
