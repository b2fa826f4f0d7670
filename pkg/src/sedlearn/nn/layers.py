"""Neural network layers built on the autodiff tensor.

Shape conventions follow the audio pipeline: feature maps are
``(batch, channels, freq, time)``, sequences are ``(batch, features,
time)``. Every layer also accepts the unbatched variant (one leading axis
fewer). Time is always the trailing axis.
"""

from __future__ import annotations

import numpy as np

from ..errors import ConfigError
from . import tensor as T
from .tensor import Tensor, as_tensor, from_op

ACTIVATIONS = ("relu", "sigmoid", "tanh", "linear")


def glorot_uniform(rng, shape, fan_in, fan_out):
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=shape)


def activate(x, kind):
    """Elementwise activation by name (relu subgradient at 0 is 0)."""
    if kind == "relu":
        return T.relu(x)
    if kind == "sigmoid":
        return T.sigmoid(x)
    if kind == "tanh":
        return T.tanh(x)
    if kind == "linear":
        return as_tensor(x)
    raise ConfigError(f"unknown activation '{kind}' (choose from {ACTIVATIONS})")


def dense_forward(x, w, bias=None):
    """w @ x (+ bias) for a single feature vector or a stack of frames.

    ``x`` may be 1-D ``(in,)`` or 2-D ``(in, t)``; ``w`` is ``(out, in)``.
    """
    x, w = as_tensor(x), as_tensor(w)
    squeeze = x.values.ndim == 1
    if squeeze:
        x = T.reshape(x, (x.values.shape[0], 1))
    if w.values.shape[-1] != x.values.shape[-2]:
        raise ValueError(
            f"dense: inner dims disagree, w {w.values.shape} vs x {x.values.shape}"
        )
    out = T.matmul(w, x)
    if bias is not None:
        bias = as_tensor(bias)
        out = out + T.reshape(bias, (bias.values.shape[0], 1))
    return T.reshape(out, (out.values.shape[0],)) if squeeze else out


def conv2d_forward(x, kernels):
    """2-D cross-correlation with 'same' zero padding.

    ``x``: ``(C_in, F, t)`` or ``(B, C_in, F, t)``; ``kernels``:
    ``(C_out, C_in, kF, kT)`` with odd kernel dims.
    """
    x, kernels = as_tensor(x), as_tensor(kernels)
    squeeze = x.values.ndim == 3
    xv = x.values[None] if squeeze else x.values
    kv = kernels.values
    if kv.ndim != 4:
        raise ValueError(f"conv2d: kernels must be 4-D, got {kv.shape}")
    c_out, c_in, kf, kt = kv.shape
    if kf % 2 == 0 or kt % 2 == 0:
        raise ValueError(f"conv2d: kernel dims must be odd, got {kf}x{kt}")
    if xv.ndim != 4 or xv.shape[1] != c_in:
        raise ValueError(
            f"conv2d: input {x.values.shape} does not match kernels {kv.shape}"
        )
    b, _, f, t = xv.shape
    pf, pt = kf // 2, kt // 2
    xpad = np.pad(xv, ((0, 0), (0, 0), (pf, pf), (pt, pt)))
    out = np.zeros((b, c_out, f, t))
    for df in range(kf):
        for dt in range(kt):
            out += np.einsum(
                "oc,bcft->boft",
                kv[:, :, df, dt],
                xpad[:, :, df : df + f, dt : dt + t],
                optimize=True,
            )

    def pull_x(g):
        gv = g[None] if squeeze else g
        gpad = np.zeros_like(xpad)
        for df in range(kf):
            for dt in range(kt):
                gpad[:, :, df : df + f, dt : dt + t] += np.einsum(
                    "oc,boft->bcft", kv[:, :, df, dt], gv, optimize=True
                )
        gx = gpad[:, :, pf : pf + f, pt : pt + t]
        return gx[0] if squeeze else gx

    def pull_k(g):
        gv = g[None] if squeeze else g
        gk = np.zeros_like(kv)
        for df in range(kf):
            for dt in range(kt):
                gk[:, :, df, dt] = np.einsum(
                    "boft,bcft->oc",
                    gv,
                    xpad[:, :, df : df + f, dt : dt + t],
                    optimize=True,
                )
        return gk

    result = out[0] if squeeze else out
    return from_op(result, [(x, pull_x), (kernels, pull_k)], "conv2d")


def freq_pool(x, pool):
    """Non-overlapping max over the frequency axis of ``(..., C, F, t)``."""
    x = as_tensor(x)
    if x.values.ndim not in (3, 4):
        raise ValueError(f"freq_pool: expected 3-D or 4-D input, got {x.values.shape}")
    return T.pool_max(x, pool, axis=-2)


def dropout(x, rate, training, rng):
    """Inverted dropout: scales survivors at train time; identity otherwise."""
    if not 0.0 <= rate < 1.0:
        raise ConfigError(f"dropout rate must be in [0, 1), got {rate}")
    x = as_tensor(x)
    if not training or rate == 0.0:
        return x
    mask = (rng.random(x.values.shape) >= rate) / (1.0 - rate)
    return x * mask


def bce_loss(p, y):
    """Mean binary cross-entropy; probabilities clipped to [1e-7, 1-1e-7]."""
    p, y = as_tensor(p), as_tensor(y)
    if p.values.shape != y.values.shape:
        raise ValueError(
            f"bce: shape mismatch {p.values.shape} vs {y.values.shape}"
        )
    pc = T.clip(p, 1e-7, 1.0 - 1e-7)
    losses = -(y * T.log(pc) + (1.0 - y) * T.log(1.0 - pc))
    return T.tmean(losses)


class Dense:
    """Feedforward layer applied identically to every frame."""

    def __init__(self, in_features, out_features, rng, bias=True):
        self.w = Tensor(
            glorot_uniform(rng, (out_features, in_features), in_features, out_features),
            requires_grad=True,
            name="dense.w",
        )
        self.b = (
            Tensor(np.zeros(out_features), requires_grad=True, name="dense.b")
            if bias
            else None
        )

    def forward(self, x):
        return dense_forward(x, self.w, self.b)

    def parameters(self):
        return [("w", self.w)] + ([("b", self.b)] if self.b is not None else [])


class Conv2d:
    def __init__(self, in_channels, out_channels, kernel_shape, rng):
        kf, kt = kernel_shape
        fan_in = in_channels * kf * kt
        fan_out = out_channels * kf * kt
        self.kernels = Tensor(
            glorot_uniform(rng, (out_channels, in_channels, kf, kt), fan_in, fan_out),
            requires_grad=True,
            name="conv.kernels",
        )

    def forward(self, x):
        return conv2d_forward(x, self.kernels)

    def parameters(self):
        return [("kernels", self.kernels)]


BATCHNORM_EPS = 1e-5
BATCHNORM_MOMENTUM = 0.1


def batchnorm_forward(x, gamma, beta, running_mean, running_var, training):
    """Per-channel batch normalization (channel axis -3).

    Training mode normalizes by the current batch statistics and updates
    ``running_mean``/``running_var`` in place (momentum 0.1, biased
    variance); inference normalizes by the running estimates.
    """
    x, gamma, beta = as_tensor(x), as_tensor(gamma), as_tensor(beta)
    if x.values.ndim not in (3, 4):
        raise ValueError(f"batchnorm: expected 3-D or 4-D input, got {x.values.shape}")
    caxis = x.values.ndim - 3
    channels = x.values.shape[caxis]
    if channels != gamma.values.shape[0]:
        raise ValueError(
            f"batchnorm: {channels} channels, expected {gamma.values.shape[0]}"
        )
    stat_axes = tuple(i for i in range(x.values.ndim) if i != caxis)
    cshape = tuple(channels if i == caxis else 1 for i in range(x.values.ndim))
    if training:
        count = x.values.size // channels
        if count <= 1:
            raise ValueError("batchnorm: single-element channel in training mode")
        mean = T.tmean(x, axis=stat_axes, keepdims=True)
        centered = x - mean
        var = T.tmean(centered * centered, axis=stat_axes, keepdims=True)
        xhat = centered * (var + BATCHNORM_EPS) ** -0.5
        m = BATCHNORM_MOMENTUM
        running_mean *= 1 - m
        running_mean += m * mean.values.reshape(channels)
        running_var *= 1 - m
        running_var += m * var.values.reshape(channels)
    else:
        xhat = (x - running_mean.reshape(cshape)) * (
            running_var.reshape(cshape) + BATCHNORM_EPS
        ) ** -0.5
    return xhat * T.reshape(gamma, cshape) + T.reshape(beta, cshape)


class BatchNorm:
    def __init__(self, channels):
        self.gamma = Tensor(np.ones(channels), requires_grad=True, name="bn.gamma")
        self.beta = Tensor(np.zeros(channels), requires_grad=True, name="bn.beta")
        self.running_mean = np.zeros(channels)
        self.running_var = np.ones(channels)

    def forward(self, x, training):
        return batchnorm_forward(
            x, self.gamma, self.beta, self.running_mean, self.running_var, training
        )

    def parameters(self):
        return [("gamma", self.gamma), ("beta", self.beta)]


class GRU:
    """Single gated-recurrent-unit layer unrolled over time.

    Recurrence (h0 = 0):
        z_t = sigmoid(x_t W_z + h_{t-1} U_z + b_z)
        r_t = sigmoid(x_t W_r + h_{t-1} U_r + b_r)
        hc_t = tanh(x_t W_h + (r_t * h_{t-1}) U_h + b_h)
        h_t = (1 - z_t) * h_{t-1} + z_t * hc_t
    """

    def __init__(self, input_size, hidden_size, rng):
        self.input_size = input_size
        self.hidden_size = hidden_size

        def w(name, rows, cols):
            return Tensor(
                glorot_uniform(rng, (rows, cols), rows, cols),
                requires_grad=True,
                name=f"gru.{name}",
            )

        def b(name):
            return Tensor(np.zeros(hidden_size), requires_grad=True, name=f"gru.{name}")

        self.w_z = w("w_z", input_size, hidden_size)
        self.u_z = w("u_z", hidden_size, hidden_size)
        self.b_z = b("b_z")
        self.w_r = w("w_r", input_size, hidden_size)
        self.u_r = w("u_r", hidden_size, hidden_size)
        self.b_r = b("b_r")
        self.w_h = w("w_h", input_size, hidden_size)
        self.u_h = w("u_h", hidden_size, hidden_size)
        self.b_h = b("b_h")

    def forward(self, x):
        """``x``: ``(B, in, t)`` -> hidden sequence ``(B, H, t)``."""
        x = as_tensor(x)
        if x.values.ndim != 3 or x.values.shape[1] != self.input_size:
            raise ValueError(
                f"gru: expected (B, {self.input_size}, T), got {x.values.shape}"
            )
        batch, _, steps = x.values.shape
        h = as_tensor(np.zeros((batch, self.hidden_size)))
        outputs = []
        for t in range(steps):
            xt = T.take_time(x, t)
            z = T.sigmoid(T.matmul(xt, self.w_z) + T.matmul(h, self.u_z) + self.b_z)
            r = T.sigmoid(T.matmul(xt, self.w_r) + T.matmul(h, self.u_r) + self.b_r)
            hc = T.tanh(
                T.matmul(xt, self.w_h) + T.matmul(r * h, self.u_h) + self.b_h
            )
            h = (1.0 - z) * h + z * hc
            outputs.append(h)
        return T.stack_last(outputs)

    def parameters(self):
        names = ("w_z", "u_z", "b_z", "w_r", "u_r", "b_r", "w_h", "u_h", "b_h")
        return [(n, getattr(self, n)) for n in names]


def gru_forward(x_seq, gru):
    """Run a GRU over an unbatched ``(T, in)`` sequence -> ``(T, hidden)``."""
    x_seq = as_tensor(x_seq)
    if x_seq.values.ndim != 2:
        raise ValueError(f"gru_forward: expected (T, in), got {x_seq.values.shape}")
    lifted = T.reshape(
        T.permute(x_seq, (1, 0)), (1, x_seq.values.shape[1], x_seq.values.shape[0])
    )
    out = gru.forward(lifted)  # (1, H, T)
    return T.permute(T.reshape(out, out.values.shape[1:]), (1, 0))
