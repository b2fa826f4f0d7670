"""Trainable time-frequency feature extraction block.

Two parallel bias-free linear layers are initialized with cosine/sine
rows so their outputs match the real and imaginary parts of the DFT of
each windowed frame. Their magnitudes then flow through one of three
heads:

  DFT_MAXPOOL  magnitude spectrogram max-pooled down to M features
  MEL          ReLU(W_mel @ magnitudes), triangular-filter initialized
  LOGMEL       MEL followed by log(. + epsilon)

A regime decides which weights train: W_re/W_im may only be learned in
DFT_MAXPOOL mode (they stay fixed under a mel head), W_mel only when a
mel head exists. Gradients are computed for all three matrices
regardless; the flags gate which ones the optimizer updates.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

from . import nn
from .audio_io import FrameMatrix
from .errors import ConfigError
from .nn import Tensor

DEFAULT_EPSILON = 1e-3
MEL_SCALE = 2595.0
MEL_BREAK_HZ = 700.0


class FrontendMode(enum.Enum):
    DFT_MAXPOOL = "dft"
    MEL = "mel"
    LOGMEL = "logmel"

    @classmethod
    def parse(cls, text):
        for mode in cls:
            if text in (mode.value, mode.name, mode.name.lower()):
                return mode
        raise ConfigError(f"unknown frontend mode '{text}'")


def hz_to_mel(f):
    return MEL_SCALE * np.log10(1.0 + np.asarray(f, dtype=np.float64) / MEL_BREAK_HZ)


def mel_to_hz(m):
    return MEL_BREAK_HZ * (10.0 ** (np.asarray(m, dtype=np.float64) / MEL_SCALE) - 1.0)


def init_dft_weights(n):
    """Cosine/sine weight rows for the first N/2 DFT bins.

    Row k of the pair is a sinusoid at center frequency k*F_s/N; with the
    sign convention F = Z_re - i*Z_im the pair reproduces the DFT.
    """
    if n < 2 or n % 2 != 0:
        raise ConfigError(f"frame length must be even and >= 2, got {n}")
    k = np.arange(n // 2)[:, None]
    t = np.arange(n)[None, :]
    angles = 2.0 * np.pi * k * t / n
    return np.cos(angles), np.sin(angles)


def init_mel_weights(m, n, sample_rate):
    """Triangular mel filterbank over the N/2 linear bins, peak 1.

    Break frequencies are M+2 points uniformly spaced on the mel scale
    between 0 and Nyquist; each filter rises and falls linearly in Hz and
    is peak-normalized (no area normalization).
    """
    if m < 1:
        raise ConfigError(f"mel band count must be >= 1, got {m}")
    if n < 2 or n % 2 != 0:
        raise ConfigError(f"frame length must be even and >= 2, got {n}")
    n_bins = n // 2
    breaks_hz = mel_to_hz(np.linspace(0.0, hz_to_mel(sample_rate / 2.0), m + 2))
    bin_hz = np.arange(n_bins) * sample_rate / n
    bin_of_break = np.round(breaks_hz / (sample_rate / n)).astype(int)
    if len(np.unique(bin_of_break)) < m + 2:
        raise ConfigError(
            f"{m + 2} mel break points collapse onto fewer distinct bins; "
            f"N={n} is too small for M={m}"
        )
    weights = np.zeros((m, n_bins))
    for i in range(m):
        lo, center, hi = breaks_hz[i], breaks_hz[i + 1], breaks_hz[i + 2]
        rising = (bin_hz - lo) / (center - lo)
        falling = (hi - bin_hz) / (hi - center)
        weights[i] = np.maximum(0.0, np.minimum(rising, falling))
        peak = weights[i].max()
        if peak <= 0:
            raise ConfigError(
                f"mel filter {i} has no support on the bin grid; "
                f"N={n} is too small for M={m}"
            )
        weights[i] /= peak
    return weights


@dataclass
class FrontendParams:
    """Front-end weight matrices with their trainability regime."""

    w_re: Tensor
    w_im: Tensor
    w_mel: Tensor | None
    learn_re_im: bool
    learn_mel: bool
    mode: FrontendMode
    n: int
    m: int
    sample_rate: int
    epsilon: float = DEFAULT_EPSILON

    def __post_init__(self):
        if self.epsilon <= 0:
            raise ConfigError(f"epsilon must be positive, got {self.epsilon}")
        if self.learn_mel and self.mode == FrontendMode.DFT_MAXPOOL:
            raise ConfigError("learn_mel requires a mel head (MEL or LOGMEL mode)")
        if self.learn_re_im and self.mode != FrontendMode.DFT_MAXPOOL:
            raise ConfigError(
                "W_re and W_im are kept fixed when the mel layer is used; "
                "learn_re_im requires DFT_MAXPOOL mode"
            )
        uses_mel = self.mode in (FrontendMode.MEL, FrontendMode.LOGMEL)
        if uses_mel and self.w_mel is None:
            raise ConfigError(f"mode {self.mode.name} requires w_mel")
        if not uses_mel and self.w_mel is not None:
            raise ConfigError("w_mel is not utilized in DFT_MAXPOOL mode")
        half = self.n // 2
        if self.w_re.values.shape != (half, self.n):
            raise ConfigError(
                f"w_re shape {self.w_re.values.shape} != ({half}, {self.n})"
            )
        if self.w_im.values.shape != (half, self.n):
            raise ConfigError(
                f"w_im shape {self.w_im.values.shape} != ({half}, {self.n})"
            )
        if self.w_mel is not None and self.w_mel.values.shape != (self.m, half):
            raise ConfigError(
                f"w_mel shape {self.w_mel.values.shape} != ({self.m}, {half})"
            )
        if self.mode == FrontendMode.DFT_MAXPOOL and half % self.m != 0:
            raise ConfigError(
                f"max-pooling needs M ({self.m}) to divide N/2 ({half})"
            )

    def parameters(self):
        """All weight tensors, named; gradients flow to every one."""
        out = [("w_re", self.w_re), ("w_im", self.w_im)]
        if self.w_mel is not None:
            out.append(("w_mel", self.w_mel))
        return out

    def learnable(self):
        out = []
        if self.learn_re_im:
            out += [("w_re", self.w_re), ("w_im", self.w_im)]
        if self.learn_mel and self.w_mel is not None:
            out.append(("w_mel", self.w_mel))
        return out


def make_frontend(
    mode,
    n,
    m,
    sample_rate,
    learn_re_im=False,
    learn_mel=False,
    epsilon=DEFAULT_EPSILON,
):
    """Construct initialized FrontendParams for one experiment regime."""
    if isinstance(mode, str):
        mode = FrontendMode.parse(mode)
    w_re, w_im = init_dft_weights(n)
    uses_mel = mode in (FrontendMode.MEL, FrontendMode.LOGMEL)
    w_mel = (
        Tensor(init_mel_weights(m, n, sample_rate), requires_grad=True, name="w_mel")
        if uses_mel
        else None
    )
    return FrontendParams(
        w_re=Tensor(w_re, requires_grad=True, name="w_re"),
        w_im=Tensor(w_im, requires_grad=True, name="w_im"),
        w_mel=w_mel,
        learn_re_im=learn_re_im,
        learn_mel=learn_mel,
        mode=mode,
        n=n,
        m=m,
        sample_rate=sample_rate,
        epsilon=epsilon,
    )


SUPPORTED_REGIMES = (
    ("dft", False, False),
    ("dft", True, False),
    ("mel", False, False),
    ("mel", False, True),
    ("logmel", False, False),
    ("logmel", False, True),
)


def magnitude(z_re, z_im):
    """Elementwise sqrt(re^2 + im^2); subgradient 0 where the result is 0."""
    return nn.magnitude(z_re, z_im)


def freq_maxpool(s, m):
    """Drop N/2 magnitude bins to M by non-overlapping max over bands."""
    s = nn.as_tensor(s)
    bins = s.values.shape[-2]
    if bins % m != 0:
        raise ConfigError(f"max-pooling needs M ({m}) to divide N/2 ({bins})")
    return nn.pool_max(s, bins // m, axis=-2)


def mel_layer(s, w_mel):
    """ReLU(W_mel @ S) applied frame-wise."""
    s, w_mel = nn.as_tensor(s), nn.as_tensor(w_mel)
    if w_mel.values.shape[-1] != s.values.shape[-2]:
        raise ValueError(
            f"mel layer: W_mel {w_mel.values.shape} does not match S {s.values.shape}"
        )
    return nn.relu(nn.matmul(w_mel, s))


def log_compress(z_mel, epsilon=DEFAULT_EPSILON):
    """Natural log of (z + epsilon)."""
    if epsilon <= 0:
        raise ConfigError(f"epsilon must be positive, got {epsilon}")
    z_mel = nn.as_tensor(z_mel)
    if np.any(z_mel.values + epsilon <= 0):
        raise ValueError("log compression requires z >= -epsilon")
    return nn.log(z_mel + epsilon)


@dataclass
class FrontendResult:
    """Forward output plus the graph handles needed for the backward pass."""

    features: Tensor
    x: Tensor
    params: FrontendParams
    spectrogram: Tensor = field(repr=False, default=None)


def frontend_forward(x, params):
    """Run the feature extraction block over framed audio.

    ``x`` is a FrameMatrix, an ndarray shaped (N, T) or (B, N, T), or a
    Tensor of either shape. Returns a FrontendResult whose ``features``
    value is M x T (or B x M x T).
    """
    if isinstance(x, FrameMatrix):
        x = x.data
    x = nn.as_tensor(x)
    if x.values.shape[-2] != params.n:
        raise ValueError(
            f"frame length {x.values.shape[-2]} does not match frontend N={params.n}"
        )
    z_re = nn.matmul(params.w_re, x)
    z_im = nn.matmul(params.w_im, x)
    s = magnitude(z_re, z_im)
    if params.mode == FrontendMode.DFT_MAXPOOL:
        feats = freq_maxpool(s, params.m)
    else:
        feats = mel_layer(s, params.w_mel)
        if params.mode == FrontendMode.LOGMEL:
            feats = log_compress(feats, params.epsilon)
    return FrontendResult(features=feats, x=x, params=params, spectrogram=s)


def frontend_backward(grad_out, result):
    """Reverse-mode gradients of the cached forward pass.

    Returns a dict with entries for every weight matrix (learnable or
    not) and, when the input tensor participates in the graph, ``x``.
    """
    if result is None or result.features is None:
        raise ValueError("frontend_backward called before frontend_forward")
    for _, p in result.params.parameters():
        p.zero_grad()
    result.x.zero_grad()
    result.features.backward(np.asarray(grad_out, dtype=np.float64))
    grads = {
        name: (np.zeros_like(p.values) if p.grad is None else p.grad)
        for name, p in result.params.parameters()
    }
    if result.x.requires_grad:
        grads["x"] = (
            np.zeros_like(result.x.values) if result.x.grad is None else result.x.grad
        )
    return grads
