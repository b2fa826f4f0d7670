"""Convolutional recurrent classifier over front-end feature sequences.

Architecture: per conv layer, conv -> batch norm -> ReLU -> frequency
max-pool -> dropout; the surviving frequency bins are stacked over the
channel axis and fed to a GRU stack (dropout between layers); a single
shared feedforward layer with sigmoid yields per-frame, per-class event
activity probabilities.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import nn
from .errors import ConfigError
from .nn import Tensor


@dataclass(frozen=True)
class CrnnConfig:
    """Hyperparameters of one classifier instance.

    ``n_filters`` doubles as the recurrent hidden size (the grid searches
    the same amount for both). One conv layer per pooling entry; the
    pooling product must divide the number of input features.
    """

    n_filters: int
    pool_arrangement: tuple
    n_recurrent_layers: int
    n_classes: int
    kernel_shape: tuple = (3, 3)
    dropout_rate: float = 0.25
    input_features: int = 40

    def __post_init__(self):
        object.__setattr__(self, "pool_arrangement", tuple(self.pool_arrangement))
        object.__setattr__(self, "kernel_shape", tuple(self.kernel_shape))
        if self.n_filters < 1:
            raise ConfigError("n_filters must be >= 1")
        if self.n_recurrent_layers < 1:
            raise ConfigError("need at least one recurrent layer")
        if self.n_classes < 1:
            raise ConfigError("need at least one class")
        if not self.pool_arrangement or any(p < 1 for p in self.pool_arrangement):
            raise ConfigError(f"bad pooling arrangement {self.pool_arrangement}")
        if not 0.0 <= self.dropout_rate < 1.0:
            raise ConfigError(f"dropout rate must be in [0, 1), got {self.dropout_rate}")
        product = int(np.prod(self.pool_arrangement))
        if self.input_features % product != 0:
            raise ConfigError(
                f"pooling {self.pool_arrangement} (product {product}) does not "
                f"divide {self.input_features} input features"
            )
        remaining = self.input_features
        for p in self.pool_arrangement:
            if remaining % p != 0:
                raise ConfigError(
                    f"pool size {p} does not divide the {remaining} bins left "
                    f"by earlier stages of {self.pool_arrangement}"
                )
            remaining //= p

    @property
    def conv_output_bins(self):
        return self.input_features // int(np.prod(self.pool_arrangement))

    @property
    def gru_input_size(self):
        return self.n_filters * self.conv_output_bins


@dataclass
class CrnnModel:
    config: CrnnConfig
    conv_layers: list
    batchnorms: list
    gru_layers: list
    output: nn.Dense
    rng: np.random.Generator = field(repr=False, default=None)

    def parameters(self):
        """All trainable tensors with stable checkpoint names."""
        out = []
        for i, (conv, bn) in enumerate(zip(self.conv_layers, self.batchnorms)):
            out.append((f"conv{i}.kernels", conv.kernels))
            out.append((f"bn{i}.gamma", bn.gamma))
            out.append((f"bn{i}.beta", bn.beta))
        for i, gru in enumerate(self.gru_layers):
            for name, p in gru.parameters():
                out.append((f"gru{i}.{name}", p))
        out.append(("output.w", self.output.w))
        out.append(("output.b", self.output.b))
        return out

    def state_tensors(self):
        """Parameters plus batch-norm running statistics (for checkpoints)."""
        out = {name: p.values for name, p in self.parameters()}
        for i, bn in enumerate(self.batchnorms):
            out[f"bn{i}.running_mean"] = bn.running_mean
            out[f"bn{i}.running_var"] = bn.running_var
        return out

    def load_state(self, tensors):
        for name, p in self.parameters():
            p.values[...] = tensors[name]
        for i, bn in enumerate(self.batchnorms):
            bn.running_mean[...] = tensors[f"bn{i}.running_mean"]
            bn.running_var[...] = tensors[f"bn{i}.running_var"]

    def forward(self, feats, training=False):
        """Feature sequence (M, T) or (B, M, T) -> probabilities (.., C, T)."""
        feats = nn.as_tensor(feats)
        squeeze = feats.values.ndim == 2
        if squeeze:
            feats = nn.reshape(feats, (1,) + feats.values.shape)
        b, m, t = feats.values.shape
        if m != self.config.input_features:
            raise ValueError(
                f"expected {self.config.input_features} features, got {m}"
            )
        x = nn.reshape(feats, (b, 1, m, t))
        for conv, bn, pool in zip(
            self.conv_layers, self.batchnorms, self.config.pool_arrangement
        ):
            x = nn.relu(bn.forward(conv.forward(x), training))
            x = nn.freq_pool(x, pool)
            x = nn.dropout(x, self.config.dropout_rate, training, self.rng)
        # stack remaining frequency bins over the channel axis
        _, channels, bins, _ = x.values.shape
        x = nn.reshape(x, (b, channels * bins, t))
        for i, gru in enumerate(self.gru_layers):
            if i > 0:
                x = nn.dropout(x, self.config.dropout_rate, training, self.rng)
            x = gru.forward(x)
        probs = nn.sigmoid(self.output.forward(x))
        return nn.reshape(probs, probs.values.shape[1:]) if squeeze else probs


def build(config, seed):
    """Construct a CRNN with Glorot-uniform weights from a seed."""
    rng = np.random.default_rng(np.random.SeedSequence(seed))
    conv_layers = []
    batchnorms = []
    in_channels = 1
    for _ in config.pool_arrangement:
        conv_layers.append(
            nn.Conv2d(in_channels, config.n_filters, config.kernel_shape, rng)
        )
        batchnorms.append(nn.BatchNorm(config.n_filters))
        in_channels = config.n_filters
    gru_layers = []
    in_size = config.gru_input_size
    for _ in range(config.n_recurrent_layers):
        gru_layers.append(nn.GRU(in_size, config.n_filters, rng))
        in_size = config.n_filters
    output = nn.Dense(config.n_filters, config.n_classes, rng)
    return CrnnModel(
        config=config,
        conv_layers=conv_layers,
        batchnorms=batchnorms,
        gru_layers=gru_layers,
        output=output,
        rng=rng,
    )


def predict_binary(probs):
    """Threshold probabilities strictly above 0.5 into a binary roll."""
    values = probs.values if isinstance(probs, Tensor) else np.asarray(probs)
    return (values > 0.5).astype(np.uint8)
