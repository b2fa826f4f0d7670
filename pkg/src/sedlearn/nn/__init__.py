"""Minimal reverse-mode differentiable numeric core."""

from .gradcheck import GradCheckReport, grad_check
from .layers import (
    ACTIVATIONS,
    BatchNorm,
    Conv2d,
    Dense,
    GRU,
    activate,
    batchnorm_forward,
    bce_loss,
    conv2d_forward,
    dense_forward,
    dropout,
    freq_pool,
    glorot_uniform,
    gru_forward,
)
from .optim import Adam, AdamState, adam_init, adam_step
from .tensor import (
    Tensor,
    as_tensor,
    clip,
    log,
    magnitude,
    matmul,
    no_grad,
    permute,
    pool_max,
    relu,
    reshape,
    sigmoid,
    stack_last,
    take_time,
    tanh,
    tmean,
    tsum,
)

__all__ = [
    "ACTIVATIONS",
    "Adam",
    "AdamState",
    "BatchNorm",
    "Conv2d",
    "Dense",
    "GRU",
    "GradCheckReport",
    "Tensor",
    "activate",
    "adam_init",
    "adam_step",
    "as_tensor",
    "batchnorm_forward",
    "bce_loss",
    "clip",
    "conv2d_forward",
    "dense_forward",
    "dropout",
    "freq_pool",
    "glorot_uniform",
    "grad_check",
    "gru_forward",
    "log",
    "magnitude",
    "matmul",
    "no_grad",
    "permute",
    "pool_max",
    "relu",
    "reshape",
    "sigmoid",
    "stack_last",
    "take_time",
    "tanh",
    "tmean",
    "tsum",
]
