"""Tensor core: autograd tensors, ops, optimizer, gradient checking."""
from .backend import kernel_backend
from .core import Tensor4
from .gradcheck import grad_check
from .ops import (
    BnStats,
    ConvWeights,
    add,
    batch_norm,
    concat_channels,
    conv_depthwise,
    conv_pointwise,
    l1_loss,
    relu,
    split_channels,
    upsample_bicubic,
)
from .optim import OptimizerState, adam_step, zero_grads

__all__ = [
    "BnStats",
    "ConvWeights",
    "OptimizerState",
    "Tensor4",
    "add",
    "adam_step",
    "batch_norm",
    "concat_channels",
    "conv_depthwise",
    "conv_pointwise",
    "grad_check",
    "kernel_backend",
    "l1_loss",
    "relu",
    "split_channels",
    "upsample_bicubic",
    "zero_grads",
]
