"""
Tensor core: a float64 reverse-mode autodiff tensor and the kernels the models are built from.
"""

from bendr.app.core.tensor.tensor import Tensor, as_tensor, concat
from bendr.app.core.tensor.functional import (
    conv1d, conv_output_length, cosine_similarity, cross_entropy, dropout, gelu, group_norm,
    linear, log_softmax, logsumexp, pad, softmax,
)
from bendr.app.core.tensor.nn import Module, Parameter, uniform_fan_in, xavier_uniform
from bendr.app.core.tensor.optim import AdamState, adam_step, lr_schedule
from bendr.app.core.tensor.gradcheck import gradcheck, numerical_gradient, relative_error

__all__ = [
    "Tensor", "as_tensor", "concat",
    "conv1d", "conv_output_length", "cosine_similarity", "cross_entropy", "dropout", "gelu", "group_norm",
    "linear", "log_softmax", "logsumexp", "pad", "softmax",
    "Module", "Parameter", "uniform_fan_in", "xavier_uniform",
    "AdamState", "adam_step", "lr_schedule",
    "gradcheck", "numerical_gradient", "relative_error",
]
