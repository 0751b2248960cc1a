"""
Stage-one convolutional encoder.

Six blocks of (1D convolution, GroupNorm, GELU) with receptive field equal to stride
turn a 20-channel sequence into a sequence of BENDR vectors, 96 times shorter.
"""

from typing import List, Optional

import numpy as np

from bendr.app.config import ModelConfig
from bendr.app.core.exceptions import SequenceTooShortError, ShapeError
from bendr.app.core.tensor import Module, Parameter, Tensor, as_tensor, conv1d, conv_output_length, gelu, group_norm, uniform_fan_in


class EncoderBlock(Module):
    """ Conv1d (kernel = stride) -> GroupNorm -> GELU. """

    def __init__(self, in_channels: int, out_channels: int, width: int, stride: int, groups: int,
                 rng: np.random.Generator):
        fan_in = in_channels * width
        self.weight = uniform_fan_in((out_channels, in_channels, width), fan_in, rng)
        self.bias = uniform_fan_in((out_channels,), fan_in, rng)
        self.gamma = Parameter(np.ones(out_channels))
        self.beta = Parameter(np.zeros(out_channels))
        self.stride = stride
        self.groups = groups

    def forward(self, x: Tensor) -> Tensor:
        y = conv1d(x, self.weight, self.bias, stride=self.stride)
        return gelu(group_norm(y, self.groups, self.gamma, self.beta))


class Encoder(Module):
    """
    The convolutional encoder.

    Attributes:
        blocks (List[EncoderBlock]): Blocks in application order.
        in_channels (int): Expected input channels.
        downsampling (int): Product of the block strides.
    """

    def __init__(self, config: ModelConfig, rng: Optional[np.random.Generator] = None):
        rng = rng if rng is not None else np.random.default_rng(0)
        self.blocks: List[EncoderBlock] = []
        channels = config.in_channels
        for width, stride in zip(config.encoder_widths, config.encoder_strides):
            self.blocks.append(EncoderBlock(channels, config.encoder_dim, width, stride, config.groupnorm_groups, rng))
            channels = config.encoder_dim
        self.in_channels = config.in_channels
        self.downsampling = config.downsampling
        self.widths = tuple(config.encoder_widths)
        self.strides = tuple(config.encoder_strides)

    def output_length(self, length: int) -> int:
        """ Number of BENDR vectors produced from `length` samples. """
        for width, stride in zip(self.widths, self.strides):
            length = conv_output_length(length, width, stride)
        return length

    def forward(self, x) -> Tensor:
        x = as_tensor(x)
        if x.ndim != 2 or x.shape[0] != self.in_channels:
            raise ShapeError(f"Encoder expects {self.in_channels} x L input, got shape {x.shape}")
        if x.shape[1] < self.downsampling or self.output_length(x.shape[1]) < 1:
            raise SequenceTooShortError(f"Sequence of {x.shape[1]} samples is shorter than the encoder's "
                                        f"downsampling factor {self.downsampling}")
        for block in self.blocks:
            x = block(x)
        return x


def encode(encoder: Encoder, x) -> Tensor:
    """
    Encode a 20 x L sequence into BENDR vectors.

    Args:
        encoder (Encoder): The encoder.
        x: Standardized sequence, `in_channels x L`.

    Returns:
        Tensor: `encoder_dim x T` with `T` from the per-block length recurrence.

    Raises:
        SequenceTooShortError: If `L` is below the downsampling factor.
    """
    return encoder(x)


def bendr_activation_penalty(b: Tensor) -> Tensor:
    """ Mean squared activation of a BENDR sequence. """
    b = as_tensor(b)
    return (b * b).mean()
