"""
Stage-two transformer contextualizer.

Forward order:
    1. masked BENDR positions are replaced by the learned mask vector,
    2. an additive grouped-convolution position encoding (conv -> GELU, same length) is added,
    3. an affine input projection lifts vectors to the model dimension,
    4. a constant start token is prepended,
    5. the transformer layers (self-attention and feed-forward, no normalization) are applied,
    6. an output projection maps every position back to the BENDR dimension.

Weights follow T-Fixup: Xavier initialization, then value, attention-output and
feed-forward matrices scaled by 0.67 * N^(-1/4) for N layers.
"""

from dataclasses import dataclass
from typing import List, Optional, Sequence

import numpy as np

from bendr.app.config import ModelConfig
from bendr.app.core.exceptions import ShapeError
from bendr.app.core.tensor import (
    Module, Parameter, Tensor, as_tensor, concat, conv1d, dropout, gelu, linear, pad, softmax, uniform_fan_in,
    xavier_uniform,
)


def t_fixup_scale(depth: int) -> float:
    """ T-Fixup scale factor for a transformer of `depth` layers. """
    if depth < 1:
        raise ValueError(f"depth must be positive, got {depth}")
    return 0.67 * depth ** -0.25


def layer_keep_mask(layers: int, p: float, rng: np.random.Generator, training: bool) -> np.ndarray:
    """ LayerDrop decision: True for every layer applied in this pass. """
    if not training or p == 0.0:
        return np.ones(layers, dtype=bool)
    return rng.random(layers) >= p


class TransformerLayer(Module):
    """ Multi-head self-attention and a GELU feed-forward, each in a residual branch. """

    def __init__(self, dim: int, heads: int, ff_dim: int, dropout_p: float, rng: np.random.Generator):
        self.heads = heads
        self.dropout = dropout_p
        self.q_weight = xavier_uniform((dim, dim), rng)
        self.q_bias = Parameter(np.zeros(dim))
        self.k_weight = xavier_uniform((dim, dim), rng)
        self.k_bias = Parameter(np.zeros(dim))
        self.v_weight = xavier_uniform((dim, dim), rng)
        self.v_bias = Parameter(np.zeros(dim))
        self.out_weight = xavier_uniform((dim, dim), rng)
        self.out_bias = Parameter(np.zeros(dim))
        self.ff1_weight = xavier_uniform((ff_dim, dim), rng)
        self.ff1_bias = Parameter(np.zeros(ff_dim))
        self.ff2_weight = xavier_uniform((dim, ff_dim), rng)
        self.ff2_bias = Parameter(np.zeros(dim))

    def scaled_weights(self) -> List[Parameter]:
        """ Matrices rescaled by T-Fixup. """
        return [self.v_weight, self.out_weight, self.ff1_weight, self.ff2_weight]

    def attention(self, x: Tensor, rng: np.random.Generator) -> Tensor:
        length, dim = x.shape
        head_dim = dim // self.heads

        def split(t: Tensor) -> Tensor:
            return t.reshape(length, self.heads, head_dim).transpose(1, 0, 2)

        q = split(linear(x, self.q_weight, self.q_bias))
        k = split(linear(x, self.k_weight, self.k_bias))
        v = split(linear(x, self.v_weight, self.v_bias))
        weights = softmax((q @ k.transpose(0, 2, 1)) * (1.0 / np.sqrt(head_dim)), axis=-1)
        weights = dropout(weights, self.dropout, rng, self.training)
        context = (weights @ v).transpose(1, 0, 2).reshape(length, dim)
        return linear(context, self.out_weight, self.out_bias)

    def forward(self, x: Tensor, rng: np.random.Generator) -> Tensor:
        x = x + dropout(self.attention(x, rng), self.dropout, rng, self.training)
        hidden = gelu(linear(x, self.ff1_weight, self.ff1_bias))
        return x + dropout(linear(hidden, self.ff2_weight, self.ff2_bias), self.dropout, rng, self.training)


@dataclass
class ContextSequence:
    """
    Contextualizer outputs.

    Attributes:
        hidden (Tensor): (T + 1) x model_dim transformer outputs; row 0 is the start token.
        projected (Tensor): (T + 1) x encoder_dim outputs compared with BENDR vectors.
    """

    hidden: Tensor
    projected: Tensor

    def __len__(self) -> int:
        return self.hidden.shape[0]

    @property
    def positions(self) -> Tensor:
        """ Projected outputs aligned with BENDR positions 0..T-1 (start token removed). """
        return self.projected[1:]


class Contextualizer(Module):
    """
    The transformer stage.

    Attributes:
        mask_vector (Parameter): Learned replacement for masked BENDR vectors.
        position_weight (Parameter): Grouped position-conv weights.
        position_bias (Parameter): Position-conv bias.
        input_weight (Parameter): BENDR -> model projection.
        input_bias (Parameter): Projection bias.
        layers (List[TransformerLayer]): Transformer layers.
        output_weight (Parameter): Model -> BENDR projection.
        output_bias (Parameter): Output projection bias.
    """

    def __init__(self, config: ModelConfig, rng: Optional[np.random.Generator] = None):
        rng = rng if rng is not None else np.random.default_rng(0)
        dim, model_dim = config.encoder_dim, config.model_dim
        per_group = dim // config.position_groups
        self.mask_vector = uniform_fan_in((dim,), dim, rng)
        self.position_weight = uniform_fan_in((dim, per_group, config.position_kernel), per_group * config.position_kernel, rng)
        self.position_bias = Parameter(np.zeros(dim))
        self.input_weight = xavier_uniform((model_dim, dim), rng)
        self.input_bias = Parameter(np.zeros(model_dim))
        self.layers: List[TransformerLayer] = [
            TransformerLayer(model_dim, config.heads, config.ff_dim, config.dropout, rng) for _ in range(config.layers)
        ]
        self.output_weight = xavier_uniform((dim, model_dim), rng)
        self.output_bias = Parameter(np.zeros(dim))
        self.position_groups = config.position_groups
        self.position_kernel = config.position_kernel
        self.start_token = config.start_token
        self.layer_drop = config.layer_drop
        self.model_dim = model_dim
        t_fixup_init(self)

    def position_encode(self, b: Tensor) -> Tensor:
        """ Same-length grouped convolution followed by GELU. """
        half = self.position_kernel // 2
        return gelu(conv1d(pad(b, half, half), self.position_weight, self.position_bias, groups=self.position_groups))

    def apply_mask(self, b: Tensor, masked: Optional[Sequence[int]]) -> Tensor:
        if masked is None or len(masked) == 0:
            return b
        length = b.shape[1]
        masked = np.asarray(masked, dtype=np.int64)
        if masked.min() < 0 or masked.max() >= length:
            raise ShapeError(f"Masked positions must lie in [0, {length}), got range [{masked.min()}, {masked.max()}]")
        indicator = np.zeros((1, length))
        indicator[0, masked] = 1.0
        return b * (1.0 - indicator) + self.mask_vector.reshape(-1, 1) * indicator

    def forward(self, b: Tensor, masked: Optional[Sequence[int]] = None,
                rng: Optional[np.random.Generator] = None) -> ContextSequence:
        b = as_tensor(b)
        if b.ndim != 2 or b.shape[1] < 1:
            raise ShapeError(f"Contextualizer expects a non-empty encoder_dim x T input, got shape {b.shape}")
        if self.training and rng is None:
            raise ValueError("A random generator is required in training mode")
        x = self.apply_mask(b, masked)
        x = x + self.position_encode(x)
        tokens = linear(x.T, self.input_weight, self.input_bias)
        start = Tensor(np.full((1, self.model_dim), self.start_token))
        h = concat([start, tokens], axis=0)
        keep = layer_keep_mask(len(self.layers), self.layer_drop, rng, self.training)
        for layer, kept in zip(self.layers, keep):
            if kept:
                h = layer(h, rng)
        return ContextSequence(hidden=h, projected=linear(h, self.output_weight, self.output_bias))


def t_fixup_init(contextualizer: Contextualizer) -> Contextualizer:
    """ Rescale the value, attention-output and feed-forward matrices of every layer in place. """
    scale = t_fixup_scale(len(contextualizer.layers))
    for layer in contextualizer.layers:
        for weight in layer.scaled_weights():
            weight.data = weight.data * scale
    return contextualizer


def contextualize(contextualizer: Contextualizer, b: Tensor, masked: Optional[Sequence[int]] = None,
                  train_mode: bool = False, rng: Optional[np.random.Generator] = None) -> ContextSequence:
    """
    Run the contextualizer in the requested mode.

    Args:
        contextualizer (Contextualizer): The transformer stage.
        b (Tensor): BENDR sequence, `encoder_dim x T`.
        masked (Optional[Sequence[int]]): Positions replaced by the mask vector.
        train_mode (bool): Enables Dropout and LayerDrop.
        rng (Optional[np.random.Generator]): Random stream for train mode.

    Returns:
        ContextSequence: T + 1 outputs.
    """
    contextualizer.train(train_mode)
    return contextualizer(b, masked=masked, rng=rng)
