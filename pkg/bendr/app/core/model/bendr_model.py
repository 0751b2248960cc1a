"""
The pretrainable BENDR model: convolutional encoder followed by the transformer contextualizer.
"""

from typing import Optional, Sequence, Tuple

import numpy as np

from bendr.app.config import ModelConfig
from bendr.app.core.model.contextualizer import ContextSequence, Contextualizer
from bendr.app.core.model.encoder import Encoder
from bendr.app.core.tensor import Module, Tensor


class BendrModel(Module):
    """
    Encoder and contextualizer sharing one configuration.

    Attributes:
        encoder (Encoder): Stage one.
        contextualizer (Contextualizer): Stage two.
        config (ModelConfig): Architecture.
    """

    def __init__(self, config: ModelConfig, seed: int = 0):
        rng = np.random.default_rng(seed)
        self.config = config
        self.encoder = Encoder(config, rng)
        self.contextualizer = Contextualizer(config, rng)

    def forward(self, x, masked: Optional[Sequence[int]] = None,
                rng: Optional[np.random.Generator] = None) -> Tuple[Tensor, ContextSequence]:
        b = self.encoder(x)
        return b, self.contextualizer(b, masked=masked, rng=rng)
