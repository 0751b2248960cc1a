"""
Models: the convolutional encoder, the transformer contextualizer and checkpoint persistence.
"""

from bendr.app.core.model.encoder import Encoder, EncoderBlock, bendr_activation_penalty, encode
from bendr.app.core.model.contextualizer import (
    ContextSequence, Contextualizer, TransformerLayer, contextualize, layer_keep_mask, t_fixup_init, t_fixup_scale,
)
from bendr.app.core.model.bendr_model import BendrModel
from bendr.app.core.model.checkpoint import FORMAT_VERSION, Checkpoint, load_checkpoint, save_checkpoint

__all__ = [
    "Encoder", "EncoderBlock", "bendr_activation_penalty", "encode",
    "ContextSequence", "Contextualizer", "TransformerLayer", "contextualize", "layer_keep_mask", "t_fixup_init",
    "t_fixup_scale",
    "BendrModel",
    "FORMAT_VERSION", "Checkpoint", "load_checkpoint", "save_checkpoint",
]
