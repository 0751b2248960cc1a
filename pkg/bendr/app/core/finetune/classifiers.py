"""
Downstream classifiers and the six transfer variants.

    variant  model        initialization  trainable
    1        transformer  pretrained      everything but the mask vector
    2        linear       pretrained      encoder and head
    3        transformer  random          everything but the mask vector
    4        transformer  pretrained      contextualizer and head (encoder frozen)
    5        linear       random          encoder and head
    6        linear       pretrained      head only

The transformer classifier reads the start-token output; the linear classifier average
pools the BENDR sequence into four segments. Both carry the learned mask vector, frozen,
for the time-masking regularization. Dropout and LayerDrop are never active here.
"""

from typing import Dict, Optional

import numpy as np

from bendr.app.config import ModelConfig
from bendr.app.core.exceptions import CheckpointError, SequenceTooShortError
from bendr.app.core.model import BendrModel, Checkpoint, Contextualizer, Encoder
from bendr.app.core.pretrain.masking import spans_to_positions
from bendr.app.core.tensor import Module, Parameter, Tensor, as_tensor, concat, linear, xavier_uniform


POOL_SEGMENTS = 4
TRANSFORMER_VARIANTS = (1, 3, 4)
LINEAR_VARIANTS = (2, 5, 6)
PRETRAINED_VARIANTS = (1, 2, 4, 6)


def segment_bounds(length: int, segments: int = POOL_SEGMENTS) -> np.ndarray:
    """ Boundaries of `segments` contiguous near-equal parts; earlier parts take the remainder. """
    base, remainder = divmod(length, segments)
    sizes = [base + (1 if i < remainder else 0) for i in range(segments)]
    return np.concatenate([[0], np.cumsum(sizes)])


def pool_bendr(b: Tensor, segments: int = POOL_SEGMENTS) -> Tensor:
    """
    Average-pool a `dim x T` BENDR sequence into `segments` concatenated vectors.

    Raises:
        SequenceTooShortError: If `T < segments`.
    """
    b = as_tensor(b)
    length = b.shape[1]
    if length < segments:
        raise SequenceTooShortError(f"Cannot pool {length} BENDR vectors into {segments} segments")
    bounds = segment_bounds(length, segments)
    return concat([b[:, bounds[i]:bounds[i + 1]].mean(axis=1) for i in range(segments)], axis=0)


def regularize_sequence(b: Tensor, mask_vector: Tensor, rng: np.random.Generator, time_p: float = 0.01,
                        time_frac: float = 0.1, channel_p: float = 0.005, channel_frac: float = 0.1) -> Tensor:
    """
    Fine-tuning regularization of a `dim x T` BENDR sequence.

    Time masking: each token starts, with probability `time_p`, a span of `round(time_frac * T)`
    tokens replaced by the mask vector. Channel dropping: each feature channel starts, with
    probability `channel_p`, a span of `round(channel_frac * dim)` channels zeroed over the
    whole sequence. Spans are clipped at the end and may overlap.
    """
    b = as_tensor(b)
    dim, length = b.shape
    if time_p > 0:
        span = max(1, int(round(time_frac * length)))
        masked = spans_to_positions(np.flatnonzero(rng.random(length) < time_p), span, length)
        if len(masked):
            indicator = np.zeros((1, length))
            indicator[0, masked] = 1.0
            b = b * (1.0 - indicator) + as_tensor(mask_vector).reshape(dim, 1) * indicator
    if channel_p > 0:
        span = max(1, int(round(channel_frac * dim)))
        dropped = spans_to_positions(np.flatnonzero(rng.random(dim) < channel_p), span, dim)
        if len(dropped):
            keep = np.ones((dim, 1))
            keep[dropped] = 0.0
            b = b * keep
    return b


class Classifier(Module):
    """
    Common behaviour of the downstream classifiers.

    Subclasses provide `encoder`, `mask_vector`, `features()` and the head parameters.
    """

    encoder: Encoder
    mask_vector: Parameter
    config: ModelConfig
    variant: int

    def features(self, b: Tensor) -> Tensor:
        raise NotImplementedError("features must be implemented by subclasses.")

    def forward(self, x, rng: Optional[np.random.Generator] = None,
                regularization: Optional[Dict[str, float]] = None) -> Tensor:
        """
        Logits of one trial, shape `1 x targets`.

        `regularization` holds the keyword arguments of `regularize_sequence`; the BENDR
        sequence is regularized only when it and `rng` are given.
        """
        b = self.encoder(x)
        if regularization is not None and rng is not None:
            b = regularize_sequence(b, self.mask_vector, rng, **regularization)
        feature = self.features(b)
        return linear(feature.reshape(1, -1), self.head_weight, self.head_bias)

    def logits(self, trials, rng: Optional[np.random.Generator] = None,
               regularization: Optional[Dict[str, float]] = None) -> Tensor:
        """ Logits of a batch of trials, shape `N x targets`. """
        return concat([self(x, rng=rng, regularization=regularization) for x in trials], axis=0)


class LinearClassifier(Classifier):
    """ Encoder, four-segment average pooling, and an affine head. """

    def __init__(self, encoder: Encoder, mask_vector: np.ndarray, targets: int, encoder_dim: int,
                 rng: np.random.Generator):
        self.encoder = encoder
        self.mask_vector = Parameter(np.array(mask_vector), requires_grad=False)
        self.head_weight = xavier_uniform((targets, POOL_SEGMENTS * encoder_dim), rng)
        self.head_bias = Parameter(np.zeros(targets))

    def features(self, b: Tensor) -> Tensor:
        return pool_bendr(b)


class TransformerClassifier(Classifier):
    """ Encoder, contextualizer (always in eval mode), and an affine head on the start-token output. """

    def __init__(self, encoder: Encoder, contextualizer: Contextualizer, targets: int, model_dim: int,
                 rng: np.random.Generator):
        self.encoder = encoder
        self.contextualizer = contextualizer
        contextualizer.mask_vector.requires_grad = False
        self.head_weight = xavier_uniform((targets, model_dim), rng)
        self.head_bias = Parameter(np.zeros(targets))

    @property
    def mask_vector(self) -> Parameter:
        return self.contextualizer.mask_vector

    def features(self, b: Tensor) -> Tensor:
        self.contextualizer.eval()
        return self.contextualizer(b).hidden[0]


def build_variant(variant: int, targets: int, checkpoint: Optional[Checkpoint] = None,
                  model_config: Optional[ModelConfig] = None, seed: int = 0) -> Classifier:
    """
    Assemble the classifier of a transfer variant.

    Args:
        variant (int): 1 to 6.
        targets (int): Number of classes.
        checkpoint (Optional[Checkpoint]): Pretrained model; required by variants 1, 2, 4 and 6.
        model_config (Optional[ModelConfig]): Architecture for randomly initialized variants
            (defaults to the checkpoint's, then to the published architecture).
        seed (int): Seed of the fresh parameters.

    Returns:
        Classifier: Model whose `trainable_parameters()` is the variant's trainable set.

    Raises:
        CheckpointError: If a pretrained variant gets no checkpoint.
        ValueError: If `variant` is not in 1..6.
    """
    if variant not in TRANSFORMER_VARIANTS + LINEAR_VARIANTS:
        raise ValueError(f"Unknown fine-tuning variant {variant}")
    rng = np.random.default_rng(seed)
    if variant in PRETRAINED_VARIANTS:
        if checkpoint is None:
            raise CheckpointError(f"Variant {variant} needs a pretrained checkpoint")
        base = checkpoint.build_model()
    else:
        config = model_config or (checkpoint.model_config if checkpoint is not None else ModelConfig())
        base = BendrModel(config, seed=seed)
    return _assemble(variant, base, targets, rng)


def _assemble(variant: int, base: BendrModel, targets: int, rng: np.random.Generator) -> Classifier:
    config = base.config
    if variant in TRANSFORMER_VARIANTS:
        model = TransformerClassifier(base.encoder, base.contextualizer, targets, config.model_dim, rng)
        if variant == 4:
            model.encoder.freeze()
    else:
        model = LinearClassifier(base.encoder, base.contextualizer.mask_vector.data, targets, config.encoder_dim, rng)
        if variant == 6:
            model.encoder.freeze()
    model.mask_vector.requires_grad = False
    model.config, model.variant = config, variant
    return model


def classifier_from_checkpoint(checkpoint: Checkpoint) -> Classifier:
    """
    Rebuild a fine-tuned classifier from a fold checkpoint.

    Raises:
        CheckpointError: If the checkpoint holds no classifier or its parameters do not fit.
    """
    try:
        variant, targets = int(checkpoint.extra["variant"]), int(checkpoint.extra["targets"])
    except (KeyError, TypeError, ValueError) as err:
        raise CheckpointError(f"Checkpoint holds no fine-tuned classifier (missing {err})") from err
    if variant not in TRANSFORMER_VARIANTS + LINEAR_VARIANTS:
        raise CheckpointError(f"Checkpoint names unknown variant {variant}")
    model = _assemble(variant, BendrModel(checkpoint.model_config), targets, np.random.default_rng(0))
    checkpoint.restore(model)
    return model


def trainable_mask(model: Module) -> Dict[str, bool]:
    """ Parameter name -> whether it is trained. """
    return {name: p.requires_grad for name, p in model.named_parameters()}
