"""
Masked contrastive objective.

For a masked position t with transformer output c_t, true BENDR vector b_t and distractor
set B_D (b_t included):

    l_t = -log( exp(cossim(c_t, b_t) / k) / sum_{b in B_D} exp(cossim(c_t, b) / k) )

The temperature k divides the similarity inside the exponent. The sequence loss is the
mean of l_t over masked positions plus the weighted mean squared BENDR activation.
"""

from dataclasses import dataclass

import numpy as np

from bendr.app.core.model.contextualizer import ContextSequence
from bendr.app.core.model.encoder import bendr_activation_penalty
from bendr.app.core.pretrain.masking import MaskPlan
from bendr.app.core.tensor import Tensor, as_tensor, cosine_similarity, log_softmax


@dataclass
class ContrastiveOutput:
    """
    Loss terms of one sequence.

    Attributes:
        loss (Tensor): Contrastive term plus weighted activation penalty.
        contrastive (Tensor): Mean of l_t over masked positions.
        penalty (Tensor): Mean squared BENDR activation.
        accuracy (float): Fraction of masked positions whose target has the highest similarity.
    """

    loss: Tensor
    contrastive: Tensor
    penalty: Tensor
    accuracy: float


def candidate_similarities(context: ContextSequence, b: Tensor, plan: MaskPlan) -> Tensor:
    """
    Cosine similarity of each masked output with its candidates.

    Returns:
        Tensor: `len(plan) x (1 + distractors)`, target in column 0.

    Raises:
        DegenerateRepresentationError: If a compared vector has zero norm.
    """
    outputs = context.positions                      # T x D
    targets = as_tensor(b).T                         # T x D
    if outputs.shape != targets.shape:
        raise ValueError(f"Context outputs {outputs.shape} do not align with BENDR vectors {targets.shape}")
    c = outputs[plan.masked]
    candidates = targets[plan.candidates()]          # M x K x D
    return cosine_similarity(c.reshape(len(plan), 1, c.shape[1]), candidates, axis=-1)


def contrastive_loss_from_similarities(similarities: Tensor, temperature: float) -> Tensor:
    """
    Mean of -log softmax(similarities / temperature)[:, 0].

    Args:
        similarities (Tensor): `M x K` cosine similarities, target in column 0.
        temperature (float): Temperature k > 0.

    Returns:
        Tensor: Scalar loss.
    """
    if temperature <= 0:
        raise ValueError(f"temperature must be positive, got {temperature}")
    similarities = as_tensor(similarities)
    if similarities.ndim != 2 or similarities.shape[0] == 0:
        raise ValueError(f"Expected a non-empty M x K similarity matrix, got shape {similarities.shape}")
    return -log_softmax(similarities * (1.0 / temperature), axis=-1)[:, 0].mean()


def accuracy_from_similarities(similarities) -> float:
    """ Fraction of rows whose column 0 is strictly greater than every other column; a tie is a miss. """
    values = as_tensor(similarities).data
    if values.shape[0] == 0:
        return 0.0
    if values.shape[1] < 2:
        return 1.0
    return float(np.mean(values[:, 0] > values[:, 1:].max(axis=1)))


def contrastive_loss(context: ContextSequence, b: Tensor, plan: MaskPlan, temperature: float,
                     activation_weight: float = 1.0) -> ContrastiveOutput:
    """
    Contrastive loss of one sequence.

    Raises:
        ValueError: If the plan masks nothing.
        DegenerateRepresentationError: If a compared vector has zero norm.
    """
    if plan.is_empty:
        raise ValueError("contrastive_loss requires a plan with at least one masked position")
    similarities = candidate_similarities(context, b, plan)
    contrastive = contrastive_loss_from_similarities(similarities, temperature)
    penalty = bendr_activation_penalty(b)
    return ContrastiveOutput(loss=contrastive + penalty * activation_weight, contrastive=contrastive, penalty=penalty,
                             accuracy=accuracy_from_similarities(similarities))


def contrastive_accuracy(context: ContextSequence, b: Tensor, plan: MaskPlan) -> float:
    """ Fraction of masked positions whose true vector is the most similar candidate. """
    if plan.is_empty:
        raise ValueError("contrastive_accuracy requires a plan with at least one masked position")
    return accuracy_from_similarities(candidate_similarities(context, b, plan))
