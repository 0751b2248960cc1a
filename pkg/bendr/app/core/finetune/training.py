"""
Supervised fine-tuning of one classifier.
"""

import math
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence

import numpy as np

from bendr.app.config import FinetuneConfig
from bendr.app.core.exceptions import NonFiniteError
from bendr.app.core.finetune.classifiers import Classifier
from bendr.app.core.finetune.sampling import balance_sampler
from bendr.app.core.ingest.datasets import DatasetDescriptor
from bendr.app.core.logger import get_logger
from bendr.app.core.tensor import AdamState, adam_step, cross_entropy, lr_schedule, softmax


logger = get_logger(__name__)


@dataclass(frozen=True)
class TrainingPlan:
    """ Resolved batch size, epochs and peak learning rate of a fine-tuning run. """

    batch_size: int
    epochs: int
    peak_lr: float

    @classmethod
    def resolve(cls, config: FinetuneConfig, descriptor: DatasetDescriptor) -> "TrainingPlan":
        """ Explicit config values win over the dataset preset. """
        return cls(batch_size=config.batch_size or descriptor.batch_size,
                   epochs=config.epochs or descriptor.epochs,
                   peak_lr=config.peak_lr if config.peak_lr is not None else descriptor.peak_lr)


def regularization_options(config: FinetuneConfig) -> Dict[str, float]:
    return {"time_p": config.time_mask_p, "time_frac": config.time_mask_frac,
            "channel_p": config.channel_drop_p, "channel_frac": config.channel_drop_frac}


def train_classifier(model: Classifier, trials: Sequence[np.ndarray], labels, config: FinetuneConfig,
                     plan: TrainingPlan, num_classes: int, rng: np.random.Generator,
                     adam: Optional[AdamState] = None) -> List[float]:
    """
    Fit `model` with cross-entropy on class-balanced epochs.

    Only `model.trainable_parameters()` are updated; the learning rate warms up over the
    first `warmup_frac` of all steps and then decays along a cosine. Pass `adam` to keep
    the optimizer state after training.

    Returns:
        List[float]: Mean training loss of every epoch.

    Raises:
        NonFiniteError: If a loss becomes non-finite.
    """
    labels = np.asarray(labels, dtype=np.int64)
    params = list(model.trainable_parameters())
    adam = adam or AdamState.for_parameters(params, weight_decay=config.weight_decay)
    regularization = regularization_options(config)

    epoch_size = int(np.bincount(labels, minlength=num_classes).min()) * num_classes
    steps_per_epoch = math.ceil(epoch_size / plan.batch_size)
    total_steps = plan.epochs * steps_per_epoch

    model.train()
    step = 0
    epoch_losses = []
    for epoch in range(plan.epochs):
        order = balance_sampler(labels, rng, num_classes)
        losses = []
        for start in range(0, len(order), plan.batch_size):
            batch = order[start:start + plan.batch_size]
            step += 1
            lr = lr_schedule(step, total_steps, config.warmup_frac, plan.peak_lr)
            model.zero_grad()
            loss = cross_entropy(model.logits([trials[i] for i in batch], rng=rng, regularization=regularization),
                                 labels[batch])
            if not np.isfinite(loss.item()):
                raise NonFiniteError(f"Fine-tuning loss is {loss.item()} at epoch {epoch + 1}, step {step}")
            loss.backward()
            adam_step(params, [p.grad for p in params], adam, lr)
            losses.append(loss.item())
        epoch_losses.append(float(np.mean(losses)))
        logger.debug(f"Epoch {epoch + 1}/{plan.epochs}: loss {epoch_losses[-1]:.4f}")
    return epoch_losses


def predict_probabilities(model: Classifier, trials: Sequence[np.ndarray],
                          batch_size: Optional[int] = None) -> np.ndarray:
    """ Class probabilities (N x classes) without regularization. """
    model.eval()
    batch_size = batch_size or max(len(trials), 1)
    out = [softmax(model.logits(trials[start:start + batch_size]), axis=-1).data
           for start in range(0, len(trials), batch_size)]
    return np.concatenate(out, axis=0)
