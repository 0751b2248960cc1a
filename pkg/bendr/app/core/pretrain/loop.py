"""
Masked contrastive pretraining loop.

Each step draws `batch_size` sequences, and for every sequence:
    1. encodes it,
    2. draws a mask plan,
    3. contextualizes it in training mode,
    4. scores the contrastive loss.
The batch loss is the mean of the per-sequence losses. Gradients go through one Adam
update with the warmup + cosine learning rate.

Records `step<TAB>lr<TAB>loss<TAB>accuracy` are appended to the training log. A non-finite
loss or gradient stops training before the optimizer touches the parameters; the state
reached by the previous step is written to `last_good.ckpt` and `TrainingAbortedError`
names it. Checkpoints carry the sampler state under `extra["sampler"]`, so a resumed run
draws the same batches, masks and dropout as an uninterrupted one.
"""

from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Union

import numpy as np

from bendr.app.config import RunConfig
from bendr.app.core.exceptions import NonFiniteError, TrainingAbortedError
from bendr.app.core.logger import get_logger, get_training_logger
from bendr.app.core.model import BendrModel, bendr_activation_penalty, save_checkpoint
from bendr.app.core.pretrain.loss import contrastive_loss
from bendr.app.core.pretrain.masking import sample_mask_spans
from bendr.app.core.tensor import AdamState, adam_step, lr_schedule


logger = get_logger(__name__)


@dataclass
class PretrainResult:
    """
    Outcome of a pretraining run.

    Attributes:
        history (List[Dict[str, float]]): One record per step: step, lr, loss, accuracy.
        checkpoint_path (Optional[Path]): Final checkpoint, when an output directory was given.
    """

    history: List[Dict[str, float]] = field(default_factory=list)
    checkpoint_path: Optional[Path] = None

    @property
    def losses(self) -> List[float]:
        return [record["loss"] for record in self.history]


class SequenceSampler:
    """ Endless batches from a list of sequences; every pass visits them in a fresh random order. """

    def __init__(self, sequences: Sequence[np.ndarray], rng: np.random.Generator):
        if len(sequences) == 0:
            raise ValueError("Pretraining needs at least one sequence")
        self.sequences = sequences
        self.rng = rng
        self._order: List[int] = []

    def batch(self, size: int) -> List[np.ndarray]:
        out = []
        while len(out) < size:
            if not self._order:
                self._order = [int(i) for i in self.rng.permutation(len(self.sequences))]
            out.append(self.sequences[self._order.pop(0)])
        return out

    def state_dict(self) -> Dict[str, Any]:
        """ JSON-compatible generator state and the rest of the current pass. """
        return {"rng": self.rng.bit_generator.state, "order": list(self._order)}

    def load_state_dict(self, state: Dict[str, Any]) -> None:
        self.rng.bit_generator.state = state["rng"]
        self._order = [int(i) for i in state["order"]]


def pretrain_step(model: BendrModel, batch: Sequence[np.ndarray], config: RunConfig, rng: np.random.Generator):
    """
    Forward pass of one batch.

    Returns:
        Tuple[Tensor, float]: Batch loss and mean contrastive accuracy over sequences with masks.
    """
    cfg = config.pretrain
    model.train()
    losses, accuracies = [], []
    for x in batch:
        b = model.encoder(x)
        plan = sample_mask_spans(b.shape[1], cfg.p_mask, cfg.span, rng, cfg.num_distractors)
        context = model.contextualizer(b, masked=plan.masked, rng=rng)
        if plan.is_empty:
            losses.append(bendr_activation_penalty(b) * cfg.activation_weight)
            continue
        output = contrastive_loss(context, b, plan, cfg.temperature, cfg.activation_weight)
        losses.append(output.loss)
        accuracies.append(output.accuracy)
    total = losses[0]
    for loss in losses[1:]:
        total = total + loss
    return total * (1.0 / len(losses)), float(np.mean(accuracies)) if accuracies else float("nan")


def pretrain_loop(model: BendrModel, sequences: Sequence[np.ndarray], config: RunConfig,
                  out_dir: Optional[Union[str, Path]] = None, adam: Optional[AdamState] = None,
                  start_step: int = 0, sampler_state: Optional[Dict[str, Any]] = None) -> PretrainResult:
    """
    Pretrain `model` on `sequences`.

    Args:
        model (BendrModel): Model to train in place.
        sequences (Sequence[np.ndarray]): Standardized 20 x L sequences.
        config (RunConfig): Run configuration (pretrain section and seed are used).
        out_dir (Optional[Union[str, Path]]): Directory for `step_XXXXXX.ckpt`, `final.ckpt` and,
            on abort, `last_good.ckpt`; no checkpoints are written when None.
        adam (Optional[AdamState]): Optimizer state to resume from.
        start_step (int): Step counter to resume from.
        sampler_state (Optional[Dict[str, Any]]): `extra["sampler"]` of the checkpoint resumed from;
            the generator is seeded from `config.seed` when None.

    Returns:
        PretrainResult: Per-step history and the final checkpoint path.

    Raises:
        TrainingAbortedError: If the loss or a gradient becomes non-finite.
    """
    cfg = config.pretrain
    rng = np.random.default_rng(config.seed)
    sampler = SequenceSampler(sequences, rng)
    if sampler_state is not None:
        sampler.load_state_dict(sampler_state)
    params = list(model.trainable_parameters())
    adam = adam or AdamState.for_parameters(params, weight_decay=cfg.weight_decay)
    out_dir = Path(out_dir) if out_dir is not None else None
    training_log = get_training_logger(config.paths.training_log or (out_dir / "training.log" if out_dir else None))

    def checkpoint(name: str, step: int, state: Dict[str, Any]) -> Path:
        return save_checkpoint(out_dir / name, model, config, step=step, adam=adam, extra={"sampler": state})

    result = PretrainResult()
    logger.info(f"Pretraining {model.num_parameters(trainable_only=True)} parameters for {cfg.total_steps} steps "
                f"on {len(sequences)} sequences")
    for step in range(start_step + 1, cfg.total_steps + 1):
        lr = lr_schedule(step, cfg.total_steps, cfg.warmup_frac, cfg.peak_lr)
        before_step = sampler.state_dict()
        try:
            model.zero_grad()
            loss, accuracy = pretrain_step(model, sampler.batch(cfg.batch_size), config, rng)
            if not np.isfinite(loss.item()):
                raise NonFiniteError(f"Loss is {loss.item()}")
            loss.backward()
            # adam_step checks every gradient before it updates anything
            adam_step(params, [p.grad for p in params], adam, lr)
        except NonFiniteError as err:
            logger.error(f"Step {step}: {err}")
            last_good = checkpoint("last_good.ckpt", step - 1, before_step) if out_dir is not None else None
            raise TrainingAbortedError(step, str(last_good) if last_good else None) from err

        record = {"step": step, "lr": lr, "loss": loss.item(), "accuracy": accuracy}
        result.history.append(record)
        training_log.info(f"{step}\t{lr:.6e}\t{record['loss']:.6f}\t{accuracy:.4f}")

        if out_dir is not None and step % cfg.checkpoint_every == 0:
            checkpoint(f"step_{step:06d}.ckpt", step, sampler.state_dict())

    if out_dir is not None:
        result.checkpoint_path = checkpoint("final.ckpt", cfg.total_steps, sampler.state_dict())
    return result
