"""
Contrastive evaluation and the sequence-length sweep.

Evaluation runs the model in eval mode on deterministic plans (evenly spaced spans,
distractors from a fixed seed) and reports, per sequence, the fraction of masked
positions whose true BENDR vector is the most similar of its candidates.
"""

import csv
from dataclasses import dataclass
from pathlib import Path
from typing import List, Optional, Sequence, Union

import numpy as np

from bendr.app.config import PretrainConfig
from bendr.app.core.exceptions import SequenceTooShortError
from bendr.app.core.logger import get_logger
from bendr.app.core.model import BendrModel
from bendr.app.core.pretrain.loss import contrastive_accuracy
from bendr.app.core.pretrain.masking import evaluation_plan


logger = get_logger(__name__)

SWEEP_HEADER = ["length_s", "tokens", "mean_accuracy", "n_sequences"]
CONTRASTIVE_HEADER = ["sequence", "tokens", "accuracy"]


def evaluate_contrastive(model: BendrModel, sequences: Sequence[np.ndarray], config: PretrainConfig,
                         length: Optional[int] = None, seed: int = 0) -> np.ndarray:
    """
    Contrastive accuracy of every sequence.

    Args:
        model (BendrModel): Model to evaluate (switched to eval mode).
        sequences (Sequence[np.ndarray]): Standardized 20 x L sequences.
        config (PretrainConfig): Masking and distractor settings.
        length (Optional[int]): Samples to keep from the start of each sequence; whole sequences when None.
        seed (int): Evaluation seed for distractor draws.

    Returns:
        np.ndarray: One accuracy per sequence.

    Raises:
        SequenceTooShortError: If a sequence is shorter than `length` or yields no evaluation span.
    """
    model.eval()
    accuracies = []
    for index, x in enumerate(sequences):
        x = np.asarray(x)
        if length is not None:
            if x.shape[1] < length:
                raise SequenceTooShortError(f"Sequence {index} has {x.shape[1]} samples, {length} requested")
            x = x[:, :length]
        b = model.encoder(x)
        plan = evaluation_plan(b.shape[1], config.p_mask, config.span, np.random.default_rng([seed, index]),
                               config.num_distractors)
        context = model.contextualizer(b, masked=plan.masked)
        accuracies.append(contrastive_accuracy(context, b, plan))
    return np.asarray(accuracies)


def write_contrastive_table(accuracies: Sequence[float], tokens: int, path: Union[str, Path]) -> Path:
    """ Write per-sequence accuracies as a tab-separated table. """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, delimiter="\t", lineterminator="\n")
        writer.writerow(CONTRASTIVE_HEADER)
        for i, accuracy in enumerate(accuracies):
            writer.writerow([i, tokens, f"{accuracy:.6f}"])
    return path


@dataclass
class SweepRow:
    """ Mean contrastive accuracy at one sequence length. """

    length_s: float
    tokens: int
    mean_accuracy: float
    n_sequences: int


def length_sweep(model: BendrModel, sequences: Sequence[np.ndarray], lengths_s: Sequence[float],
                 config: PretrainConfig, rate: float = 256.0, seed: int = 0) -> List[SweepRow]:
    """
    Evaluate the same sequences truncated to each length.

    Args:
        model (BendrModel): Model to evaluate.
        sequences (Sequence[np.ndarray]): Sequences at least as long as the longest length.
        lengths_s (Sequence[float]): Lengths in seconds.
        config (PretrainConfig): Masking and distractor settings.
        rate (float): Sampling rate of the sequences.
        seed (int): Evaluation seed.

    Returns:
        List[SweepRow]: One row per length, in the order given.
    """
    rows = []
    for length_s in lengths_s:
        samples = int(round(length_s * rate))
        tokens = model.encoder.output_length(samples)
        accuracies = evaluate_contrastive(model, sequences, config, length=samples, seed=seed)
        rows.append(SweepRow(length_s=float(length_s), tokens=tokens, mean_accuracy=float(accuracies.mean()),
                             n_sequences=len(accuracies)))
        logger.info(f"Sweep {length_s:g} s ({tokens} tokens): mean accuracy {rows[-1].mean_accuracy:.4f}")
    return rows


def write_sweep_table(rows: Sequence[SweepRow], path: Union[str, Path]) -> Path:
    """ Write sweep rows as a tab-separated table with a header line. """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, delimiter="\t", lineterminator="\n")
        writer.writerow(SWEEP_HEADER)
        for row in rows:
            writer.writerow([f"{row.length_s:g}", row.tokens, f"{row.mean_accuracy:.6f}", row.n_sequences])
    return path
