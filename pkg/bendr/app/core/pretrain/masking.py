"""
Span masking plans and distractor sampling for the contrastive task.

Training plans draw every token independently as a span start with probability `p_mask`;
spans of `span` tokens are clipped at the sequence end and may overlap. Evaluation plans
mask half the expected amount, `N_m = floor(0.5 * T * p_mask)` spans, placed every
`floor(T / N_m)` tokens starting at token 0.

Distractors for a masked position `t` are drawn uniformly, with replacement, from the other
positions of the same sequence (masked ones included).
"""

from dataclasses import dataclass
from typing import Union

import numpy as np

from bendr.app.core.exceptions import SequenceTooShortError


Seed = Union[int, np.random.Generator, None]


def _rng(seed: Seed) -> np.random.Generator:
    return seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)


@dataclass
class MaskPlan:
    """
    Masked positions of one sequence and their candidate sets.

    Attributes:
        length (int): Sequence length T in tokens.
        span (int): Span length.
        starts (np.ndarray): Span start indices, ascending.
        masked (np.ndarray): Union of the spans, ascending and unique.
        distractors (np.ndarray): `len(masked) x num_distractors` positions; row i belongs to `masked[i]`.
    """

    length: int
    span: int
    starts: np.ndarray
    masked: np.ndarray
    distractors: np.ndarray

    def __len__(self) -> int:
        return len(self.masked)

    @property
    def is_empty(self) -> bool:
        return len(self.masked) == 0

    def candidates(self) -> np.ndarray:
        """ `len(masked) x (1 + num_distractors)` positions with the target in column 0. """
        return np.concatenate([self.masked[:, None], self.distractors], axis=1)


def spans_to_positions(starts: np.ndarray, span: int, length: int) -> np.ndarray:
    """ Union of `[s, s + span)` clipped to `[0, length)`. """
    if len(starts) == 0:
        return np.zeros(0, dtype=np.int64)
    positions = (np.asarray(starts, dtype=np.int64)[:, None] + np.arange(span)[None, :]).ravel()
    return np.unique(positions[positions < length])


def sample_distractors(length: int, masked_positions: np.ndarray, n: int, seed: Seed = None) -> np.ndarray:
    """
    Draw `n` distractor positions for every masked position.

    Args:
        length (int): Sequence length T.
        masked_positions (np.ndarray): Target positions.
        n (int): Distractors per target.
        seed (Seed): Seed or generator.

    Returns:
        np.ndarray: `len(masked_positions) x n`; row i never contains `masked_positions[i]`.
    """
    masked_positions = np.asarray(masked_positions, dtype=np.int64)
    if len(masked_positions) and length < 2:
        raise SequenceTooShortError(f"A sequence of {length} token has no distractors")
    draws = _rng(seed).integers(0, max(length - 1, 1), size=(len(masked_positions), n))
    return draws + (draws >= masked_positions[:, None])


def sample_mask_spans(length: int, p_mask: float, span: int, seed: Seed = None, num_distractors: int = 20) -> MaskPlan:
    """
    Draw a training mask plan.

    Args:
        length (int): Sequence length T in tokens; must exceed `span`.
        p_mask (float): Probability of each token starting a span.
        span (int): Span length.
        seed (Seed): Seed or generator.
        num_distractors (int): Distractors per masked position.

    Returns:
        MaskPlan: The plan; empty when no token was drawn as a start.
    """
    if length <= span:
        raise SequenceTooShortError(f"Sequence of {length} tokens is not longer than the mask span {span}")
    rng = _rng(seed)
    starts = np.flatnonzero(rng.random(length) < p_mask)
    masked = spans_to_positions(starts, span, length)
    return MaskPlan(length=length, span=span, starts=starts, masked=masked,
                    distractors=sample_distractors(length, masked, num_distractors, rng))


def evaluation_starts(length: int, p_mask: float) -> np.ndarray:
    """
    Evenly spaced evaluation span starts.

    Raises:
        SequenceTooShortError: If `floor(0.5 * length * p_mask)` is 0.
    """
    count = int(np.floor(0.5 * length * p_mask))
    if count < 1:
        raise SequenceTooShortError(f"Sequence of {length} tokens is too short to evaluate at p_mask={p_mask}")
    return np.arange(count, dtype=np.int64) * (length // count)


def evaluation_plan(length: int, p_mask: float, span: int, seed: Seed = 0, num_distractors: int = 20) -> MaskPlan:
    """ Deterministic evaluation plan; distractors come from the fixed evaluation seed. """
    starts = evaluation_starts(length, p_mask)
    masked = spans_to_positions(starts, span, length)
    return MaskPlan(length=length, span=span, starts=starts, masked=masked,
                    distractors=sample_distractors(length, masked, num_distractors, _rng(seed)))
