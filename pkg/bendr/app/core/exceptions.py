"""
Exception hierarchy for the BENDR toolkit.

Every error raised by the toolkit derives from `BendrError` and from the closest builtin
exception, so callers can catch either the domain error or the standard one.

The CLI maps these exceptions onto exit codes:
    - `NonFiniteError` and subclasses: exit code 2 (numerical failure)
    - every other `BendrError`: exit code 1 (user error)
"""

from typing import Optional


class BendrError(Exception):
    """ Base class for all toolkit errors. """


class ShapeError(BendrError, ValueError):
    """ Tensor or signal shapes are incompatible with the requested operation. """


class NonFiniteError(BendrError, FloatingPointError):
    """ A NaN or infinite value was produced or supplied. """


class DegenerateRepresentationError(NonFiniteError):
    """ A zero-norm vector reached a cosine similarity. """


class GraphError(BendrError, RuntimeError):
    """ The autodiff graph cannot be differentiated (cycle, detached loss, non-scalar loss). """


class EdfParseError(BendrError, ValueError):
    """
    An EDF byte stream could not be parsed.

    Attributes:
        offset (int): Byte offset at which the problem was detected.
    """

    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} (at byte offset {offset})")
        self.offset = offset


class SequenceTooShortError(BendrError, ValueError):
    """ A sequence is shorter than an operation's minimum length. """


class ConfigError(BendrError, ValueError):
    """ A configuration file or flag is invalid. """


class CheckpointError(BendrError, ValueError):
    """ A checkpoint is missing, corrupted, or incompatible. """


class TrainingAbortedError(NonFiniteError):
    """
    Training stopped on a non-finite loss.

    Attributes:
        step (int): Step at which the loss became non-finite.
        last_checkpoint (Optional[str]): `last_good.ckpt` holding the state before the failing step;
            None when the run had no output directory.
    """

    def __init__(self, step: int, last_checkpoint: Optional[str]):
        super().__init__(
            f"Loss became non-finite at step {step}; last good checkpoint: {last_checkpoint or 'none'}")
        self.step = step
        self.last_checkpoint = last_checkpoint
