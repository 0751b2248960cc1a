"""
Per-sequence amplitude scaling and the relative-amplitude channel.
"""

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from bendr.app.core.exceptions import ShapeError


@dataclass
class StandardizedSequence:
    """
    A sequence ready for the encoder.

    Attributes:
        data (np.ndarray): 20 x L; rows 0-18 are the target electrodes, row 19 the amplitude channel.
        dataset (str): Source dataset name.
        subject (str): Source subject.
        dataset_range (float): max(S_ds) - min(S_ds) of the source dataset in µV.
        session_id (str): Source session.
        fold (Optional[int]): Cross-validation fold, when assigned.
        label (Optional[str]): Class label of a trial.
    """

    data: np.ndarray
    dataset: str = ""
    subject: str = ""
    dataset_range: float = 1.0
    session_id: str = ""
    fold: Optional[int] = None
    label: Optional[str] = field(default=None)

    @property
    def amplitude(self) -> float:
        return float(self.data[-1, 0]) if self.data.shape[1] else 0.0

    @property
    def length(self) -> int:
        return self.data.shape[1]


def scale_array(x: np.ndarray, dataset_range: float, present: Optional[np.ndarray] = None,
                mode: str = "sequence") -> np.ndarray:
    """
    Scale the present channels of `x` into [-1, 1] and append the amplitude channel.

    In "sequence" mode one affine map, fitted to the joint min and max of the present
    channels, is applied to all of them; in "channel" mode every channel gets its own map.
    The amplitude channel is always `(max - min) / dataset_range` over the present channels.
    A constant input (max == min) yields zero data and a zero amplitude channel. Absent
    channels stay exactly zero.

    Args:
        x (np.ndarray): Channels x L, in µV.
        dataset_range (float): Dataset-wide range in µV.
        present (Optional[np.ndarray]): Boolean mask of recorded channels; all channels when None.
        mode (str): "sequence" or "channel".

    Returns:
        np.ndarray: (channels + 1) x L.
    """
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 2 or x.shape[1] < 1:
        raise ShapeError(f"scale expects a non-empty channels x L array, got shape {x.shape}")
    if dataset_range <= 0:
        raise ValueError(f"dataset_range must be positive, got {dataset_range}")
    if mode not in ("sequence", "channel"):
        raise ValueError(f"Unknown scale mode '{mode}'")
    present = np.ones(x.shape[0], dtype=bool) if present is None else np.asarray(present, dtype=bool)

    out = np.zeros((x.shape[0] + 1, x.shape[1]))
    if not present.any():
        return out
    values = x[present]
    low, high = values.min(), values.max()
    if high == low:
        return out

    if mode == "sequence":
        scaled = 2.0 * (values - low) / (high - low) - 1.0
    else:
        lows = values.min(axis=1, keepdims=True)
        spans = values.max(axis=1, keepdims=True) - lows
        safe = np.where(spans > 0, spans, 1.0)
        scaled = np.where(spans > 0, 2.0 * (values - lows) / safe - 1.0, 0.0)
    out[:-1][present] = np.clip(scaled, -1.0, 1.0)
    out[-1] = (high - low) / dataset_range
    return out


def scale_sequence(x: np.ndarray, dataset_range: float, present: Optional[np.ndarray] = None,
                   mode: str = "sequence", **metadata) -> StandardizedSequence:
    """ `scale_array` wrapped with source metadata. """
    return StandardizedSequence(data=scale_array(x, dataset_range, present, mode), dataset_range=dataset_range, **metadata)
