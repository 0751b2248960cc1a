"""
Mapping of recorded channel labels onto the fixed 19-electrode target order.

Labels are normalized before matching:
    - an "EEG " prefix is removed,
    - everything from the first "-" on is dropped ("Fp1-REF" -> "Fp1", bipolar "FPz-Cz" -> "FPz"),
    - trailing dots are removed ("Fc5." -> "Fc5"),
    - matching is case-insensitive,
    - legacy temporal names are translated (T3->T7, T4->T8, T5->P7, T6->P8).

Midline electrodes outside the target set (FPz, Oz) stand in for their nearest target
(Fp1, O1) only when that target is not recorded itself.
"""

from dataclasses import dataclass
from typing import Dict, List, Sequence, Union

import numpy as np

from bendr.app.core.exceptions import ShapeError
from bendr.app.core.ingest.session import UI_10_20_CHANNELS, RawSession


TARGET_CHANNELS = tuple(UI_10_20_CHANNELS)
MISSING = -1

LEGACY_NAMES = {"T3": "T7", "T4": "T8", "T5": "P7", "T6": "P8"}
NEAREST_TARGET = {"FPZ": "FP1", "OZ": "O1"}

_TARGET_INDEX = {name.upper(): i for i, name in enumerate(TARGET_CHANNELS)}


def normalize_label(label: str) -> str:
    """ Canonical upper-case electrode name of a recorded label. """
    name = label.strip()
    if name.upper().startswith("EEG "):
        name = name[4:].strip()
    name = name.split("-")[0].strip().rstrip(".").upper()
    return LEGACY_NAMES.get(name, name)


@dataclass
class ChannelMap:
    """
    Assignment of source channels to the target electrodes.

    Attributes:
        targets (Sequence[str]): Target electrode names in global order.
        assignment (List[int]): Source index per target, or `MISSING`.
        source_labels (List[str]): Labels of the source channels.
    """

    targets: Sequence[str]
    assignment: List[int]
    source_labels: List[str]

    @property
    def missing(self) -> List[str]:
        return [t for t, a in zip(self.targets, self.assignment) if a == MISSING]

    @property
    def present(self) -> np.ndarray:
        """ Boolean mask over targets: True where a source channel is assigned. """
        return np.array([a != MISSING for a in self.assignment])

    def as_dict(self) -> Dict[str, str]:
        """ Target name -> source label (or "MISSING"), as stored in manifests. """
        return {t: (self.source_labels[a] if a != MISSING else "MISSING") for t, a in zip(self.targets, self.assignment)}

    def apply(self, data: np.ndarray) -> np.ndarray:
        """
        Reorder a sources x samples array into targets x samples; missing targets are zero rows.
        """
        data = np.asarray(data, dtype=np.float64)
        if data.ndim != 2 or data.shape[0] != len(self.source_labels):
            raise ShapeError(f"Expected {len(self.source_labels)} source channels, got shape {data.shape}")
        out = np.zeros((len(self.targets), data.shape[1]))
        for row, source in enumerate(self.assignment):
            if source != MISSING:
                out[row] = data[source]
        return out


def map_labels(labels: Sequence[str]) -> ChannelMap:
    """
    Resolve each target electrode from a list of recorded labels.

    Raises:
        ValueError: If two source channels resolve to the same target.
    """
    assignment = [MISSING] * len(TARGET_CHANNELS)
    fallbacks: Dict[int, int] = {}
    for index, label in enumerate(labels):
        name = normalize_label(label)
        if name in _TARGET_INDEX:
            row = _TARGET_INDEX[name]
            if assignment[row] != MISSING:
                raise ValueError(f"Channels '{labels[assignment[row]]}' and '{label}' both resolve to "
                                 f"{TARGET_CHANNELS[row]}")
            assignment[row] = index
        elif name in NEAREST_TARGET:
            fallbacks.setdefault(_TARGET_INDEX[NEAREST_TARGET[name]], index)
    for row, index in fallbacks.items():
        if assignment[row] == MISSING:
            assignment[row] = index
    return ChannelMap(targets=TARGET_CHANNELS, assignment=assignment, source_labels=list(labels))


def map_channels(session: Union[RawSession, Sequence[str]]) -> ChannelMap:
    """
    Resolve the target electrodes of a session (or of a list of labels).

    Auxiliary channels (EOG, ECG, references, ...) match no target and are ignored.
    """
    labels = session.channel_labels if isinstance(session, RawSession) else list(session)
    return map_labels(labels)


