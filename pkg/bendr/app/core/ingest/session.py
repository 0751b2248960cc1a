"""
Recording containers shared by the parsers, the synthetic generator and preprocessing.

A `RawSession` is a list of `RawSignal` records. Each signal keeps its own sampling rate,
so files whose signals were recorded at different rates are held without loss;
harmonization to a common rate happens during preprocessing. The 2D `signals_array` view is
available whenever all signals share a rate.
"""

from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np

from bendr.app.core.exceptions import ShapeError


ANNOTATION_LABEL = "EDF Annotations"

# The 19 electrodes of the unambiguously illustrated 10/20 montage, in the global channel order
UI_10_20_CHANNELS = [
    "Fp1", "Fp2", "F7", "F3", "Fz", "F4", "F8", "T7", "C3", "Cz",
    "C4", "T8", "P7", "P3", "Pz", "P4", "P8", "O1", "O2",
]


@dataclass
class Annotation:
    """ A labelled event: onset and duration in seconds from the start of the recording. """

    onset: float
    label: str
    duration: float = 0.0


@dataclass
class RawSignal:
    """
    One recorded channel.

    Attributes:
        label (str): Channel label as recorded (e.g. "EEG Fp1-REF", "T3", "FPz-Cz").
        sampling_rate (float): Native sampling rate in Hz.
        samples (np.ndarray): Physical values (µV for EEG channels).
        units (str): Physical dimension as recorded.
        transducer (str): Transducer type field.
        prefilter (str): Prefiltering field (e.g. "HP:0.1Hz LP:120Hz").
        physical_min (Optional[float]): Physical minimum used for quantization; derived from the data when None.
        physical_max (Optional[float]): Physical maximum used for quantization; derived from the data when None.
        digital_min (int): Digital minimum.
        digital_max (int): Digital maximum.
    """

    label: str
    sampling_rate: float
    samples: np.ndarray
    units: str = "uV"
    transducer: str = ""
    prefilter: str = ""
    physical_min: Optional[float] = None
    physical_max: Optional[float] = None
    digital_min: int = -32768
    digital_max: int = 32767

    def __post_init__(self):
        self.samples = np.asarray(self.samples, dtype=np.float64)
        if self.samples.ndim != 1:
            raise ShapeError(f"Signal '{self.label}' must be one-dimensional, got shape {self.samples.shape}")
        if self.sampling_rate <= 0:
            raise ValueError(f"Signal '{self.label}' has non-positive sampling rate {self.sampling_rate}")

    @property
    def duration(self) -> float:
        return len(self.samples) / self.sampling_rate


@dataclass
class RecordingHeader:
    """ Recording-level EDF header fields carried through parse/write. """

    patient_id: str = "X X X X"
    recording_id: str = "Startdate X X X X"
    start_date: str = "01.01.00"
    start_time: str = "00.00.00"
    reserved: str = ""
    record_duration: float = 1.0


@dataclass
class RawSession:
    """
    A parsed multi-channel recording.

    Attributes:
        signals (List[RawSignal]): Data signals (the annotation channel is never included).
        annotations (List[Annotation]): Events, sorted by onset.
        subject (str): Subject identifier used for cross-validation grouping.
        session_id (str): Identifier of the recording.
        header (RecordingHeader): Recording-level header fields.
    """

    signals: List[RawSignal]
    annotations: List[Annotation] = field(default_factory=list)
    subject: str = ""
    session_id: str = ""
    header: RecordingHeader = field(default_factory=RecordingHeader)

    def __post_init__(self):
        labels = [s.label for s in self.signals]
        if len(set(labels)) != len(labels):
            duplicates = sorted({label for label in labels if labels.count(label) > 1})
            raise ValueError(f"Session '{self.session_id}' has duplicate channel labels: {duplicates}")

    @property
    def channel_labels(self) -> List[str]:
        return [s.label for s in self.signals]

    @property
    def is_homogeneous(self) -> bool:
        rates = {s.sampling_rate for s in self.signals}
        lengths = {len(s.samples) for s in self.signals}
        return len(rates) <= 1 and len(lengths) <= 1

    @property
    def sampling_rate(self) -> float:
        """ Common sampling rate of all signals. """
        rates = sorted({s.sampling_rate for s in self.signals})
        if len(rates) != 1:
            raise ShapeError(f"Session '{self.session_id}' has heterogeneous sampling rates {rates}")
        return rates[0]

    @property
    def signals_array(self) -> np.ndarray:
        """ Channels x samples view; requires a common rate and length. """
        if not self.is_homogeneous:
            raise ShapeError(f"Session '{self.session_id}' signals differ in rate or length")
        return np.stack([s.samples for s in self.signals]) if self.signals else np.zeros((0, 0))

    @property
    def duration(self) -> float:
        return max((s.duration for s in self.signals), default=0.0)

    @classmethod
    def from_array(cls, data: np.ndarray, labels: List[str], sampling_rate: float, **kwargs) -> "RawSession":
        """ Build a homogeneous session from a channels x samples array. """
        data = np.asarray(data, dtype=np.float64)
        if data.ndim != 2 or data.shape[0] != len(labels):
            raise ShapeError(f"Expected {len(labels)} x samples array, got shape {data.shape}")
        signals = [RawSignal(label=label, sampling_rate=sampling_rate, samples=row) for label, row in zip(labels, data)]
        return cls(signals=signals, **kwargs)
