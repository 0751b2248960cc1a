"""
Preprocessing pipeline from a `RawSession` to `StandardizedSequence` objects.

Per signal:
    1. the optional accept/reject hook,
    2. the anti-alias low-pass for rates above `lowpass_above_hz`,
    3. resampling to the target rate,
then, per session:
    4. channel mapping onto the 19 targets,
    5. chunking into fixed windows (or cutting event-locked trials),
    6. scaling with the dataset range and the amplitude channel.

The dataset range must come from a complete first pass (`compute_dataset_range`) over the
prepared sessions before any sequence of that dataset is scaled.
"""

from dataclasses import dataclass, field
from typing import Iterable, List, Optional, Sequence, Tuple

import numpy as np

from bendr.app.config import PreprocessConfig
from bendr.app.core.exceptions import ShapeError
from bendr.app.core.ingest.chunking import chunk_array
from bendr.app.core.ingest.edf import SignalFilter
from bendr.app.core.ingest.session import Annotation, RawSession
from bendr.app.core.ingest.synthetic import cut_trials
from bendr.app.core.logger import get_logger
from bendr.app.core.preprocess.channels import MISSING, ChannelMap, map_labels
from bendr.app.core.preprocess.scaling import StandardizedSequence, scale_sequence
from bendr.app.core.preprocess.signal import lowpass, resample


logger = get_logger(__name__)


@dataclass
class PreparedSession:
    """
    A session at the target rate in the global channel order, not yet scaled.

    Attributes:
        data (np.ndarray): 19 x N in µV; missing targets are zero rows.
        channel_map (ChannelMap): Target assignment.
        native_rates (dict): Native rate of every mapped source channel.
        subject (str): Subject identifier.
        session_id (str): Session identifier.
        annotations (List[Annotation]): Events of the source session.
    """

    data: np.ndarray
    channel_map: ChannelMap
    native_rates: dict
    subject: str = ""
    session_id: str = ""
    annotations: List[Annotation] = field(default_factory=list)

    @property
    def present(self) -> np.ndarray:
        return self.channel_map.present

    def value_range(self) -> Optional[Tuple[float, float]]:
        """ (min, max) over recorded channels, or None when nothing is recorded. """
        if not self.present.any() or self.data.shape[1] == 0:
            return None
        values = self.data[self.present]
        return float(values.min()), float(values.max())


def prepare_session(session: RawSession, config: PreprocessConfig,
                    signal_filter: Optional[SignalFilter] = None) -> PreparedSession:
    """
    Filter, resample and map the channels of one session.

    Args:
        session (RawSession): Parsed session, signals at native rates.
        config (PreprocessConfig): Preprocessing options.
        signal_filter (Optional[SignalFilter]): Per-signal accept/reject hook.

    Returns:
        PreparedSession: Target-rate data in the global channel order.
    """
    signals = [s for s in session.signals if signal_filter is None or signal_filter(s)]
    channel_map = map_labels([s.label for s in signals])

    rows = {}
    native_rates = {}
    for target, source in zip(channel_map.targets, channel_map.assignment):
        if source == MISSING:
            continue
        signal = signals[source]
        samples = signal.samples
        if signal.sampling_rate > config.lowpass_above_hz:
            samples = lowpass(samples, config.lowpass_hz, signal.sampling_rate)
        rows[target] = resample(samples, signal.sampling_rate, config.target_rate)
        native_rates[target] = float(signal.sampling_rate)

    length = min((len(r) for r in rows.values()), default=0)
    if rows and len({len(r) for r in rows.values()}) > 1:
        logger.debug(f"Session {session.session_id}: trimming resampled channels to {length} samples")
    data = np.zeros((len(channel_map.targets), length))
    for i, target in enumerate(channel_map.targets):
        if target in rows:
            data[i] = rows[target][:length]
    if channel_map.missing:
        logger.debug(f"Session {session.session_id}: missing channels {channel_map.missing}")
    return PreparedSession(data=data, channel_map=channel_map, native_rates=native_rates, subject=session.subject,
                           session_id=session.session_id, annotations=list(session.annotations))


def compute_dataset_range(sessions: Iterable[PreparedSession]) -> float:
    """
    max(S_ds) - min(S_ds) over every recorded sample of the dataset.

    Raises:
        ValueError: If the dataset holds no recorded samples or all of them are equal.
    """
    low, high = np.inf, -np.inf
    for prepared in sessions:
        extremes = prepared.value_range()
        if extremes is None:
            continue
        low, high = min(low, extremes[0]), max(high, extremes[1])
    if not np.isfinite(low) or high <= low:
        raise ValueError("Dataset range is undefined: no recorded samples or all samples equal")
    return float(high - low)


def standardize_session(prepared: PreparedSession, dataset_range: float, config: PreprocessConfig,
                        window_s: Optional[float] = None) -> List[StandardizedSequence]:
    """
    Chunk a prepared session into windows and scale each of them.

    Args:
        prepared (PreparedSession): Output of `prepare_session`.
        dataset_range (float): Range from `compute_dataset_range`.
        config (PreprocessConfig): Window, stride and scale mode.
        window_s (Optional[float]): Window override (e.g. a pretraining sequence length).

    Returns:
        List[StandardizedSequence]: 20 x W sequences; the trailing remainder is dropped.
    """
    window_s = window_s or config.window_s
    stride_s = config.stride_s if window_s == config.window_s else window_s
    chunks = chunk_array(prepared.data, config.target_rate, window_s, stride_s)
    return [scale_sequence(chunk, dataset_range, prepared.present, mode=config.scale_mode, dataset=config.dataset,
                           subject=prepared.subject, session_id=prepared.session_id) for chunk in chunks]


def standardize_trials(prepared: PreparedSession, dataset_range: float, config: PreprocessConfig,
                       window: Tuple[float, float], classes: Optional[Sequence[str]] = None) -> List[StandardizedSequence]:
    """
    Cut event-locked trials from a prepared session and scale each of them.

    Args:
        prepared (PreparedSession): Output of `prepare_session`.
        dataset_range (float): Range from `compute_dataset_range`.
        config (PreprocessConfig): Scale mode and target rate.
        window (Tuple[float, float]): (start relative to the event, length) in seconds.
        classes (Optional[Sequence[str]]): Labels to keep.

    Returns:
        List[StandardizedSequence]: One labelled sequence per trial.
    """
    if prepared.data.shape[1] == 0:
        raise ShapeError(f"Session {prepared.session_id} has no samples")
    trials = cut_trials(prepared.data, config.target_rate, prepared.annotations, window,
                        subject=prepared.subject, classes=classes)
    return [scale_sequence(x, dataset_range, prepared.present, mode=config.scale_mode, dataset=config.dataset,
                           subject=prepared.subject, session_id=prepared.session_id, label=label)
            for x, label in zip(trials.data, trials.labels)]
