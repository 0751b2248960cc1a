"""
Synthetic EEG sessions with class-conditional spectral signatures.

A session is a sum of:
    - background sinusoids present for the whole recording,
    - 1/f ("pink") noise scaled by `noise_level`,
    - class sinusoids added only inside the trial windows of their class.

Every trial onset is recorded as an `Annotation` carrying the class label, so the same
session feeds both pretraining (labels ignored) and fine-tuning (labels cut out with
`extract_trials`).

Example:
    .. code-block:: python

        spec = SyntheticSpec(duration_s=300, classes={
            "left": [Component(frequency=10.0, amplitude=20.0)],
            "right": [Component(frequency=22.0, amplitude=20.0)],
        })
        session = generate_synthetic_session(spec, seed=0)
"""

from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
import tomlkit
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator
from tomlkit.exceptions import ParseError as TomlParseError

from bendr.app.core.exceptions import ConfigError, ShapeError
from bendr.app.core.ingest.session import UI_10_20_CHANNELS, Annotation, RawSession, RawSignal
from bendr.app.core.logger import get_logger


logger = get_logger(__name__)


class Component(BaseModel):
    """
    A sinusoid added to some or all channels.

    Attributes:
        frequency (float): Frequency in Hz.
        amplitude (float): Peak amplitude in µV.
        channels (Optional[List[str]]): Channels carrying the component; all channels when None.
    """

    model_config = ConfigDict(extra="forbid")

    frequency: float = Field(gt=0)
    amplitude: float = Field(ge=0)
    channels: Optional[List[str]] = None


class SyntheticSpec(BaseModel):
    """
    Recipe of a synthetic session.

    Attributes:
        channels (List[str]): Channel labels (10/20 names).
        sampling_rate (float): Sampling rate in Hz.
        duration_s (float): Session length in seconds.
        classes (Dict[str, List[Component]]): Components active during trials of each class.
        background (List[Component]): Components active for the whole session.
        noise_level (float): Standard deviation of the 1/f noise in µV.
        trial_length_s (float): Length of one trial.
        interval_s (float): Gap before each trial.
        subject (str): Subject identifier.
        subject_jitter (float): Relative spread of the per-subject amplitude gain.
    """

    model_config = ConfigDict(extra="forbid")

    channels: List[str] = Field(default_factory=lambda: list(UI_10_20_CHANNELS))
    sampling_rate: float = Field(default=256.0, gt=0)
    duration_s: float = Field(default=300.0, gt=0)
    classes: Dict[str, List[Component]] = Field(default_factory=dict)
    background: List[Component] = Field(default_factory=list)
    noise_level: float = Field(default=10.0, ge=0)
    trial_length_s: float = Field(default=4.0, gt=0)
    interval_s: float = Field(default=2.0, ge=0)
    subject: str = "S01"
    subject_jitter: float = Field(default=0.0, ge=0)

    @field_validator("channels")
    @classmethod
    def check_channels(cls, v):
        if not v:
            raise ValueError("a synthetic session needs at least one channel")
        if len(set(v)) != len(v):
            raise ValueError(f"duplicate channel labels in {v}")
        return v

    @classmethod
    def from_toml(cls, text: str) -> "SyntheticSpec":
        """ Build a spec from TOML text; errors become `ConfigError`. """
        try:
            return cls.model_validate(tomlkit.parse(text).unwrap())
        except (ValidationError, TomlParseError) as err:
            raise ConfigError(f"Invalid synthetic session spec: {err}") from err

    @classmethod
    def load(cls, path: Union[str, Path]) -> "SyntheticSpec":
        path = Path(path)
        if not path.is_file():
            raise ConfigError(f"Synthetic session spec {path} does not exist")
        return cls.from_toml(path.read_text())

    def to_toml(self) -> str:
        return tomlkit.dumps(self.model_dump(exclude_none=True))


def pink_noise(shape: Tuple[int, int], rate: float, rng: np.random.Generator) -> np.ndarray:
    """ Unit-variance noise with a 1/f power spectrum along the last axis; DC removed. """
    channels, n = shape
    if n < 2:
        return np.zeros(shape)
    spectrum = np.fft.rfft(rng.standard_normal(shape), axis=-1)
    freqs = np.fft.rfftfreq(n, d=1.0 / rate)
    scale = np.zeros_like(freqs)
    scale[1:] = 1.0 / np.sqrt(freqs[1:])
    noise = np.fft.irfft(spectrum * scale, n=n, axis=-1)
    std = noise.std(axis=-1, keepdims=True)
    return noise / np.where(std > 0, std, 1.0)


def _add_component(data: np.ndarray, component: Component, channels: List[str], t: np.ndarray,
                   rng: np.random.Generator, gain: float, span: slice = slice(None)) -> None:
    targets = component.channels if component.channels is not None else channels
    unknown = sorted(set(targets) - set(channels))
    if unknown:
        raise ValueError(f"Component at {component.frequency} Hz names unknown channels {unknown}")
    for label in targets:
        phase = rng.uniform(0.0, 2.0 * np.pi)
        data[channels.index(label), span] += gain * component.amplitude * np.sin(2.0 * np.pi * component.frequency * t[span] + phase)


def trial_onsets(spec: SyntheticSpec) -> List[float]:
    """ Trial onsets in seconds: every trial is preceded by `interval_s` and must end inside the session. """
    period = spec.trial_length_s + spec.interval_s
    count = int(np.floor((spec.duration_s + 1e-9) / period)) if spec.classes else 0
    return [i * period + spec.interval_s for i in range(count)]


def generate_synthetic_session(spec: SyntheticSpec, seed: int) -> RawSession:
    """
    Generate a session from `spec`.

    Args:
        spec (SyntheticSpec): Recipe.
        seed (int): Seed; identical seeds yield identical sessions.

    Returns:
        RawSession: µV signals with one annotation per trial.

    Raises:
        ValueError: If the spec has no channels or a component names an unknown channel.
    """
    if not spec.channels:
        raise ValueError("a synthetic session needs at least one channel")
    rng = np.random.default_rng(seed)
    n = int(round(spec.duration_s * spec.sampling_rate))
    t = np.arange(n) / spec.sampling_rate
    gain = max(1.0 + spec.subject_jitter * rng.standard_normal(), 0.1)

    data = spec.noise_level * pink_noise((len(spec.channels), n), spec.sampling_rate, rng)
    for component in spec.background:
        _add_component(data, component, spec.channels, t, rng, gain)

    annotations = []
    onsets = trial_onsets(spec)
    labels = sorted(spec.classes)
    if onsets:
        order = rng.permutation(np.resize(np.arange(len(labels)), len(onsets)))
        trial_samples = int(round(spec.trial_length_s * spec.sampling_rate))
        for onset, class_index in zip(onsets, order):
            start = int(round(onset * spec.sampling_rate))
            span = slice(start, min(start + trial_samples, n))
            label = labels[class_index]
            for component in spec.classes[label]:
                _add_component(data, component, spec.channels, t, rng, gain, span)
            annotations.append(Annotation(onset=onset, label=label, duration=spec.trial_length_s))

    signals = [RawSignal(label=label, sampling_rate=spec.sampling_rate, samples=row) for label, row in zip(spec.channels, data)]
    logger.debug(f"Generated synthetic session for subject {spec.subject}: {n} samples, {len(annotations)} trials")
    return RawSession(signals=signals, annotations=annotations, subject=spec.subject, session_id=f"{spec.subject}-{seed}")


def generate_synthetic_dataset(spec: SyntheticSpec, subjects: int, seed: int,
                               sessions_per_subject: int = 1) -> List[RawSession]:
    """
    Generate sessions for `subjects` subjects, named S01, S02, ...

    Every session has its own seed derived from `seed`, so subjects differ in noise, phases
    and (with `subject_jitter`) amplitude gain.
    """
    seeds = np.random.SeedSequence(seed).spawn(subjects * sessions_per_subject)
    sessions = []
    for s in range(subjects):
        subject_spec = spec.model_copy(update={"subject": f"S{s + 1:02d}"})
        for k in range(sessions_per_subject):
            child = seeds[s * sessions_per_subject + k]
            session = generate_synthetic_session(subject_spec, seed=int(child.generate_state(1)[0]))
            session.session_id = f"S{s + 1:02d}-{k}"
            sessions.append(session)
    return sessions


@dataclass
class Trials:
    """
    Event-locked trials cut from one recording.

    Attributes:
        data (np.ndarray): Trials x channels x samples.
        labels (List[str]): Class label of each trial.
        subject (str): Subject identifier.
        onsets (List[float]): Event onsets in seconds.
    """

    data: np.ndarray
    labels: List[str]
    subject: str = ""
    onsets: Optional[List[float]] = None

    def __len__(self) -> int:
        return len(self.labels)


def cut_trials(data: np.ndarray, rate: float, annotations: Sequence[Annotation], window: Tuple[float, float],
               subject: str = "", classes: Optional[Sequence[str]] = None) -> Trials:
    """
    Cut fixed-length windows around annotated events from a channels x samples array.

    Args:
        data (np.ndarray): Channels x samples.
        rate (float): Sampling rate of `data`.
        annotations (Sequence[Annotation]): Events.
        window (Tuple[float, float]): (start relative to the event, length) in seconds.
        subject (str): Subject identifier.
        classes (Optional[Sequence[str]]): Labels to keep; all labels when None.

    Returns:
        Trials: Windows fully inside the recording; events whose window overflows are skipped.
    """
    data = np.asarray(data, dtype=np.float64)
    if data.ndim != 2:
        raise ShapeError(f"cut_trials expects channels x samples, got shape {data.shape}")
    start_s, length_s = window
    length = int(round(length_s * rate))
    windows, labels, onsets = [], [], []
    for a in annotations:
        if classes is not None and a.label not in classes:
            continue
        start = int(round((a.onset + start_s) * rate))
        if start < 0 or start + length > data.shape[1]:
            logger.debug(f"Skipping event '{a.label}' at {a.onset} s: window leaves the recording")
            continue
        windows.append(data[:, start:start + length])
        labels.append(a.label)
        onsets.append(a.onset)
    stacked = np.stack(windows) if windows else np.zeros((0, data.shape[0], length))
    return Trials(data=stacked, labels=labels, subject=subject, onsets=onsets)


def extract_trials(session: RawSession, window: Tuple[float, float], classes: Optional[Sequence[str]] = None) -> Trials:
    """ Cut event-locked trials from a homogeneous session using its annotations. """
    return cut_trials(session.signals_array, session.sampling_rate, session.annotations, window,
                      subject=session.subject, classes=classes)
