"""
European Data Format (EDF) reader and writer.

Layout handled here:
    - a 256-byte ASCII recording header,
    - `ns` per-signal headers of 256 bytes each, stored field-by-field (all labels, then
      all transducers, ...),
    - data records of 16-bit little-endian two's-complement samples, signal after signal.

Digital samples map to physical values through the per-signal affine map
`pmin + (d - dmin) * (pmax - pmin) / (dmax - dmin)`. An "EDF Annotations" signal (EDF+)
is decoded into `Annotation` events and excluded from the data signals.

`write_edf` is the inverse of `parse_edf`: parsing a file the writer produced and writing
it again yields the identical byte string.
"""

import math
import re
from pathlib import Path
from typing import Callable, Dict, List, Optional, Tuple, Union

import numpy as np

from bendr.app.core.exceptions import EdfParseError, ShapeError
from bendr.app.core.ingest.session import ANNOTATION_LABEL, Annotation, RawSession, RawSignal, RecordingHeader
from bendr.app.core.logger import get_logger


logger = get_logger(__name__)

HEADER_BYTES = 256
SIGNAL_HEADER_BYTES = 256

# (field name, width) of the recording header, in file order
_RECORD_FIELDS = [
    ("version", 8), ("patient_id", 80), ("recording_id", 80), ("start_date", 8), ("start_time", 8),
    ("header_bytes", 8), ("reserved", 44), ("n_records", 8), ("record_duration", 8), ("ns", 4),
]

# (field name, width) of the per-signal headers, in file order
_SIGNAL_FIELDS = [
    ("label", 16), ("transducer", 80), ("units", 8), ("physical_min", 8), ("physical_max", 8),
    ("digital_min", 8), ("digital_max", 8), ("prefilter", 80), ("samples_per_record", 8), ("reserved", 32),
]

SignalFilter = Callable[[RawSignal], bool]

_TAL_SEPARATOR = "\x14"
_TAL_DURATION = "\x15"


def header_size(ns: int) -> int:
    """ Size in bytes of the header region for `ns` signals. """
    return HEADER_BYTES + ns * SIGNAL_HEADER_BYTES


class _Reader:
    """ Cursor over the raw bytes that reports offsets in its errors. """

    def __init__(self, data: bytes):
        self.data = data
        self.offset = 0

    def text(self, width: int, what: str) -> str:
        if self.offset + width > len(self.data):
            raise EdfParseError(f"Truncated header while reading {what}", self.offset)
        chunk = self.data[self.offset:self.offset + width]
        self.offset += width
        return chunk.decode("latin-1").strip()

    def number(self, width: int, what: str, kind: type = float):
        start = self.offset
        raw = self.text(width, what)
        try:
            value = float(raw)
        except ValueError:
            raise EdfParseError(f"Non-numeric value '{raw}' in header field {what}", start) from None
        if kind is int:
            if not value.is_integer():
                raise EdfParseError(f"Non-integer value '{raw}' in header field {what}", start)
            return int(value)
        return value


def _parse_tals(raw: bytes, offset: int = 0) -> List[Tuple[float, float, List[str]]]:
    """
    Decode the time-stamped annotation lists of one record.

    Raises:
        EdfParseError: If an onset or duration is not a number; `offset` is the byte offset of `raw`.
    """
    tals = []
    position = offset
    for chunk in raw.decode("latin-1").split("\x00"):
        start, position = position, position + len(chunk) + 1
        if not chunk:
            continue
        parts = chunk.split(_TAL_SEPARATOR)
        timing = parts[0].split(_TAL_DURATION)
        try:
            onset = float(timing[0])
            duration = float(timing[1]) if len(timing) > 1 and timing[1] else 0.0
        except ValueError:
            raise EdfParseError(f"Malformed annotation timing '{parts[0]}'", start) from None
        tals.append((onset, duration, parts[1:-1] if len(parts) > 1 else []))
    return tals


def parse_edf(data: bytes, signal_filter: Optional[SignalFilter] = None) -> RawSession:
    """
    Parse an EDF byte string.

    Args:
        data (bytes): Complete file contents.
        signal_filter (Optional[SignalFilter]): Per-signal accept/reject hook; rejected signals
            are left out of the session.

    Returns:
        RawSession: Signals in physical units with annotations decoded.

    Raises:
        EdfParseError: On truncated headers or records, non-numeric header fields or annotation
            timings, or signals with `digital_min == digital_max`. The message carries the byte offset.
    """
    reader = _Reader(data)
    header: Dict[str, object] = {}
    for name, width in _RECORD_FIELDS:
        if name in ("header_bytes", "n_records", "ns"):
            header[name] = reader.number(width, name, int)
        elif name == "record_duration":
            header[name] = reader.number(width, name)
        else:
            header[name] = reader.text(width, name)

    ns = header["ns"]
    if ns < 0:
        raise EdfParseError(f"Negative signal count {ns}", HEADER_BYTES - 4)
    expected_header = header_size(ns)
    if header["header_bytes"] != expected_header:
        raise EdfParseError(f"Header size field {header['header_bytes']} does not match {expected_header} "
                            f"for {ns} signals", 184)

    signal_headers: List[Dict[str, object]] = [{} for _ in range(ns)]
    digital_min_offsets = []
    for name, width in _SIGNAL_FIELDS:
        for i in range(ns):
            if name == "digital_min":
                digital_min_offsets.append(reader.offset)
            if name in ("digital_min", "digital_max", "samples_per_record"):
                signal_headers[i][name] = reader.number(width, f"{name}[{i}]", int)
            elif name in ("physical_min", "physical_max"):
                signal_headers[i][name] = reader.number(width, f"{name}[{i}]")
            else:
                signal_headers[i][name] = reader.text(width, f"{name}[{i}]")

    for i, sh in enumerate(signal_headers):
        if sh["digital_min"] == sh["digital_max"]:
            raise EdfParseError(f"Signal {i} ('{sh['label']}') has digital_min == digital_max", digital_min_offsets[i])

    samples_per_record = [sh["samples_per_record"] for sh in signal_headers]
    record_bytes = 2 * sum(samples_per_record)
    payload = len(data) - expected_header
    n_records = header["n_records"]
    if n_records < 0:
        n_records = payload // record_bytes if record_bytes else 0
    if record_bytes * n_records > payload:
        complete = payload // record_bytes if record_bytes else 0
        raise EdfParseError(f"Truncated data: header declares {n_records} records but only {complete} are complete",
                            expected_header + complete * record_bytes)

    records = np.frombuffer(data, dtype="<i2", count=n_records * record_bytes // 2, offset=expected_header)
    records = records.reshape(n_records, record_bytes // 2) if n_records else records.reshape(0, record_bytes // 2)
    bounds = np.concatenate([[0], np.cumsum(samples_per_record)])

    record_duration = header["record_duration"]
    signals: List[RawSignal] = []
    annotations: List[Annotation] = []
    for i, sh in enumerate(signal_headers):
        digital = records[:, bounds[i]:bounds[i + 1]].reshape(-1)
        if sh["label"] == ANNOTATION_LABEL:
            for r in range(n_records):
                raw = records[r, bounds[i]:bounds[i + 1]].tobytes()
                offset = expected_header + r * record_bytes + 2 * int(bounds[i])
                for index, (onset, duration, labels) in enumerate(_parse_tals(raw, offset)):
                    if index == 0 and not any(labels):
                        continue    # time-keeping TAL of the record
                    annotations.extend(Annotation(onset=onset, label=label, duration=duration) for label in labels)
            continue

        pmin, pmax = sh["physical_min"], sh["physical_max"]
        dmin, dmax = sh["digital_min"], sh["digital_max"]
        physical = pmin + (digital.astype(np.float64) - dmin) * (pmax - pmin) / (dmax - dmin)
        rate = sh["samples_per_record"] / record_duration if record_duration > 0 else float(sh["samples_per_record"])
        signal = RawSignal(label=sh["label"], sampling_rate=rate, samples=physical, units=sh["units"],
                           transducer=sh["transducer"], prefilter=sh["prefilter"], physical_min=pmin,
                           physical_max=pmax, digital_min=dmin, digital_max=dmax)
        if signal_filter is not None and not signal_filter(signal):
            logger.info(f"Signal '{signal.label}' rejected by signal filter")
            continue
        signals.append(signal)

    recording = RecordingHeader(patient_id=header["patient_id"], recording_id=header["recording_id"],
                                start_date=header["start_date"], start_time=header["start_time"],
                                reserved=header["reserved"], record_duration=record_duration)
    annotations.sort(key=lambda a: a.onset)
    return RawSession(signals=signals, annotations=annotations, header=recording)


def read_edf(path: Union[str, Path], signal_filter: Optional[SignalFilter] = None, subject: str = "") -> RawSession:
    """
    Read and parse an EDF file.

    Args:
        path (Union[str, Path]): File path.
        signal_filter (Optional[SignalFilter]): Per-signal accept/reject hook.
        subject (str): Subject identifier to attach to the session.

    Returns:
        RawSession: The parsed session, with `session_id` set to the file stem.
    """
    path = Path(path)
    session = parse_edf(path.read_bytes(), signal_filter=signal_filter)
    session.session_id = path.stem
    session.subject = subject
    return session


def _format_number(value: float, width: int = 8) -> str:
    """ Shortest text for `value` that fits `width` characters. """
    if float(value).is_integer() and abs(value) < 10 ** (width - 1):
        text = str(int(value))
    else:
        text = repr(float(value))
        if len(text) > width:
            integer_digits = len(str(int(abs(value)))) + (1 if value < 0 else 0)
            text = f"{value:.{max(width - integer_digits - 1, 0)}f}"[:width]
    if len(text) > width:
        raise ShapeError(f"Value {value} cannot be represented in an {width}-character EDF field")
    return text


def _field(text: str, width: int) -> bytes:
    encoded = text.encode("latin-1")
    if len(encoded) > width:
        raise ShapeError(f"EDF header text '{text}' exceeds its {width}-byte field")
    return encoded.ljust(width, b" ")


def _physical_range(signal: RawSignal) -> Tuple[float, float]:
    """ Physical range of a signal, derived from its values when not recorded. """
    if signal.physical_min is not None and signal.physical_max is not None:
        return float(_format_number(signal.physical_min)), float(_format_number(signal.physical_max))
    low = math.floor(signal.samples.min()) if signal.samples.size else 0
    high = math.ceil(signal.samples.max()) if signal.samples.size else 1
    if high <= low:
        high = low + 1
    return float(low), float(high)


def _encode_annotations(annotations: List[Annotation], n_records: int, record_duration: float) -> List[bytes]:
    """ One TAL byte string per record: the time-keeping TAL plus the events starting in that record. """
    per_record = [[f"{r * record_duration:+}{_TAL_SEPARATOR}{_TAL_SEPARATOR}\x00"] for r in range(n_records)]
    for a in annotations:
        r = min(max(int(a.onset // record_duration), 0), n_records - 1)
        timing = f"{a.onset:+}" + (f"{_TAL_DURATION}{a.duration!r}" if a.duration else "")
        per_record[r].append(f"{timing}{_TAL_SEPARATOR}{a.label}{_TAL_SEPARATOR}\x00")
    return ["".join(parts).encode("latin-1") for parts in per_record]


def write_edf(session: RawSession) -> bytes:
    """
    Serialize a session to EDF bytes.

    Physical values are quantized with each signal's (physical, digital) ranges; when a
    signal carries no physical range, the integer floor/ceil of its values is used. Events
    are written to an "EDF Annotations" signal placed after the data signals.

    Args:
        session (RawSession): Session to serialize.

    Returns:
        bytes: The EDF file contents.

    Raises:
        ShapeError: If a signal does not fill a whole number of records, or a header value
            does not fit its field.
    """
    duration = session.header.record_duration
    counts = []
    for s in session.signals:
        per_record = s.sampling_rate * duration
        if not float(per_record).is_integer() or len(s.samples) % int(per_record):
            raise ShapeError(f"Signal '{s.label}' ({len(s.samples)} samples at {s.sampling_rate} Hz) does not fill "
                             f"whole {duration} s records")
        counts.append(len(s.samples) // int(per_record))
    if len(set(counts)) > 1:
        raise ShapeError(f"Signals span different numbers of records: {counts}")
    n_records = counts[0] if counts else 0

    columns: List[Dict[str, object]] = []
    blocks: List[np.ndarray] = []
    for s in session.signals:
        pmin, pmax = _physical_range(s)
        dmin, dmax = s.digital_min, s.digital_max
        digital = np.round((s.samples - pmin) * (dmax - dmin) / (pmax - pmin) + dmin)
        digital = np.clip(digital, dmin, dmax).astype("<i2")
        spr = int(s.sampling_rate * duration)
        columns.append({"label": s.label, "transducer": s.transducer, "units": s.units,
                        "physical_min": _format_number(pmin), "physical_max": _format_number(pmax),
                        "digital_min": str(dmin), "digital_max": str(dmax), "prefilter": s.prefilter,
                        "samples_per_record": str(spr), "reserved": ""})
        blocks.append(digital.reshape(n_records, spr))

    reserved = session.header.reserved
    if session.annotations:
        tals = _encode_annotations(session.annotations, n_records, duration)
        spr = max((len(t) + 1) // 2 for t in tals)
        raw = np.zeros((n_records, 2 * spr), dtype=np.uint8)
        for r, t in enumerate(tals):
            raw[r, :len(t)] = np.frombuffer(t, dtype=np.uint8)
        blocks.append(raw.view("<i2").reshape(n_records, spr))
        columns.append({"label": ANNOTATION_LABEL, "transducer": "", "units": "", "physical_min": "-1",
                        "physical_max": "1", "digital_min": "-32768", "digital_max": "32767", "prefilter": "",
                        "samples_per_record": str(spr), "reserved": ""})
        reserved = reserved or "EDF+C"

    ns = len(columns)
    head = b"".join([
        _field("0", 8), _field(session.header.patient_id, 80), _field(session.header.recording_id, 80),
        _field(session.header.start_date, 8), _field(session.header.start_time, 8),
        _field(str(header_size(ns)), 8), _field(reserved, 44), _field(str(n_records), 8),
        _field(_format_number(duration), 8), _field(str(ns), 4),
    ])
    signal_head = b"".join(_field(str(col[name]), width) for name, width in _SIGNAL_FIELDS for col in columns)
    body = np.concatenate(blocks, axis=1).astype("<i2").tobytes() if blocks else b""
    return head + signal_head + body


def save_edf(session: RawSession, path: Union[str, Path]) -> Path:
    """ Write a session to an EDF file and return its path. """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_bytes(write_edf(session))
    return path


_LOWPASS = re.compile(r"LP:\s*([0-9.]+)\s*(k?)Hz", re.IGNORECASE)


def accept_all(signal: RawSignal) -> bool:
    """ Default signal filter: keep every signal. """
    return True


def nyquist_prefilter_filter(signal: RawSignal) -> bool:
    """
    Reject signals whose recorded low-pass cutoff is at or above the Nyquist frequency.

    The cutoff is read from the prefilter field ("LP:120Hz", "LP:1kHz"). Signals that do
    not declare a low-pass cutoff are kept.
    """
    match = _LOWPASS.search(signal.prefilter or "")
    if not match:
        return True
    cutoff = float(match.group(1)) * (1000.0 if match.group(2) else 1.0)
    return cutoff < signal.sampling_rate / 2.0
