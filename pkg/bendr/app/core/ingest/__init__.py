"""
Data ingest: EDF parsing, synthetic sessions, dataset descriptors, chunking and session sources.
"""

from bendr.app.core.ingest.session import ANNOTATION_LABEL, UI_10_20_CHANNELS, Annotation, RawSession, RawSignal, RecordingHeader
from bendr.app.core.ingest.datasets import DATASETS, DatasetDescriptor, get_dataset
from bendr.app.core.ingest.edf import accept_all, nyquist_prefilter_filter, parse_edf, read_edf, save_edf, write_edf
from bendr.app.core.ingest.synthetic import (
    Component, SyntheticSpec, Trials, cut_trials, extract_trials,
    generate_synthetic_dataset, generate_synthetic_session,
)
from bendr.app.core.ingest.chunking import (
    ChunkPrefetcher, chunk_array, chunk_sequence, list_chunks, load_chunk, save_chunk, window_count,
)
from bendr.app.core.ingest.sources import (
    EdfSessionSource, SessionRef, SessionSource, SyntheticSessionSource, load_session_source, load_sessions,
)

__all__ = [
    "ANNOTATION_LABEL", "UI_10_20_CHANNELS", "Annotation", "RawSession", "RawSignal", "RecordingHeader",
    "DATASETS", "DatasetDescriptor", "get_dataset",
    "accept_all", "nyquist_prefilter_filter", "parse_edf", "read_edf", "save_edf", "write_edf",
    "Component", "SyntheticSpec", "Trials", "cut_trials", "extract_trials",
    "generate_synthetic_dataset", "generate_synthetic_session",
    "ChunkPrefetcher", "chunk_array", "chunk_sequence", "list_chunks", "load_chunk", "save_chunk", "window_count",
    "EdfSessionSource", "SessionRef", "SessionSource", "SyntheticSessionSource", "load_session_source", "load_sessions",
]
