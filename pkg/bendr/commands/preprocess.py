"""
Preprocess command.

Two passes over the sessions under `paths.data_dir`:
  1. load, filter, resample and map every session, then compute the dataset range;
  2. chunk (or, for a named downstream dataset, cut event-locked trials), scale, and
     write every sequence to `<out>/<chunk_dir>/`, followed by `<out>/<manifest>`.

Usage:
    bendr preprocess --config run.toml
"""

from pathlib import Path
from typing import List, Optional

from bendr.app.config import RunConfig, settings
from bendr.app.core.exceptions import ConfigError
from bendr.app.core.ingest import get_dataset, load_session_source, load_sessions, save_chunk
from bendr.app.core.ingest.datasets import DatasetDescriptor
from bendr.app.core.logger import get_logger
from bendr.app.core.preprocess import (
    DatasetManifest, ManifestSession, PreparedSession, StandardizedSequence, compute_dataset_range, prepare_session,
    standardize_session, standardize_trials,
)
from bendr.commands.common import out_dir


logger = get_logger("preprocess")


def _descriptor(name: str) -> Optional[DatasetDescriptor]:
    try:
        return get_dataset(name)
    except KeyError:
        return None


def _sequences(prepared: PreparedSession, dataset_range: float, config: RunConfig,
               descriptor: Optional[DatasetDescriptor]) -> List[StandardizedSequence]:
    if descriptor is None:
        return standardize_session(prepared, dataset_range, config.preprocess)
    return standardize_trials(prepared, dataset_range, config.preprocess, descriptor.trial_window)


def main(config: RunConfig) -> DatasetManifest:
    cfg = config.preprocess
    if not config.paths.data_dir:
        raise ConfigError("preprocess needs paths.data_dir")
    data_dir = Path(config.paths.data_dir)
    if not data_dir.is_dir():
        raise ConfigError(f"Data directory '{data_dir}' not found")

    source = load_session_source(settings.session_source, reject_nyquist_violations=cfg.reject_nyquist_violations)
    ready, reason = source.is_ready(data_dir)
    if not ready:
        raise ConfigError(reason)
    report = load_sessions(source, data_dir, workers=settings.workers)
    if not report.sessions:
        raise ConfigError(f"No session under '{data_dir}' could be loaded")
    if report.failures:
        logger.warning(f"{len(report.failures)} files failed to load and were skipped")

    prepared = [prepare_session(session, cfg) for session in report.sessions]
    dataset_range = compute_dataset_range(prepared)
    logger.info(f"Dataset '{cfg.dataset}': {len(prepared)} sessions, range {dataset_range:.3f} µV")

    descriptor = _descriptor(cfg.dataset)
    root = out_dir(config)
    chunk_dir = root / config.paths.chunk_dir
    manifest = DatasetManifest(dataset=cfg.dataset, dataset_range=dataset_range, target_rate=cfg.target_rate,
                               scale_mode=cfg.scale_mode,
                               window_s=descriptor.trial_window[1] if descriptor else cfg.window_s,
                               stride_s=descriptor.trial_window[1] if descriptor else cfg.stride_s)
    for session in prepared:
        sequences = _sequences(session, dataset_range, config, descriptor)
        stem = session.session_id.replace("/", "_").replace("\\", "_")
        entry = ManifestSession(session_id=session.session_id, subject=session.subject,
                                native_rates=session.native_rates, channels=session.channel_map.as_dict())
        for i, sequence in enumerate(sequences):
            name = f"{stem}_{i:04d}.bin"
            save_chunk(chunk_dir / name, sequence.data)
            entry.chunks.append(f"{config.paths.chunk_dir}/{name}")
            if sequence.label is not None:
                entry.labels.append(sequence.label)
        if not sequences:
            logger.warning(f"Session {session.session_id} yielded no sequences")
        manifest.sessions.append(entry)

    path = manifest.save(root / config.paths.manifest)
    logger.info(f"Wrote {manifest.chunk_count} chunks and manifest '{path}' (hash {manifest.content_hash[:12]})")
    return manifest
