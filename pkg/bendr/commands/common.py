"""
Helpers shared by the CLI commands: manifest resolution, chunk loading and checkpoints.
"""

from pathlib import Path
from typing import List, Optional, Tuple

from bendr.app.config import RunConfig, settings
from bendr.app.core.exceptions import CheckpointError, ConfigError
from bendr.app.core.ingest.chunking import ChunkPrefetcher
from bendr.app.core.logger import get_logger
from bendr.app.core.model import Checkpoint, load_checkpoint
from bendr.app.core.preprocess import DatasetManifest, StandardizedSequence


logger = get_logger(__name__)


def out_dir(config: RunConfig) -> Path:
    path = Path(config.paths.out)
    path.mkdir(parents=True, exist_ok=True)
    return path


def manifest_path(config: RunConfig) -> Path:
    """ `paths.manifest` as given, or relative to the output directory when only found there. """
    path = Path(config.paths.manifest)
    if not path.is_absolute() and not path.exists():
        path = Path(config.paths.out) / path
    return path


def load_manifest_sequences(config: RunConfig) -> Tuple[DatasetManifest, List[StandardizedSequence]]:
    """
    Read the manifest of a preprocessing run and every chunk it lists.

    Chunk paths in the manifest are relative to the manifest's directory.

    Raises:
        ConfigError: If the manifest is missing, tampered with, or lists no chunks.
    """
    path = manifest_path(config)
    manifest = DatasetManifest.load(path)
    if manifest.chunk_count == 0:
        raise ConfigError(f"Manifest '{path}' lists no chunks")

    metadata = {}
    for session in manifest.sessions:
        labels = session.labels or [None] * len(session.chunks)
        for chunk, label in zip(session.chunks, labels):
            metadata[(path.parent / chunk).resolve()] = (session, label)

    sequences = []
    for chunk_path, data in ChunkPrefetcher(list(metadata), workers=settings.workers):
        session, label = metadata[Path(chunk_path).resolve()]
        sequences.append(StandardizedSequence(data=data, dataset=manifest.dataset, subject=session.subject,
                                              dataset_range=manifest.dataset_range, session_id=session.session_id,
                                              label=label))
    logger.info(f"Loaded {len(sequences)} sequences of {len(manifest.subjects())} subjects from '{path}'")
    return manifest, sequences


def load_checkpoint_arg(config: RunConfig, required: bool = True) -> Optional[Checkpoint]:
    """
    Load `paths.checkpoint`.

    Raises:
        CheckpointError: If a checkpoint is required but not configured, or cannot be read.
    """
    if not config.paths.checkpoint:
        if required:
            raise CheckpointError(f"Command '{config.command}' needs a checkpoint (--checkpoint)")
        return None
    path = Path(config.paths.checkpoint)
    if not path.is_file():
        raise CheckpointError(f"Checkpoint '{path}' not found")
    logger.info(f"Loading checkpoint '{path}'")
    return load_checkpoint(path)
