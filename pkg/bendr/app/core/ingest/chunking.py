"""
Fixed-length sequence extraction and the on-disk chunk cache.

Chunk cache layout (all integers little-endian):

    offset  size        field
    0       8           magic b"BNDRCHNK"
    8       2           uint16 format version (1)
    10      2           uint16 ndim
    12      4 * ndim    uint32 extents
    ...     8 * prod    float64 payload, C order
"""

from collections import deque
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import Deque, Iterator, List, Sequence, Tuple, Union

import numpy as np

from bendr.app.core.exceptions import ShapeError
from bendr.app.core.ingest.session import RawSession
from bendr.app.core.logger import get_logger


logger = get_logger(__name__)

CHUNK_MAGIC = b"BNDRCHNK"
CHUNK_VERSION = 1
CHUNK_SUFFIX = ".bin"


def window_count(n_samples: int, window: int, stride: int) -> int:
    """ Number of windows of `window` samples taken every `stride` samples; the remainder is dropped. """
    if window <= 0 or stride <= 0:
        raise ValueError(f"window and stride must be positive, got {window} and {stride}")
    if n_samples < window:
        return 0
    return (n_samples - window) // stride + 1


def chunk_array(data: np.ndarray, rate: float, window_s: float, stride_s: float) -> List[np.ndarray]:
    """
    Slice a channels x samples array into windows.

    Args:
        data (np.ndarray): Channels x samples.
        rate (float): Sampling rate in Hz.
        window_s (float): Window length in seconds.
        stride_s (float): Step between window starts in seconds.

    Returns:
        List[np.ndarray]: Copies of each `channels x round(window_s * rate)` window.
    """
    data = np.asarray(data)
    if data.ndim != 2:
        raise ShapeError(f"chunk_array expects channels x samples, got shape {data.shape}")
    window = int(round(window_s * rate))
    stride = int(round(stride_s * rate))
    count = window_count(data.shape[1], window, stride)
    return [data[:, i * stride:i * stride + window].copy() for i in range(count)]


def chunk_sequence(session: RawSession, window_s: float, stride_s: float) -> List[np.ndarray]:
    """ Slice a homogeneous session into fixed-length windows. """
    return chunk_array(session.signals_array, session.sampling_rate, window_s, stride_s)


def encode_chunk(array: np.ndarray) -> bytes:
    """ Serialize an array to the chunk cache layout. """
    array = np.ascontiguousarray(array, dtype="<f8")
    if array.ndim > np.iinfo(np.uint16).max:
        raise ShapeError(f"Chunk rank {array.ndim} exceeds the format limit")
    head = np.array([CHUNK_VERSION, array.ndim], dtype="<u2").tobytes()
    extents = np.array(array.shape, dtype="<u4").tobytes()
    return CHUNK_MAGIC + head + extents + array.tobytes()


def decode_chunk(data: bytes) -> np.ndarray:
    """
    Parse the chunk cache layout.

    Raises:
        ShapeError: On a bad magic, an unsupported version, or a payload of the wrong size.
    """
    if data[:8] != CHUNK_MAGIC:
        raise ShapeError("Not a chunk file: bad magic")
    if len(data) < 12:
        raise ShapeError("Truncated chunk header")
    version, ndim = np.frombuffer(data, dtype="<u2", count=2, offset=8)
    if version != CHUNK_VERSION:
        raise ShapeError(f"Unsupported chunk format version {version}")
    if len(data) < 12 + 4 * int(ndim):
        raise ShapeError("Truncated chunk header")
    shape = tuple(int(e) for e in np.frombuffer(data, dtype="<u4", count=int(ndim), offset=12))
    offset = 12 + 4 * int(ndim)
    expected = 8 * int(np.prod(shape, dtype=np.int64))
    if len(data) - offset != expected:
        raise ShapeError(f"Chunk payload has {len(data) - offset} bytes, expected {expected} for shape {shape}")
    return np.frombuffer(data, dtype="<f8", offset=offset).reshape(shape).astype(np.float64)


def save_chunk(path: Union[str, Path], array: np.ndarray) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_bytes(encode_chunk(array))
    return path


def load_chunk(path: Union[str, Path]) -> np.ndarray:
    return decode_chunk(Path(path).read_bytes())


def list_chunks(directory: Union[str, Path]) -> List[Path]:
    """ Chunk files of a cache directory in name order. """
    return sorted(Path(directory).glob(f"*{CHUNK_SUFFIX}"))


class ChunkPrefetcher:
    """
    Iterate over cached chunks while the next ones are read on worker threads.

    At most `depth` reads are in flight. Yielded arrays are read-only so the consumer can
    neither corrupt a shared buffer nor rely on mutating it.

    Example:
        .. code-block:: python

            for path, chunk in ChunkPrefetcher(list_chunks("cache/chunks"), workers=2):
                ...
    """

    def __init__(self, paths: Sequence[Union[str, Path]], workers: int = 2, depth: int = 4):
        if workers < 1 or depth < 1:
            raise ValueError(f"workers and depth must be positive, got {workers} and {depth}")
        self.paths = [Path(p) for p in paths]
        self.workers = workers
        self.depth = depth

    def __len__(self) -> int:
        return len(self.paths)

    @staticmethod
    def _read(path: Path) -> np.ndarray:
        array = load_chunk(path)
        array.setflags(write=False)
        return array

    def __iter__(self) -> Iterator[Tuple[Path, np.ndarray]]:
        with ThreadPoolExecutor(max_workers=self.workers, thread_name_prefix="chunk-prefetch") as pool:
            pending: Deque = deque()
            remaining = iter(self.paths)
            for path in remaining:
                pending.append((path, pool.submit(self._read, path)))
                if len(pending) >= self.depth:
                    break
            while pending:
                path, future = pending.popleft()
                nxt = next(remaining, None)
                if nxt is not None:
                    pending.append((nxt, pool.submit(self._read, nxt)))
                yield path, future.result()
