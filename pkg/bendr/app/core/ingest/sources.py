"""
Session sources: pluggable readers that turn a data directory into `RawSession` objects.

This module defines the abstract base class `SessionSource` and its two built-in
implementations:
    - `EdfSessionSource` (`edf`): reads `*.edf` recordings.
    - `SyntheticSessionSource` (`synthetic`): generates sessions from `*.toml` synthetic specs.

Further sources register under the `bendr.session_sources` entry point group and are
selected by name through `BENDR_SESSION_SOURCE`.

Subject identifiers come from the directory layout: a file at `<root>/<subject>/<file>`
belongs to `<subject>`; a file directly under `<root>` belongs to the subject named by its stem.
"""

from abc import ABC, abstractmethod
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, List, Optional, Tuple, Union

from bendr.app.config import settings
from bendr.app.core.exceptions import BendrError
from bendr.app.core.ingest.edf import SignalFilter, accept_all, nyquist_prefilter_filter, read_edf
from bendr.app.core.ingest.session import RawSession
from bendr.app.core.ingest.synthetic import SyntheticSpec, generate_synthetic_session
from bendr.app.core.logger import get_logger
from bendr.app.core.utils import content_hash, load_plugin


logger = get_logger(__name__)

SESSION_SOURCE_GROUP = "bendr.session_sources"

BUILTIN_SOURCES = {
    "edf": "bendr.app.core.ingest.sources:EdfSessionSource",
    "synthetic": "bendr.app.core.ingest.sources:SyntheticSessionSource",
}


@dataclass(frozen=True)
class SessionRef:
    """ A loadable session: its file and the subject it belongs to. """

    path: Path
    subject: str

    @property
    def session_id(self) -> str:
        return f"{self.subject}/{self.path.stem}"


def _subject_of(root: Path, path: Path) -> str:
    relative = path.relative_to(root)
    return relative.parts[0] if len(relative.parts) > 1 else path.stem


class SessionSource(ABC):
    """
    Abstract base class defining the interface for session sources.

    All abstract methods must be implemented by subclasses.
    """

    pattern: str = "*"

    def discover(self, root: Union[str, Path]) -> List[SessionRef]:
        """
        List the sessions found under `root`, sorted by path.

        Args:
            root (Union[str, Path]): Data directory.

        Returns:
            List[SessionRef]: One reference per matching file.
        """
        root = Path(root)
        return [SessionRef(path=p, subject=_subject_of(root, p)) for p in sorted(root.rglob(self.pattern)) if p.is_file()]

    @abstractmethod
    def load(self, ref: SessionRef) -> RawSession:
        """
        Load one session.

        Important:
            This method must be implemented by subclasses.

        Args:
            ref (SessionRef): Session to load.

        Returns:
            RawSession: The session with `subject` and `session_id` filled in.
        """
        raise NotImplementedError("load must be implemented by subclasses.")

    def is_ready(self, root: Union[str, Path]) -> Tuple[bool, str]:
        """
        Check that `root` exists and holds at least one session.

        Returns:
            A tuple of a readiness flag and a diagnostic message.
        """
        root = Path(root)
        if not root.is_dir():
            return False, f"data directory {root} does not exist"
        count = len(self.discover(root))
        if count == 0:
            return False, f"no files matching '{self.pattern}' under {root}"
        return True, f"{count} sessions found under {root}"


class EdfSessionSource(SessionSource):
    """ Reads EDF recordings, passing each signal through a signal filter. """

    pattern = "*.edf"

    def __init__(self, signal_filter: Optional[SignalFilter] = None):
        self.signal_filter = signal_filter or accept_all

    def load(self, ref: SessionRef) -> RawSession:
        session = read_edf(ref.path, signal_filter=self.signal_filter, subject=ref.subject)
        session.session_id = ref.session_id
        return session


class SyntheticSessionSource(SessionSource):
    """
    Generates sessions from TOML synthetic-session specs.

    The subject of the reference overrides the spec's subject, and the seed is derived from
    the spec content and the session id, so regenerating a directory is deterministic.
    """

    pattern = "*.toml"

    def load(self, ref: SessionRef) -> RawSession:
        spec = SyntheticSpec.load(ref.path).model_copy(update={"subject": ref.subject})
        seed = int(content_hash({"spec": spec.model_dump(), "session": ref.session_id})[:8], 16)
        session = generate_synthetic_session(spec, seed=seed)
        session.session_id = ref.session_id
        return session


SIGNAL_FILTERS = {
    "accept_all": accept_all,
    "nyquist": nyquist_prefilter_filter,
}


def load_session_source(name: Optional[str] = None, reject_nyquist_violations: bool = False) -> SessionSource:
    """
    Instantiate the session source registered under `name` (default `BENDR_SESSION_SOURCE`).

    Raises:
        ValueError: If no source is registered under that name.
        TypeError: If the registered class does not inherit from `SessionSource`.
    """
    name = name or settings.session_source
    source_cls = load_plugin(SESSION_SOURCE_GROUP, name, builtins=BUILTIN_SOURCES)
    if not isinstance(source_cls, type) or not issubclass(source_cls, SessionSource):
        raise TypeError(f"Plugin '{name}' does not inherit from SessionSource")
    if issubclass(source_cls, EdfSessionSource):
        return source_cls(signal_filter=SIGNAL_FILTERS["nyquist" if reject_nyquist_violations else "accept_all"])
    return source_cls()


@dataclass
class LoadReport:
    """ Outcome of loading a directory: sessions that loaded and files that failed. """

    sessions: List[RawSession]
    failures: List[Tuple[Path, str]]


def load_sessions(source: SessionSource, root: Union[str, Path], workers: Optional[int] = None,
                  on_session: Optional[Callable[[RawSession], None]] = None) -> LoadReport:
    """
    Load every session under `root` on a thread pool.

    A file that fails to load is logged and recorded in the report; the others still load.
    Sessions are returned in discovery order.

    Args:
        source (SessionSource): Source used to discover and load.
        root (Union[str, Path]): Data directory.
        workers (Optional[int]): Thread count (default `BENDR_WORKERS`).
        on_session (Optional[Callable[[RawSession], None]]): Called for each loaded session.

    Returns:
        LoadReport: Loaded sessions and per-file failures.
    """
    refs = source.discover(root)
    workers = workers or settings.workers
    sessions, failures = [], []
    with ThreadPoolExecutor(max_workers=workers, thread_name_prefix="session-load") as pool:
        futures = [(ref, pool.submit(source.load, ref)) for ref in refs]
        for ref, future in futures:
            try:
                session = future.result()
            except (BendrError, OSError, ValueError) as err:
                logger.warning(f"Skipping {ref.path}: {err}")
                failures.append((ref.path, str(err)))
                continue
            if on_session is not None:
                on_session(session)
            sessions.append(session)
    logger.info(f"Loaded {len(sessions)} sessions from {root} ({len(failures)} failed)")
    return LoadReport(sessions=sessions, failures=failures)
