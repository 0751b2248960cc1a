"""
Dataset manifest: the key-value record of a preprocessing run.

The manifest is a TOML file:

    dataset = "pretrain"
    dataset_range = 412.7            # max(S_ds) - min(S_ds) in µV
    target_rate = 256.0
    scale_mode = "sequence"
    window_s = 60.0
    stride_s = 60.0
    content_hash = "<sha256 of every other field>"

    [[sessions]]
    session_id = "S01/rec1"
    subject = "S01"
    native_rates = { Fp1 = 256.0, ... }
    channels = { Fp1 = "EEG Fp1-REF", F7 = "MISSING", ... }
    chunks = ["S01_rec1_0000.bin", ...]

Rerunning preprocessing on unchanged inputs reproduces the same hash.
"""

from pathlib import Path
from typing import Dict, List, Union

import tomlkit
from pydantic import BaseModel, ConfigDict, Field, ValidationError
from tomlkit.exceptions import ParseError as TomlParseError

from bendr.app.core.exceptions import ConfigError
from bendr.app.core.utils import content_hash


class ManifestSession(BaseModel):
    """ Per-session entry of a manifest. """

    model_config = ConfigDict(extra="forbid")

    session_id: str
    subject: str
    native_rates: Dict[str, float] = Field(default_factory=dict)
    channels: Dict[str, str] = Field(default_factory=dict)
    chunks: List[str] = Field(default_factory=list)
    labels: List[str] = Field(default_factory=list)


class DatasetManifest(BaseModel):
    """
    Result of the dataset-range pass and of chunk emission.

    `labels` of a session are the class labels of its chunks when the chunks are trials.
    """

    model_config = ConfigDict(extra="forbid")

    dataset: str
    dataset_range: float = Field(gt=0)
    target_rate: float = 256.0
    scale_mode: str = "sequence"
    window_s: float = 60.0
    stride_s: float = 60.0
    sessions: List[ManifestSession] = Field(default_factory=list)
    content_hash: str = ""

    def compute_hash(self) -> str:
        return content_hash(self.model_dump(mode="json", exclude={"content_hash"}))

    def seal(self) -> "DatasetManifest":
        """ Set `content_hash` from the current content. """
        self.content_hash = self.compute_hash()
        return self

    @property
    def chunk_count(self) -> int:
        return sum(len(s.chunks) for s in self.sessions)

    def subjects(self) -> List[str]:
        return sorted({s.subject for s in self.sessions})

    def to_toml(self) -> str:
        return tomlkit.dumps(self.model_dump(mode="json"))

    def save(self, path: Union[str, Path]) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(self.seal().to_toml(), encoding="utf-8")
        return path

    @classmethod
    def load(cls, path: Union[str, Path]) -> "DatasetManifest":
        """
        Read a manifest and verify its content hash.

        Raises:
            ConfigError: If the file is missing, malformed, or its hash does not match its content.
        """
        path = Path(path)
        if not path.is_file():
            raise ConfigError(f"Manifest {path} not found; run the preprocess command first")
        try:
            manifest = cls.model_validate(tomlkit.parse(path.read_text(encoding="utf-8")).unwrap())
        except (ValidationError, TomlParseError) as err:
            raise ConfigError(f"Invalid manifest {path}: {err}") from err
        if manifest.content_hash != manifest.compute_hash():
            raise ConfigError(f"Manifest {path} content does not match its hash")
        return manifest
