"""
Configuration Module for the BENDR toolkit
==========================================

This module defines two layers of configuration:

1. `Settings`: process-level settings loaded from environment variables with Pydantic's
   `BaseSettings`. For local development, environment variables can be defined in a `.env`
   file located at the project root. Unknown environment variables are ignored to allow
   shared `.env` files.

2. `RunConfig`: the per-run, file-based configuration (a TOML key-value file) holding every
   hyperparameter of preprocessing, pretraining, fine-tuning and evaluation. Published values
   are the defaults; values without a published counterpart are marked as desk-scale defaults.

Usage:
    Import the singleton `settings` object from this module to access environment settings,
    and load run configurations with `RunConfig.load(path)`.

    .. code-block:: python
        from bendr.app.config import settings, RunConfig

        print(settings.log_level)
        config = RunConfig.load("configs/desk.toml")

Environment Variables:
    - `LOG_LEVEL`: Logging level ("debug", "info", "warning", "error", "critical"; default: "info")
    - `BENDR_SESSION_SOURCE`: Session source plugin to load, e.g. "edf" or "synthetic" (default: "edf")
    - `BENDR_WORKERS`: Threads used for concurrent parsing and chunk prefetch (default: 2)
    - `BENDR_TRAINING_LOG`: Default path of the append-only training log (default: "training.log")
"""

from pathlib import Path
from typing import List, Literal, Optional, Tuple, Union

import tomlkit
from tomlkit.exceptions import ParseError as TomlParseError
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator
from pydantic_settings import BaseSettings

from bendr.app.core.exceptions import ConfigError


class Settings(BaseSettings):
    """
    Process configuration settings loaded from environment variables.

    Attributes:
        log_level (str): Logging verbosity level.
            Environment variable: `LOG_LEVEL`. Default: "info".
        session_source (str): Name of the session source plugin used to discover and load recordings.
            Environment variable: `BENDR_SESSION_SOURCE`. Default: "edf".
        workers (int): Number of threads for concurrent parsing and chunk prefetch.
            Environment variable: `BENDR_WORKERS`. Default: 2.
        training_log (str): Default path of the training record log.
            Environment variable: `BENDR_TRAINING_LOG`. Default: "training.log".
    """

    log_level: str = Field(default="info", validation_alias="LOG_LEVEL")
    session_source: str = Field(default="edf", validation_alias="BENDR_SESSION_SOURCE")
    workers: int = Field(default=2, ge=1, validation_alias="BENDR_WORKERS")
    training_log: str = Field(default="training.log", validation_alias="BENDR_TRAINING_LOG")

    model_config = {
        "env_file": ".env",
        "env_file_encoding": "utf-8",
        "extra": "ignore"
    }

    @field_validator("log_level")
    @classmethod
    def validate_log_level(cls, v):
        allowed = {"debug", "info", "warning", "error", "critical"}
        level = v.lower()
        if level not in allowed:
            raise ValueError(f"log_level must be one of {allowed}")
        return level


class _Section(BaseModel):
    model_config = ConfigDict(extra="forbid")


class PathsConfig(_Section):
    """ Input and output locations of a run. """

    data_dir: Optional[str] = None
    manifest: str = "manifest.toml"
    chunk_dir: str = "chunks"
    checkpoint: Optional[str] = None
    out: str = "runs"
    training_log: Optional[str] = None


class ModelConfig(_Section):
    """
    Architecture hyperparameters.

    Defaults are the published architecture. `ModelConfig.desk()` returns the reduced
    desk-scale preset used for laptop runs and tests.
    """

    in_channels: int = 20
    encoder_dim: int = 512
    encoder_widths: Tuple[int, ...] = (3, 2, 2, 2, 2, 2)
    encoder_strides: Tuple[int, ...] = (3, 2, 2, 2, 2, 2)
    groupnorm_groups: int = 32
    model_dim: int = 1536
    heads: int = 8
    layers: int = 8
    ff_dim: int = 3076
    position_kernel: int = 25
    position_groups: int = 16
    start_token: float = -5.0
    dropout: float = Field(default=0.15, ge=0.0, lt=1.0)
    layer_drop: float = Field(default=0.01, ge=0.0, lt=1.0)

    @model_validator(mode="after")
    def check_divisibility(self):
        if len(self.encoder_widths) != len(self.encoder_strides):
            raise ValueError("encoder_widths and encoder_strides must have the same length")
        if self.encoder_dim % self.groupnorm_groups:
            raise ValueError("encoder_dim must be divisible by groupnorm_groups")
        if self.encoder_dim % self.position_groups:
            raise ValueError("encoder_dim must be divisible by position_groups")
        if self.model_dim % self.heads:
            raise ValueError("model_dim must be divisible by heads")
        if self.position_kernel % 2 == 0:
            raise ValueError("position_kernel must be odd for same-length padding")
        return self

    @property
    def downsampling(self) -> int:
        """ Product of encoder strides (96 for the published encoder). """
        factor = 1
        for s in self.encoder_strides:
            factor *= s
        return factor

    @classmethod
    def desk(cls) -> "ModelConfig":
        """ Reduced dimensions for desk-scale runs; not a published configuration. """
        return cls(encoder_dim=64, groupnorm_groups=8, model_dim=128, heads=4, layers=2,
                   ff_dim=256, position_groups=16)


class PreprocessConfig(_Section):
    """ Filtering, resampling, windowing and scaling options. """

    dataset: str = "pretrain"
    target_rate: float = 256.0
    window_s: float = 60.0
    stride_s: float = 60.0
    lowpass_hz: float = 120.0
    lowpass_above_hz: float = 512.0
    scale_mode: Literal["sequence", "channel"] = "sequence"
    reject_nyquist_violations: bool = False


class PretrainConfig(_Section):
    """
    Masked contrastive pretraining hyperparameters.

    `batch_size`, `total_steps` and `peak_lr` are desk-scale defaults with no published
    counterpart.
    """

    p_mask: float = Field(default=0.065, gt=0.0, lt=1.0)
    span: int = Field(default=10, ge=1)
    temperature: float = Field(default=0.1, gt=0.0)
    num_distractors: int = Field(default=20, ge=1)
    activation_weight: float = 1.0
    batch_size: int = Field(default=4, ge=1)
    total_steps: int = Field(default=2000, ge=1)
    peak_lr: float = Field(default=5e-4, ge=0.0)
    warmup_frac: float = Field(default=0.05, gt=0.0, lt=1.0)
    weight_decay: float = Field(default=0.01, ge=0.0)
    checkpoint_every: int = Field(default=500, ge=1)
    sequence_s: float = 60.0


class FinetuneConfig(_Section):
    """
    Downstream fine-tuning configuration.

    `batch_size`, `epochs` and `peak_lr` default to the dataset preset when left unset.
    """

    variant: int = Field(default=2, ge=1, le=6)
    dataset: str = "MMI"
    batch_size: Optional[int] = Field(default=None, ge=1)
    epochs: Optional[int] = Field(default=None, ge=1)
    peak_lr: Optional[float] = Field(default=None, ge=0.0)
    warmup_frac: float = Field(default=0.1, gt=0.0, lt=1.0)
    weight_decay: float = Field(default=0.01, ge=0.0)
    time_mask_p: float = Field(default=0.01, ge=0.0, le=1.0)
    time_mask_frac: float = Field(default=0.1, gt=0.0, le=1.0)
    channel_drop_p: float = Field(default=0.005, ge=0.0, le=1.0)
    channel_drop_frac: float = Field(default=0.1, gt=0.0, le=1.0)
    folds: Optional[int] = Field(default=None, ge=2)
    held_out_subjects: List[str] = Field(default_factory=list)
    bootstrap_resamples: int = Field(default=1000, ge=1)
    confidence_level: float = Field(default=0.95, gt=0.0, lt=1.0)


class EvaluateConfig(_Section):
    """ Contrastive evaluation options. """

    sequence_s: float = 60.0
    seed: int = 0


class SweepConfig(_Section):
    """ Sequence-length sweep options. """

    lengths_s: List[float] = Field(default_factory=lambda: [20.0, 30.0, 40.0, 50.0, 60.0])


class RunConfig(_Section):
    """
    Complete, reproducible description of one CLI run.

    A run is fully determined by this object, its `seed` and the input data.
    """

    command: Literal["preprocess", "pretrain", "finetune", "evaluate", "sweep"] = "pretrain"
    seed: int = 0
    model_preset: Literal["published", "desk"] = "published"
    paths: PathsConfig = Field(default_factory=PathsConfig)
    model: Optional[ModelConfig] = None
    preprocess: PreprocessConfig = Field(default_factory=PreprocessConfig)
    pretrain: PretrainConfig = Field(default_factory=PretrainConfig)
    finetune: FinetuneConfig = Field(default_factory=FinetuneConfig)
    evaluate: EvaluateConfig = Field(default_factory=EvaluateConfig)
    sweep: SweepConfig = Field(default_factory=SweepConfig)

    @model_validator(mode="after")
    def resolve_model(self):
        if self.model is None:
            self.model = ModelConfig.desk() if self.model_preset == "desk" else ModelConfig()
        return self

    @classmethod
    def from_toml(cls, text: str) -> "RunConfig":
        """
        Parse a TOML document into a validated run configuration.

        Args:
            text (str): TOML document.

        Returns:
            RunConfig: Validated configuration.

        Raises:
            ConfigError: If the document is not valid TOML or violates the schema.
        """
        try:
            data = tomlkit.parse(text).unwrap()
            return cls.model_validate(data)
        except ValidationError as e:
            raise ConfigError(f"Invalid run configuration: {e}") from e
        except TomlParseError as e:
            raise ConfigError(f"Configuration is not valid TOML: {e}") from e

    @classmethod
    def load(cls, path: Union[str, Path]) -> "RunConfig":
        """
        Load a run configuration from a TOML file.

        Args:
            path (Union[str, Path]): Path of the configuration file.

        Returns:
            RunConfig: Validated configuration.

        Raises:
            ConfigError: If the file is missing or invalid.
        """
        path = Path(path)
        if not path.is_file():
            raise ConfigError(f"Configuration file '{path}' not found")
        return cls.from_toml(path.read_text(encoding="utf-8"))

    def to_toml(self) -> str:
        """ Serialize the configuration back to a TOML document. """
        data = self.model_dump(mode="json", exclude_none=True)
        return tomlkit.dumps(data)

    def echo(self) -> dict:
        """ JSON-compatible copy of the configuration, as embedded in checkpoints. """
        return self.model_dump(mode="json")


# Singleton settings object
settings = Settings()
