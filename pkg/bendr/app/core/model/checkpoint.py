"""
Checkpoint persistence.

File layout (integers little-endian):

    offset  size   field
    0       8      magic b"BENDRCKP"
    8       4      uint32 length M of the metadata block
    12      M      UTF-8 JSON metadata
    12 + M  ...    float64 sections, back to back, in the order of `metadata["sections"]`

Metadata keys:
    format_version   semantic version of the layout ("1.0.0")
    config           echo of the run configuration
    config_hash      sha256 of `config`
    model            architecture the parameters belong to
    step             optimizer step counter
    sections         [{"name": ..., "shape": [...]}, ...]; parameter sections are named
                     "param/<dotted name>", optimizer buffers "adam/<key>"
    extra            free-form JSON (e.g. fine-tuning variant)

Loading checks the magic, the major version and the config hash.
"""

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, Optional, Union

import numpy as np

from bendr.app.config import ModelConfig, RunConfig
from bendr.app.core.exceptions import CheckpointError, ShapeError
from bendr.app.core.logger import get_logger
from bendr.app.core.model.bendr_model import BendrModel
from bendr.app.core.tensor import AdamState, Module
from bendr.app.core.utils import content_hash


logger = get_logger(__name__)

CHECKPOINT_MAGIC = b"BENDRCKP"
FORMAT_VERSION = "1.0.0"
PARAM_PREFIX = "param/"
ADAM_PREFIX = "adam/"
REQUIRED_KEYS = ("format_version", "config", "config_hash", "model", "step", "sections")


@dataclass
class Checkpoint:
    """
    Contents of a checkpoint file.

    Attributes:
        parameters (Dict[str, np.ndarray]): Dotted parameter name -> values.
        config (dict): Run configuration echo.
        model (dict): Architecture.
        step (int): Optimizer step counter.
        adam (Optional[Dict[str, np.ndarray]]): Optimizer buffers, when saved.
        extra (dict): Free-form metadata.
    """

    parameters: Dict[str, np.ndarray]
    config: Dict[str, Any]
    model: Dict[str, Any]
    step: int = 0
    adam: Optional[Dict[str, np.ndarray]] = None
    extra: Dict[str, Any] = field(default_factory=dict)

    @property
    def model_config(self) -> ModelConfig:
        return ModelConfig.model_validate(self.model)

    def restore(self, module: Module, prefix: str = "", strict: bool = True) -> Module:
        """ Load the parameters under `prefix` into `module`. """
        state = {name[len(prefix):]: values for name, values in self.parameters.items() if name.startswith(prefix)}
        try:
            module.load_state_dict(state, strict=strict)
        except ShapeError as err:
            raise CheckpointError(f"Checkpoint does not fit the model: {err}") from err
        return module

    def build_model(self) -> BendrModel:
        """ A `BendrModel` with the checkpoint's architecture and parameters. """
        model = BendrModel(self.model_config)
        return self.restore(model)

    def adam_state(self, **kwargs) -> Optional[AdamState]:
        if self.adam is None:
            return None
        state = AdamState(**kwargs)
        state.load_state_dict(self.adam)
        return state


def _major(version: str) -> int:
    try:
        return int(version.split(".")[0])
    except (ValueError, AttributeError):
        raise CheckpointError(f"Malformed checkpoint version '{version}'") from None


def save_checkpoint(path: Union[str, Path], module: Module, config: RunConfig, step: int = 0,
                    adam: Optional[AdamState] = None, model_config: Optional[ModelConfig] = None,
                    extra: Optional[Dict[str, Any]] = None) -> Path:
    """
    Write a checkpoint of `module`.

    Args:
        path (Union[str, Path]): Output file.
        module (Module): Model whose parameters are saved.
        config (RunConfig): Run configuration echoed into the metadata.
        step (int): Optimizer step counter.
        adam (Optional[AdamState]): Optimizer state to include.
        model_config (Optional[ModelConfig]): Architecture; defaults to `config.model`.
        extra (Optional[Dict[str, Any]]): Free-form JSON metadata.

    Returns:
        Path: The written file.
    """
    path = Path(path)
    echo = config.echo()
    sections = [(PARAM_PREFIX + name, values) for name, values in module.state_dict().items()]
    if adam is not None:
        sections += [(ADAM_PREFIX + key, values) for key, values in adam.state_dict().items()]
    metadata = {
        "format_version": FORMAT_VERSION,
        "config": echo,
        "config_hash": content_hash(echo),
        "model": (model_config or config.model).model_dump(mode="json"),
        "step": int(step),
        "sections": [{"name": name, "shape": list(np.shape(values))} for name, values in sections],
        "extra": extra or {},
    }
    header = json.dumps(metadata, sort_keys=True).encode("utf-8")
    payload = b"".join(np.ascontiguousarray(values, dtype="<f8").tobytes() for _, values in sections)

    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_suffix(path.suffix + ".tmp")
    tmp.write_bytes(CHECKPOINT_MAGIC + np.array([len(header)], dtype="<u4").tobytes() + header + payload)
    tmp.replace(path)
    logger.info(f"Checkpoint written to {path} (step {step})")
    return path


def load_checkpoint(path: Union[str, Path]) -> Checkpoint:
    """
    Read and verify a checkpoint.

    Raises:
        CheckpointError: If the file is missing or truncated, the magic or major version
            differs, metadata keys are missing, or the config echo does not match its hash.
    """
    path = Path(path)
    if not path.is_file():
        raise CheckpointError(f"Checkpoint {path} not found")
    data = path.read_bytes()
    if data[:8] != CHECKPOINT_MAGIC:
        raise CheckpointError(f"{path} is not a checkpoint (bad magic)")
    if len(data) < 12:
        raise CheckpointError(f"{path} is truncated")
    size = int(np.frombuffer(data, dtype="<u4", count=1, offset=8)[0])
    try:
        metadata = json.loads(data[12:12 + size].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as err:
        raise CheckpointError(f"{path} has a corrupted metadata block: {err}") from err
    missing = [key for key in REQUIRED_KEYS if not isinstance(metadata, dict) or key not in metadata]
    if missing:
        raise CheckpointError(f"{path} metadata lacks {missing}")

    if _major(metadata["format_version"]) != _major(FORMAT_VERSION):
        raise CheckpointError(f"{path} has format version {metadata['format_version']}, expected {FORMAT_VERSION}")
    if content_hash(metadata["config"]) != metadata["config_hash"]:
        raise CheckpointError(f"{path}: configuration echo does not match its hash")

    offset = 12 + size
    parameters, adam = {}, {}
    for section in metadata["sections"]:
        shape = tuple(section["shape"])
        count = int(np.prod(shape, dtype=np.int64))
        if offset + 8 * count > len(data):
            raise CheckpointError(f"{path} is truncated in section {section['name']}")
        values = np.frombuffer(data, dtype="<f8", count=count, offset=offset).reshape(shape).astype(np.float64)
        offset += 8 * count
        name = section["name"]
        if name.startswith(PARAM_PREFIX):
            parameters[name[len(PARAM_PREFIX):]] = values
        elif name.startswith(ADAM_PREFIX):
            adam[name[len(ADAM_PREFIX):]] = values
    if offset != len(data):
        raise CheckpointError(f"{path} has {len(data) - offset} trailing bytes")

    return Checkpoint(parameters=parameters, config=metadata["config"], model=metadata["model"],
                      step=int(metadata["step"]), adam=adam or None, extra=metadata.get("extra", {}))
