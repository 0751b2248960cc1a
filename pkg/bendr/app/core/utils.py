"""
Shared helpers: plugin lookup and content hashing.

`load_plugin` resolves a named plugin from an entry-point group declared in
`pyproject.toml` (session sources live in `bendr.session_sources` and are chosen with
`BENDR_SESSION_SOURCE`). A source checkout without installed metadata falls back to the
caller's in-package registry.

`content_hash` is the sha256 of canonical JSON; manifests and checkpoints use it to
detect tampering.

Example:
    .. code-block:: python

        from bendr.app.core.utils import load_plugin

        source_cls = load_plugin("bendr.session_sources", "synthetic")
        source = source_cls()
"""

import hashlib
import json
from importlib import import_module
from importlib.metadata import entry_points
from typing import Any, Dict, Optional


def load_plugin(group: str, name: str, builtins: Optional[Dict[str, str]] = None):
    """
    Load a plugin class or factory function from entry points.

    When the package runs from a source checkout without installed metadata, the
    `builtins` mapping (name -> "module:attribute") is consulted as a fallback.

    Args:
        group (str): Entry point group name.
        name (str): Name of the registered plugin.
        builtins (Optional[Dict[str, str]]): Fallback registry of in-package plugins.

    Returns:
        The loaded plugin object (class or function).

    Raises:
        ValueError: If neither the entry points nor `builtins` know `name`.
    """
    matches = entry_points().select(group=group, name=name)
    if matches:
        return next(iter(matches)).load()

    if builtins and name in builtins:
        module_name, attribute = builtins[name].split(":")
        return getattr(import_module(module_name), attribute)

    raise ValueError(f"No entry point named '{name}' found in group '{group}'")


def content_hash(payload: Any) -> str:
    """
    Compute a stable sha256 hex digest of a JSON-serializable payload.

    Keys are sorted so logically equal mappings hash identically.

    Args:
        payload (Any): JSON-serializable object.

    Returns:
        str: Hex digest.
    """
    text = json.dumps(payload, sort_keys=True, separators=(",", ":"), default=str)
    return hashlib.sha256(text.encode("utf-8")).hexdigest()
