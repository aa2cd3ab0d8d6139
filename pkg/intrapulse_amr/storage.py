"""On-disk helpers shared by the dataset, image cache and checkpoint formats.

All binary payloads are little-endian 32-bit floats in row-major order.
JSON manifests are written with sorted keys so identical content gives
identical bytes.
"""

from __future__ import annotations

import hashlib
import json
import logging
from pathlib import Path
from typing import Any

import numpy as np

from .const import FORMAT_VERSION, LOGGER_NAME
from .exceptions import ContainerError

_LOGGER = logging.getLogger(LOGGER_NAME)

F32_LE = np.dtype("<f4")


def canonical_json(data: Any) -> str:
    """Serialize to canonical JSON (sorted keys, fixed separators)."""
    return json.dumps(data, sort_keys=True, separators=(",", ":"), allow_nan=False)


def config_hash(data: Any) -> str:
    """Return a short stable hash of JSON-serializable content."""
    return hashlib.sha256(canonical_json(data).encode()).hexdigest()[:16]


def write_json(path: Path, data: Any) -> None:
    """Write a JSON document, creating parent directories."""
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(data, sort_keys=True, indent=2) + "\n", encoding="utf-8")


def read_json(path: Path) -> Any:
    """Read a JSON document, mapping parse failures to ContainerError."""
    try:
        return json.loads(path.read_text(encoding="utf-8"))
    except FileNotFoundError as err:
        raise ContainerError(f"{path} does not exist") from err
    except json.JSONDecodeError as err:
        raise ContainerError(f"{path} is not valid JSON: {err}") from err


def check_header(manifest: dict[str, Any], magic: str, path: Path) -> None:
    """Validate the magic string and format version of a manifest."""
    if manifest.get("magic") != magic:
        raise ContainerError(
            f"{path}: expected magic {magic!r}, found {manifest.get('magic')!r}"
        )
    if manifest.get("format_version") != FORMAT_VERSION:
        raise ContainerError(
            f"{path}: unsupported format version {manifest.get('format_version')!r}"
        )


def write_f32(path: Path, array: np.ndarray) -> int:
    """Write an array as little-endian float32 and return the byte count."""
    path.parent.mkdir(parents=True, exist_ok=True)
    data = np.ascontiguousarray(array, dtype=F32_LE).tobytes()
    path.write_bytes(data)
    _LOGGER.debug("Wrote %d bytes to %s", len(data), path)
    return len(data)


def read_f32(path: Path, shape: tuple[int, ...]) -> np.ndarray:
    """Read a little-endian float32 blob of an expected shape.

    Raises:
        ContainerError: If the file is missing or its size disagrees with
            the expected shape.
    """
    try:
        data = path.read_bytes()
    except FileNotFoundError as err:
        raise ContainerError(f"{path} does not exist") from err
    expected = int(np.prod(shape)) * F32_LE.itemsize
    if len(data) != expected:
        raise ContainerError(
            f"{path}: expected {expected} bytes for shape {shape}, found {len(data)}"
        )
    return np.frombuffer(data, dtype=F32_LE).reshape(shape).astype(np.float32)


def first_bad_row(array: np.ndarray) -> int | None:
    """Return the index of the first row holding a non-finite value."""
    bad = ~np.isfinite(array.reshape(array.shape[0], -1)).all(axis=1)
    hits = np.flatnonzero(bad)
    return int(hits[0]) if hits.size else None
