"""Provenance manifests written next to every command's outputs."""

from __future__ import annotations

from datetime import datetime, timezone
from importlib import metadata
import platform
import sys
from typing import Any

from threadpoolctl import threadpool_info

from .const import VERSION

UTC = timezone.utc  # datetime.UTC alias (Python 3.11+)

TRACKED_PACKAGES = ("numpy", "scipy", "scikit-learn", "pandas", "threadpoolctl", "voluptuous")

# Keys that legitimately differ between identical reruns
VOLATILE_KEYS = frozenset({"timestamp", "timing", "platform", "threads"})


def _package_version(name: str) -> str | None:
    try:
        return metadata.version(name)
    except metadata.PackageNotFoundError:
        return None


def get_environment_info() -> dict[str, Any]:
    """Return interpreter, platform and library versions."""
    return {
        "python": sys.version.split()[0],
        "implementation": platform.python_implementation(),
        "system": platform.system(),
        "machine": platform.machine(),
        "packages": {name: _package_version(name) for name in TRACKED_PACKAGES},
    }


def get_thread_info() -> list[dict[str, Any]]:
    """Return the BLAS/OpenMP thread pools seen by threadpoolctl."""
    return [
        {
            "user_api": pool.get("user_api"),
            "internal_api": pool.get("internal_api"),
            "num_threads": pool.get("num_threads"),
        }
        for pool in threadpool_info()
    ]


def build_run_manifest(
    command: str,
    config_hash: str,
    seeds: dict[str, int] | None = None,
    inputs: dict[str, str] | None = None,
    outputs: list[str] | None = None,
    extra: dict[str, Any] | None = None,
    timing: dict[str, Any] | None = None,
) -> dict[str, Any]:
    """Return the provenance record of one command run.

    Measured durations go under ``timing`` so they can be told apart from
    the reproducible fields.
    """
    return {
        "command": command,
        "version": VERSION,
        "config_hash": config_hash,
        "seeds": seeds or {},
        "inputs": inputs or {},
        "outputs": sorted(outputs or []),
        "extra": extra or {},
        "timing": timing or {},
        "platform": get_environment_info(),
        "threads": get_thread_info(),
        "timestamp": datetime.now(UTC).isoformat(),
    }


def stable_view(manifest: dict[str, Any]) -> dict[str, Any]:
    """Drop the fields expected to change between identical reruns."""
    return {k: v for k, v in manifest.items() if k not in VOLATILE_KEYS}
