"""Tests for run provenance manifests."""

from __future__ import annotations

from intrapulse_amr.const import VERSION
from intrapulse_amr.diagnostics import (
    TRACKED_PACKAGES,
    VOLATILE_KEYS,
    build_run_manifest,
    get_environment_info,
    get_thread_info,
    stable_view,
)


def test_manifest_fields() -> None:
    """Test the manifest carries config hash, seeds and sorted outputs."""
    manifest = build_run_manifest(
        "train",
        "abc123",
        seeds={"train": 7},
        inputs={"dataset": "deadbeef"},
        outputs=["b.json", "a.npz"],
        timing={"seconds_per_epoch": 1.5},
    )
    assert manifest["command"] == "train"
    assert manifest["version"] == VERSION
    assert manifest["config_hash"] == "abc123"
    assert manifest["seeds"] == {"train": 7}
    assert manifest["outputs"] == ["a.npz", "b.json"]
    assert manifest["timing"] == {"seconds_per_epoch": 1.5}
    assert set(manifest["platform"]["packages"]) == set(TRACKED_PACKAGES)


def test_manifest_defaults() -> None:
    """Test absent sections become empty containers."""
    manifest = build_run_manifest("generate", "x")
    assert manifest["seeds"] == {}
    assert manifest["inputs"] == {}
    assert manifest["outputs"] == []
    assert manifest["extra"] == {}


def test_stable_view_drops_volatile_fields() -> None:
    """Test two identical runs agree once volatile fields are dropped."""
    first = build_run_manifest("bench", "x", timing={"median_s": 0.1})
    second = build_run_manifest("bench", "x", timing={"median_s": 0.3})
    assert stable_view(first) == stable_view(second)
    assert not VOLATILE_KEYS & set(stable_view(first))


def test_environment_info() -> None:
    """Test interpreter and numpy versions are reported."""
    info = get_environment_info()
    assert info["python"].count(".") == 2
    assert info["packages"]["numpy"] is not None
    assert all(set(pool) == {"user_api", "internal_api", "num_threads"} for pool in get_thread_info())
