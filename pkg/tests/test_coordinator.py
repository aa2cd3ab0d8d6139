"""Tests for the experiment coordinator."""

from __future__ import annotations

import asyncio
from concurrent.futures import ThreadPoolExecutor
import threading
import time

import numpy as np
import pytest

from intrapulse_amr.coordinator import TRANSFORM_CHUNK, ExperimentCoordinator
from intrapulse_amr.exceptions import ConfigError, DataError
from intrapulse_amr.siggen import Dataset
from intrapulse_amr.tfr import ImageCache, TfrConfig, transform_dataset


def _square(value: int, delay: float = 0.0) -> int:
    time.sleep(delay)
    return value * value


def _explode(value: int) -> int:
    raise DataError(f"bad input {value}")


# ---- Construction ----


def test_jobs_must_be_positive() -> None:
    """Test a zero job cap is rejected."""
    with pytest.raises(ConfigError, match="at least 1"):
        ExperimentCoordinator(0)


def test_close_leaves_injected_executor() -> None:
    """Test an injected executor is not shut down."""
    executor = ThreadPoolExecutor(max_workers=2)
    coordinator = ExperimentCoordinator(2, executor=executor)
    assert coordinator.executor is executor
    coordinator.close()
    assert executor.submit(_square, 3).result() == 9
    executor.shutdown()


# ---- Dispatch ----


async def test_map_keeps_submission_order() -> None:
    """Test results come back in submission order, not completion order."""
    executor = ThreadPoolExecutor(max_workers=3)
    async with ExperimentCoordinator(3, executor=executor) as coordinator:
        results = await coordinator.async_map(_square, [(3, 0.05), (2, 0.0), (1, 0.02)])
    executor.shutdown()
    assert results == [9, 4, 1]
    assert coordinator.completed == 3
    assert not coordinator.is_running


async def test_job_cap() -> None:
    """Test no more than ``jobs`` run at once."""
    active, peak = 0, 0
    guard = threading.Lock()

    def job() -> None:
        nonlocal active, peak
        with guard:
            active += 1
            peak = max(peak, active)
        time.sleep(0.02)
        with guard:
            active -= 1

    executor = ThreadPoolExecutor(max_workers=4)
    async with ExperimentCoordinator(2, executor=executor) as coordinator:
        await coordinator.async_map(job, [()] * 6)
    executor.shutdown()
    assert peak <= 2


async def test_failed_job_propagates() -> None:
    """Test a job error reaches the caller and is counted."""
    async with ExperimentCoordinator(1) as coordinator:
        with pytest.raises(DataError, match="bad input 4"):
            await coordinator.async_run(_explode, 4)
        assert await coordinator.async_run(_square, 5) == 25
    assert coordinator.failed == 1
    assert coordinator.completed == 1


async def test_is_running_clears_after_single_runs() -> None:
    """Test the running flag follows direct runs, including failed ones."""
    async with ExperimentCoordinator(1) as coordinator:
        assert await coordinator.async_run(lambda: coordinator.is_running)
        assert not coordinator.is_running
        with pytest.raises(DataError):
            await coordinator.async_run(_explode, 1)
        assert not coordinator.is_running


async def test_writes_are_serialized() -> None:
    """Test concurrent writes never overlap."""
    events: list[str] = []

    def write(name: str) -> None:
        events.append(f"start {name}")
        time.sleep(0.02)
        events.append(f"end {name}")

    async with ExperimentCoordinator(1) as coordinator:
        await asyncio.gather(
            coordinator.async_write(write, "a"), coordinator.async_write(write, "b")
        )
    assert events[0].startswith("start") and events[1].startswith("end")
    assert events[1].split()[1] == events[0].split()[1]


# ---- Transform ----


async def test_transform_matches_serial(small_dataset: Dataset, tfr_config: TfrConfig) -> None:
    """Test the chunked transform equals the serial one."""
    async with ExperimentCoordinator(1) as coordinator:
        cache = await coordinator.async_transform_dataset(small_dataset, tfr_config)
    serial = transform_dataset(small_dataset, tfr_config)
    assert isinstance(cache, ImageCache)
    assert cache.key == serial.key
    np.testing.assert_array_equal(cache.images, serial.images)
    np.testing.assert_array_equal(cache.sample_ids, serial.sample_ids)
    assert coordinator.completed == -(-len(small_dataset) // TRANSFORM_CHUNK)
