"""Experiment coordinator dispatching blocking jobs to an executor."""

from __future__ import annotations

import asyncio
from collections.abc import Callable, Iterable, Sequence
from concurrent.futures import Executor, ProcessPoolExecutor, ThreadPoolExecutor
import logging
import time
from typing import Any, Final, TypeVar

import numpy as np

from .const import LOGGER_NAME
from .exceptions import ConfigError
from .siggen import Dataset
from .tfr import ImageCache, TfrConfig, make_image_cache, transform_batch

_LOGGER: Final = logging.getLogger(LOGGER_NAME)

T = TypeVar("T")

TRANSFORM_CHUNK: Final = 64  # Records per transform job


class ExperimentCoordinator:
    """Run independent jobs concurrently with a cap and ordered results.

    Jobs are plain picklable callables; they run in a process pool when
    ``jobs > 1`` and on one worker thread otherwise, so a single-job run is
    identical to serial execution. Artifact writes go through
    :meth:`async_write`, which serializes them behind one lock.
    """

    def __init__(self, jobs: int = 1, executor: Executor | None = None) -> None:
        """Initialize the coordinator.

        Args:
            jobs: Maximum number of jobs in flight.
            executor: Optional executor to use instead of the default pool.
        """
        if jobs < 1:
            raise ConfigError(f"jobs must be at least 1, got {jobs}")
        self.jobs: int = jobs
        self._executor: Executor | None = executor
        self._owns_executor: bool = executor is None
        self._semaphore: asyncio.Semaphore | None = None
        self._write_lock: asyncio.Lock | None = None
        self._in_flight: int = 0
        self.completed: int = 0
        self.failed: int = 0

    @property
    def is_running(self) -> bool:
        """Return True while any job is in flight."""
        return self._in_flight > 0

    @property
    def executor(self) -> Executor:
        """Return the executor, creating the default one on first use."""
        if self._executor is None:
            self._executor = (
                ProcessPoolExecutor(max_workers=self.jobs)
                if self.jobs > 1
                else ThreadPoolExecutor(max_workers=1)
            )
        return self._executor

    def _primitives(self) -> tuple[asyncio.Semaphore, asyncio.Lock]:
        # Created lazily so they bind to the running loop
        if self._semaphore is None:
            self._semaphore = asyncio.Semaphore(self.jobs)
            self._write_lock = asyncio.Lock()
        return self._semaphore, self._write_lock

    async def async_run(self, func: Callable[..., T], *args: Any) -> T:
        """Run one blocking job in the executor once a slot is free."""
        semaphore, _ = self._primitives()
        async with semaphore:
            loop = asyncio.get_running_loop()
            self._in_flight += 1
            started = time.perf_counter()
            try:
                result = await loop.run_in_executor(self.executor, func, *args)
            except Exception:
                self.failed += 1
                _LOGGER.debug("Job %s failed", getattr(func, "__name__", func))
                raise
            finally:
                self._in_flight -= 1
            self.completed += 1
            _LOGGER.debug(
                "Job %s finished in %.2f s",
                getattr(func, "__name__", func),
                time.perf_counter() - started,
            )
            return result

    async def async_map(
        self, func: Callable[..., T], arg_tuples: Iterable[Sequence[Any]]
    ) -> list[T]:
        """Run ``func(*args)`` for every argument tuple, results in submission order."""
        tasks = [self.async_run(func, *args) for args in arg_tuples]
        return list(await asyncio.gather(*tasks))

    async def async_write(self, func: Callable[..., T], *args: Any) -> T:
        """Run an artifact write under the write lock."""
        _, lock = self._primitives()
        async with lock:
            loop = asyncio.get_running_loop()
            return await loop.run_in_executor(None, func, *args)

    async def async_transform_dataset(self, dataset: Dataset, config: TfrConfig) -> ImageCache:
        """Transform a dataset in chunks spread over the workers."""
        config.kernel.ensure_supported()
        chunks = [
            (dataset.samples[start : start + TRANSFORM_CHUNK], config)
            for start in range(0, len(dataset), TRANSFORM_CHUNK)
        ]
        _LOGGER.info("Transforming %d records in %d chunks", len(dataset), len(chunks))
        blocks = await self.async_map(transform_batch, chunks)
        images = np.concatenate(blocks) if blocks else np.zeros((0, *config.image_size), np.float32)
        return make_image_cache(dataset, config, images)

    def close(self) -> None:
        """Shut down the executor if this coordinator created it."""
        if self._owns_executor and self._executor is not None:
            self._executor.shutdown(wait=True)
            self._executor = None

    async def __aenter__(self) -> ExperimentCoordinator:
        """Enter an async context."""
        return self

    async def __aexit__(self, *exc_info: object) -> None:
        """Shut down on exit."""
        self.close()
