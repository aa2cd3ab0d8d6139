"""Common fixtures for intrapulse AMR tests."""

from __future__ import annotations

from pathlib import Path

import numpy as np
import pytest
import yaml

from intrapulse_amr.const import ENV_OUTPUT_ROOT
from intrapulse_amr.model import ArchitectureSpec, TrainConfig
from intrapulse_amr.siggen import Dataset, DatasetConfig, generate_dataset
from intrapulse_amr.tfr import KernelSpec, TfrConfig, transform_dataset

# ---- Mock Constants ----

MOCK_SEED = 1234
MOCK_SNR_GRID = (0.0, 10.0)
MOCK_PER_CLASS = 3
MOCK_IMAGE_SIZE = (8, 8)

# Small grid: 32 time bins x 32 frequency bins
MOCK_KERNEL = KernelSpec(kind="cwd", alpha=1.0, lag_window=15, time_step=64)

MOCK_CONFIG_DATA = {
    "dataset": {"per_class_count": MOCK_PER_CLASS, "snr_grid": [0.0], "seed": MOCK_SEED},
    "tfr": {"lag_window": 15, "time_step": 64, "image_size": list(MOCK_IMAGE_SIZE)},
    "model": {"epochs": 2, "batch_size": 8, "seed": 7},
    "curation": {"runs": 2},
    "eval": {
        "variance_runs": 2,
        "variance_snr": 0.0,
        "ablation_seeds": 0,
        "bench_batches": [1, 2],
        "bench_repetitions": 3,
    },
}


def small_architecture(head: str = "lstm") -> ArchitectureSpec:
    """Return the reference block layout on 8x8 images without a budget."""
    return ArchitectureSpec(input_shape=MOCK_IMAGE_SIZE, head=head, budget=None)


# ---- Fixtures ----


@pytest.fixture(autouse=True)
def clear_output_env(monkeypatch: pytest.MonkeyPatch) -> None:
    """Keep a developer's output root out of the tests."""
    monkeypatch.delenv(ENV_OUTPUT_ROOT, raising=False)


@pytest.fixture
def rng() -> np.random.Generator:
    """Return a seeded generator."""
    return np.random.default_rng(MOCK_SEED)


@pytest.fixture(scope="session")
def small_dataset() -> Dataset:
    """Generate 3 pulses per class at two SNR levels."""
    return generate_dataset(
        DatasetConfig(per_class_count=MOCK_PER_CLASS, snr_grid=MOCK_SNR_GRID, seed=MOCK_SEED)
    )


@pytest.fixture(scope="session")
def tfr_config() -> TfrConfig:
    """Return a small, fast transform configuration."""
    return TfrConfig(kernel=MOCK_KERNEL, image_size=MOCK_IMAGE_SIZE)


@pytest.fixture(scope="session")
def small_cache(small_dataset: Dataset, tfr_config: TfrConfig):
    """Transform the small dataset once per session."""
    return transform_dataset(small_dataset, tfr_config)


@pytest.fixture
def train_config() -> TrainConfig:
    """Return a two-epoch configuration for 8x8 images."""
    return TrainConfig(
        epochs=2,
        batch_size=8,
        seed=7,
        architecture=small_architecture(),
    )


@pytest.fixture
def config_file(tmp_path: Path) -> Path:
    """Write the small pipeline configuration to a YAML file."""
    path = tmp_path / "pipeline.yaml"
    data = dict(MOCK_CONFIG_DATA, output=str(tmp_path / "artifacts"))
    path.write_text(yaml.safe_dump(data), encoding="utf-8")
    return path
