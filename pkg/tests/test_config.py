"""Tests for the pipeline configuration."""

from __future__ import annotations

from pathlib import Path

import pytest
import yaml

from intrapulse_amr.config import load_config, set_dotted, validate_config
from intrapulse_amr.const import (
    DEFAULT_OUTPUT_ROOT,
    DEFAULT_SNR_GRID,
    ENV_OUTPUT_ROOT,
    PARAMETER_BUDGET,
)
from intrapulse_amr.exceptions import ConfigError

from .conftest import MOCK_IMAGE_SIZE, MOCK_PER_CLASS


# ---- Defaults ----


def test_defaults() -> None:
    """Test an absent file yields the reference configuration."""
    config = load_config()
    assert config.output == Path(DEFAULT_OUTPUT_ROOT)
    assert config.jobs == 1
    assert config.dataset.snr_grid == DEFAULT_SNR_GRID
    assert config.tfr.kernel.kind == "cwd"
    assert config.tfr.image_size == (64, 64)
    assert config.train.learning_rate == 0.003
    assert config.train.epochs == 100
    assert config.train.batch_size == 32
    assert config.train.split == (0.6, 0.2, 0.2)
    assert config.train.architecture.budget == PARAMETER_BUDGET
    assert config.curation.augment_threshold == 0.5
    assert config.error_rate_runs == 10


def test_empty_file_means_defaults(tmp_path: Path) -> None:
    """Test an empty YAML file is accepted."""
    path = tmp_path / "empty.yaml"
    path.write_text("", encoding="utf-8")
    assert load_config(path).data == load_config().data


def test_file_values(config_file: Path) -> None:
    """Test values from the file reach the typed sections."""
    config = load_config(config_file)
    assert config.dataset.per_class_count == MOCK_PER_CLASS
    assert config.tfr.image_size == MOCK_IMAGE_SIZE
    assert config.train.architecture.budget is None
    assert config.train.epochs == 2
    assert config.evaluation.bench_batches == (1, 2)
    assert config.output == config_file.parent / "artifacts"


# ---- Overrides ----


def test_flag_overrides_win(config_file: Path) -> None:
    """Test dotted overrides replace file values and skip None."""
    config = load_config(config_file, {"model.epochs": 5, "model.seed": None, "jobs": 2})
    assert config.train.epochs == 5
    assert config.train.seed == 7
    assert config.jobs == 2


def test_env_output_root(monkeypatch: pytest.MonkeyPatch, tmp_path: Path) -> None:
    """Test the environment variable sets the output root when the file does not."""
    monkeypatch.setenv(ENV_OUTPUT_ROOT, str(tmp_path / "env"))
    assert load_config().output == tmp_path / "env"
    assert load_config(overrides={"output": "explicit"}).output == Path("explicit")


def test_set_dotted_rejects_scalar_parent() -> None:
    """Test overriding below a scalar value."""
    data = {"jobs": 1}
    with pytest.raises(ConfigError, match="not a section"):
        set_dotted(data, "jobs.count", 2)
    set_dotted(data, "model.epochs", 3)
    assert data["model"] == {"epochs": 3}


# ---- Validation ----


@pytest.mark.parametrize(
    ("raw", "message"),
    [
        ({"unknown": 1}, "extra keys not allowed"),
        ({"model": {"split": [0.5, 0.5]}}, "split must be three"),
        ({"tfr": {"kernel": "stft"}}, "kernel"),
        ({"curation": {"augment_threshold": 0.95}}, "augment_threshold must not exceed"),
        ({"curation": {"runs": 1}}, "runs"),
        ({"dataset": {"snr_grid": [100.0]}}, "snr_grid"),
        ({"jobs": 0}, "jobs"),
    ],
)
def test_invalid_values(raw: dict, message: str) -> None:
    """Test invalid settings raise a readable ConfigError."""
    with pytest.raises(ConfigError, match=message):
        validate_config(raw)


def test_unreadable_files(tmp_path: Path) -> None:
    """Test missing, malformed and non-mapping files."""
    with pytest.raises(ConfigError, match="does not exist"):
        load_config(tmp_path / "missing.yaml")
    bad = tmp_path / "bad.yaml"
    bad.write_text("model: [unclosed", encoding="utf-8")
    with pytest.raises(ConfigError, match="not valid YAML"):
        load_config(bad)
    listing = tmp_path / "list.yaml"
    listing.write_text(yaml.safe_dump([1, 2]), encoding="utf-8")
    with pytest.raises(ConfigError, match="must hold a mapping"):
        load_config(listing)


def test_section_hash_ignores_output(tmp_path: Path) -> None:
    """Test the output root and job count do not change the config hash."""
    first = load_config(overrides={"output": str(tmp_path / "a"), "jobs": 1})
    second = load_config(overrides={"output": str(tmp_path / "b"), "jobs": 4})
    assert first.section_hash() == second.section_hash()
    assert first.section_hash("dataset") != load_config(
        overrides={"dataset.seed": 5}
    ).section_hash("dataset")
    assert "epochs: 100" in first.to_yaml()
