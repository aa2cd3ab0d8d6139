"""Pipeline configuration: YAML file, schema validation and flag overrides."""

from __future__ import annotations

from collections.abc import Mapping
import copy
from dataclasses import dataclass, field
import logging
import math
import os
from pathlib import Path
from typing import Any

import voluptuous as vol
from voluptuous.humanize import humanize_error
import yaml

from .const import (
    BENCH_THREADS,
    CARRIER_JITTER,
    CONF_CURATION,
    CONF_DATASET,
    CONF_EVAL,
    CONF_JOBS,
    CONF_MODEL,
    CONF_OUTPUT,
    CONF_TFR,
    DEFAULT_ABLATION_SEEDS,
    DEFAULT_ALPHA,
    DEFAULT_AUGMENT_THRESHOLD,
    DEFAULT_BATCH_SIZE,
    DEFAULT_BENCH_BATCHES,
    DEFAULT_BENCH_REPETITIONS,
    DEFAULT_EPOCHS,
    DEFAULT_ERROR_RATE_RUNS,
    DEFAULT_EXCLUDE_THRESHOLD,
    DEFAULT_IMAGE_SIZE,
    DEFAULT_KERNEL,
    DEFAULT_LAG_WINDOW,
    DEFAULT_LEARNING_RATE,
    DEFAULT_MAX_CLASS_IMBALANCE,
    DEFAULT_MAX_GROWTH,
    DEFAULT_OUTPUT_ROOT,
    DEFAULT_PER_CLASS_COUNT,
    DEFAULT_SEED,
    DEFAULT_SNR_GRID,
    DEFAULT_SPLIT,
    DEFAULT_TIME_STEP,
    DEFAULT_VARIANCE_RUNS,
    DEFAULT_VARIANTS_PER_SAMPLE,
    ENV_OUTPUT_ROOT,
    HEAD_DENSE,
    HEAD_LSTM,
    KERNELS,
    LOGGER_NAME,
    MAX_JOBS,
    SHIFT_FRACTION,
    SNR_RANGE,
)
from .curation import CurationPolicy
from .exceptions import ConfigError
from .model import ArchitectureSpec, TrainConfig
from .siggen import DatasetConfig
from .storage import config_hash
from .tfr import KernelSpec, TfrConfig

_LOGGER = logging.getLogger(LOGGER_NAME)

_POSITIVE_INT = vol.All(int, vol.Range(min=1))
_FRACTION = vol.All(vol.Coerce(float), vol.Range(min=0.0, max=1.0))
_SNR = vol.All(vol.Coerce(float), vol.Range(min=SNR_RANGE[0], max=SNR_RANGE[1]))


def _split_fractions(value: list[float]) -> list[float]:
    if len(value) != 3 or min(value) <= 0 or not math.isclose(sum(value), 1.0):
        raise vol.Invalid("split must be three positive fractions summing to 1")
    return value


def _ordered_thresholds(section: dict[str, Any]) -> dict[str, Any]:
    if section["augment_threshold"] > section["exclude_threshold"]:
        raise vol.Invalid("augment_threshold must not exceed exclude_threshold")
    return section


DATASET_SCHEMA = vol.Schema(
    {
        vol.Optional("per_class_count", default=DEFAULT_PER_CLASS_COUNT): _POSITIVE_INT,
        vol.Optional("snr_grid", default=list(DEFAULT_SNR_GRID)): vol.All(
            [_SNR], vol.Length(min=1)
        ),
        vol.Optional("seed", default=DEFAULT_SEED): vol.All(int, vol.Range(min=0)),
    }
)

TFR_SCHEMA = vol.Schema(
    {
        vol.Optional("kernel", default=DEFAULT_KERNEL): vol.In(KERNELS),
        vol.Optional("alpha", default=DEFAULT_ALPHA): vol.All(
            vol.Coerce(float), vol.Range(min=0.0, min_included=False)
        ),
        vol.Optional("lag_window", default=DEFAULT_LAG_WINDOW): _POSITIVE_INT,
        vol.Optional("time_step", default=DEFAULT_TIME_STEP): _POSITIVE_INT,
        vol.Optional("image_size", default=list(DEFAULT_IMAGE_SIZE)): vol.All(
            [_POSITIVE_INT], vol.Length(min=2, max=2)
        ),
        vol.Optional("sweep_alphas", default=[0.1, 1.0, 10.0]): [
            vol.All(vol.Coerce(float), vol.Range(min=0.0, min_included=False))
        ],
    }
)

MODEL_SCHEMA = vol.Schema(
    {
        vol.Optional("head", default=HEAD_LSTM): vol.In((HEAD_LSTM, HEAD_DENSE)),
        vol.Optional("lstm_hidden", default=10): _POSITIVE_INT,
        vol.Optional("learning_rate", default=DEFAULT_LEARNING_RATE): vol.All(
            vol.Coerce(float), vol.Range(min=0.0)
        ),
        vol.Optional("epochs", default=DEFAULT_EPOCHS): _POSITIVE_INT,
        vol.Optional("batch_size", default=DEFAULT_BATCH_SIZE): _POSITIVE_INT,
        vol.Optional("split", default=list(DEFAULT_SPLIT)): vol.All(
            [vol.Coerce(float)], _split_fractions
        ),
        vol.Optional("seed", default=DEFAULT_SEED): vol.All(int, vol.Range(min=0)),
        vol.Optional("save_best", default=True): bool,
        vol.Optional("batch_norm", default=True): bool,
    }
)

CURATION_SCHEMA = vol.All(
    vol.Schema(
        {
            vol.Optional("runs", default=DEFAULT_ERROR_RATE_RUNS): vol.All(
                int, vol.Range(min=2)
            ),
            vol.Optional("augment_threshold", default=DEFAULT_AUGMENT_THRESHOLD): _FRACTION,
            vol.Optional("exclude_threshold", default=DEFAULT_EXCLUDE_THRESHOLD): _FRACTION,
            vol.Optional("variants_per_sample", default=DEFAULT_VARIANTS_PER_SAMPLE): _POSITIVE_INT,
            vol.Optional("max_class_imbalance", default=DEFAULT_MAX_CLASS_IMBALANCE): vol.All(
                vol.Coerce(float), vol.Range(min=0.0)
            ),
            vol.Optional("max_growth", default=DEFAULT_MAX_GROWTH): vol.All(
                vol.Coerce(float), vol.Range(min=0.0)
            ),
            vol.Optional("shift_fraction", default=SHIFT_FRACTION): vol.All(
                vol.Coerce(float), vol.Range(min=0.0, max=0.5)
            ),
            vol.Optional("carrier_jitter", default=CARRIER_JITTER): vol.All(
                vol.Coerce(float), vol.Range(min=0.0, max=0.05)
            ),
            vol.Optional("jitter_probability", default=0.5): _FRACTION,
        }
    ),
    _ordered_thresholds,
)

EVAL_SCHEMA = vol.Schema(
    {
        vol.Optional("variance_runs", default=DEFAULT_VARIANCE_RUNS): vol.All(
            int, vol.Range(min=0)
        ),
        vol.Optional("variance_snr", default=0.0): _SNR,
        vol.Optional("ablation_seeds", default=DEFAULT_ABLATION_SEEDS): vol.All(
            int, vol.Range(min=0)
        ),
        vol.Optional("ablation_snr", default=None): vol.Any(None, [_SNR]),
        vol.Optional("kernel_sweep_snr", default=None): vol.Any(None, _SNR),
        vol.Optional("bench_batches", default=list(DEFAULT_BENCH_BATCHES)): vol.All(
            [_POSITIVE_INT], vol.Length(min=1)
        ),
        vol.Optional("bench_repetitions", default=DEFAULT_BENCH_REPETITIONS): _POSITIVE_INT,
        vol.Optional("bench_threads", default=BENCH_THREADS): _POSITIVE_INT,
    }
)

PIPELINE_SCHEMA = vol.Schema(
    {
        vol.Optional(CONF_OUTPUT, default=None): vol.Any(None, str),
        vol.Optional(CONF_JOBS, default=1): vol.All(int, vol.Range(min=1, max=MAX_JOBS)),
        vol.Optional(CONF_DATASET, default={}): DATASET_SCHEMA,
        vol.Optional(CONF_TFR, default={}): TFR_SCHEMA,
        vol.Optional(CONF_MODEL, default={}): MODEL_SCHEMA,
        vol.Optional(CONF_CURATION, default={}): CURATION_SCHEMA,
        vol.Optional(CONF_EVAL, default={}): EVAL_SCHEMA,
    },
    extra=vol.PREVENT_EXTRA,
)


@dataclass(frozen=True)
class EvalSettings:
    """Experiment sizes for evaluation, reporting and benchmarking."""

    variance_runs: int = DEFAULT_VARIANCE_RUNS
    variance_snr: float = 0.0
    ablation_seeds: int = DEFAULT_ABLATION_SEEDS
    ablation_snr: tuple[float, ...] | None = None
    kernel_sweep_snr: float | None = None
    bench_batches: tuple[int, ...] = DEFAULT_BENCH_BATCHES
    bench_repetitions: int = DEFAULT_BENCH_REPETITIONS
    bench_threads: int = BENCH_THREADS


@dataclass(frozen=True)
class PipelineConfig:
    """Validated configuration of every pipeline stage."""

    data: dict[str, Any]
    output: Path
    jobs: int
    dataset: DatasetConfig
    tfr: TfrConfig
    train: TrainConfig
    curation: CurationPolicy
    error_rate_runs: int
    evaluation: EvalSettings
    sweep_alphas: tuple[float, ...] = field(default=(0.1, 1.0, 10.0))

    def section_hash(self, *sections: str) -> str:
        """Return a stable hash of some sections (all when none given)."""
        names = sections or tuple(k for k in self.data if k not in (CONF_OUTPUT, CONF_JOBS))
        return config_hash({name: self.data[name] for name in names})

    def to_yaml(self) -> str:
        """Render the effective configuration as YAML."""
        return yaml.safe_dump(self.data, sort_keys=True, default_flow_style=False)


def set_dotted(data: dict[str, Any], dotted: str, value: Any) -> None:
    """Set ``data['a']['b'] = value`` for the key ``'a.b'``."""
    *parents, leaf = dotted.split(".")
    node = data
    for part in parents:
        child = node.setdefault(part, {})
        if not isinstance(child, dict):
            raise ConfigError(f"cannot override {dotted}: {part} is not a section")
        node = child
    node[leaf] = value


def validate_config(raw: Mapping[str, Any] | None) -> dict[str, Any]:
    """Validate raw settings, filling every default.

    Raises:
        ConfigError: With a readable message for unknown keys or bad values.
    """
    raw = dict(raw or {})
    try:
        return PIPELINE_SCHEMA(raw)
    except vol.Invalid as err:
        raise ConfigError(f"invalid configuration: {humanize_error(raw, err)}") from err


def read_config_file(path: Path) -> dict[str, Any]:
    """Read a YAML config file (an empty file means all defaults)."""
    try:
        loaded = yaml.safe_load(Path(path).read_text(encoding="utf-8"))
    except FileNotFoundError as err:
        raise ConfigError(f"config file {path} does not exist") from err
    except yaml.YAMLError as err:
        raise ConfigError(f"config file {path} is not valid YAML: {err}") from err
    if loaded is None:
        return {}
    if not isinstance(loaded, dict):
        raise ConfigError(f"config file {path} must hold a mapping")
    return loaded


def build_config(data: dict[str, Any]) -> PipelineConfig:
    """Turn validated settings into the typed stage configurations."""
    model, tfr, cur, ev = data[CONF_MODEL], data[CONF_TFR], data[CONF_CURATION], data[CONF_EVAL]
    output = data[CONF_OUTPUT] or os.environ.get(ENV_OUTPUT_ROOT) or DEFAULT_OUTPUT_ROOT
    architecture = ArchitectureSpec(
        input_shape=tuple(tfr["image_size"]),
        head=model["head"],
        lstm_hidden=model["lstm_hidden"],
        batch_norm=model["batch_norm"],
        budget=None if tuple(tfr["image_size"]) != DEFAULT_IMAGE_SIZE else ArchitectureSpec().budget,
    )
    return PipelineConfig(
        data=data,
        output=Path(output),
        jobs=data[CONF_JOBS],
        dataset=DatasetConfig(
            per_class_count=data[CONF_DATASET]["per_class_count"],
            snr_grid=tuple(data[CONF_DATASET]["snr_grid"]),
            seed=data[CONF_DATASET]["seed"],
        ),
        tfr=TfrConfig(
            kernel=KernelSpec(
                kind=tfr["kernel"],
                alpha=tfr["alpha"],
                lag_window=tfr["lag_window"],
                time_step=tfr["time_step"],
            ),
            image_size=tuple(tfr["image_size"]),
        ),
        train=TrainConfig(
            learning_rate=model["learning_rate"],
            epochs=model["epochs"],
            batch_size=model["batch_size"],
            split=tuple(model["split"]),
            seed=model["seed"],
            save_best=model["save_best"],
            batch_norm=model["batch_norm"],
            architecture=architecture,
        ),
        curation=CurationPolicy(
            augment_threshold=cur["augment_threshold"],
            exclude_threshold=cur["exclude_threshold"],
            variants_per_sample=cur["variants_per_sample"],
            max_class_imbalance=cur["max_class_imbalance"],
            max_growth=cur["max_growth"],
            shift_fraction=cur["shift_fraction"],
            carrier_jitter=cur["carrier_jitter"],
            jitter_probability=cur["jitter_probability"],
        ),
        error_rate_runs=cur["runs"],
        evaluation=EvalSettings(
            variance_runs=ev["variance_runs"],
            variance_snr=ev["variance_snr"],
            ablation_seeds=ev["ablation_seeds"],
            ablation_snr=None if ev["ablation_snr"] is None else tuple(ev["ablation_snr"]),
            kernel_sweep_snr=ev["kernel_sweep_snr"],
            bench_batches=tuple(ev["bench_batches"]),
            bench_repetitions=ev["bench_repetitions"],
            bench_threads=ev["bench_threads"],
        ),
        sweep_alphas=tuple(tfr["sweep_alphas"]),
    )


def load_config(
    path: Path | None = None, overrides: Mapping[str, Any] | None = None
) -> PipelineConfig:
    """Load, override and validate the pipeline configuration.

    Flag overrides use dotted keys (``"model.epochs"``) and win over the file.
    """
    raw = read_config_file(path) if path is not None else {}
    raw = copy.deepcopy(raw)
    for dotted, value in (overrides or {}).items():
        if value is not None:
            set_dotted(raw, dotted, value)
    data = validate_config(raw)
    config = build_config(data)
    _LOGGER.debug("Effective configuration hash %s", config.section_hash())
    return config
