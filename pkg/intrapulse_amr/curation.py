"""Sample-specific error rates and targeted augmentation.

Repeated refold-and-train runs tally how often every sample is
misclassified while it sits in the test partition. Samples that are almost
always wrong are dropped from training; samples that are often wrong get
physically conservative variants (circular time shift, carrier jitter,
fresh noise at the same SNR) synthesized from their clean parent.
"""

from __future__ import annotations

from collections import Counter
from collections.abc import Mapping, Sequence
import dataclasses
from dataclasses import dataclass, field
import logging
import math
from pathlib import Path
from typing import Any, Final

import numpy as np

from .const import (
    CARRIER_JITTER,
    DEFAULT_AUGMENT_THRESHOLD,
    DEFAULT_ERROR_RATE_RUNS,
    DEFAULT_EXCLUDE_THRESHOLD,
    DEFAULT_MAX_CLASS_IMBALANCE,
    DEFAULT_MAX_GROWTH,
    DEFAULT_VARIANTS_PER_SAMPLE,
    FORMAT_VERSION,
    JITTER_MAX_REJECTIONS,
    LOGGER_NAME,
    NUM_CLASSES,
    NYQUIST,
    PROVENANCE_AUGMENTED,
    PULSE_LENGTH,
    REPORT_MAGIC,
    SHIFT_FRACTION,
)
from .coordinator import ExperimentCoordinator
from .exceptions import ConfigError, ContainerError, DataError, InsufficientReplicationError
from .model import AugmentPool, TrainConfig, evaluate, fit
from .siggen import (
    Dataset,
    ModulationClass,
    ModulationParams,
    Waveform,
    add_awgn,
    instantaneous_frequency,
    synthesize,
    write_dataset,
)
from .storage import check_header, config_hash, read_json, write_json
from .tfr import TfrConfig, waveform_image

_LOGGER: Final = logging.getLogger(LOGGER_NAME)

FOLD_SEED_STRIDE: Final = 1000
ERROR_RATES_KIND: Final = "error_rates"


@dataclass(frozen=True)
class CurationPolicy:
    """Thresholds and augmentation bounds."""

    augment_threshold: float = DEFAULT_AUGMENT_THRESHOLD
    exclude_threshold: float = DEFAULT_EXCLUDE_THRESHOLD
    variants_per_sample: int = DEFAULT_VARIANTS_PER_SAMPLE
    max_class_imbalance: float = DEFAULT_MAX_CLASS_IMBALANCE
    max_growth: float = DEFAULT_MAX_GROWTH
    shift_fraction: float = SHIFT_FRACTION
    carrier_jitter: float = CARRIER_JITTER
    jitter_probability: float = 0.5
    renoise: bool = True

    def __post_init__(self) -> None:
        """Validate threshold ordering and bounds."""
        if not 0 <= self.augment_threshold <= self.exclude_threshold <= 1:
            raise ConfigError(
                "thresholds must satisfy 0 <= augment_threshold <= exclude_threshold <= 1"
            )
        if self.variants_per_sample < 1:
            raise ConfigError("variants_per_sample must be at least 1")
        if self.max_class_imbalance < 0 or self.max_growth < 0:
            raise ConfigError("max_class_imbalance and max_growth must not be negative")
        if not 0 <= self.shift_fraction <= 0.5 or self.carrier_jitter < 0:
            raise ConfigError("shift_fraction must lie in [0, 0.5] and carrier_jitter >= 0")
        if not 0 <= self.jitter_probability <= 1:
            raise ConfigError("jitter_probability must lie in [0, 1]")

    def to_dict(self) -> dict[str, Any]:
        """Return a JSON-ready dict."""
        return dataclasses.asdict(self)


@dataclass(frozen=True)
class SampleErrorRate:
    """Test-partition tally for one sample."""

    sample_id: int
    label: int
    times_in_test: int
    times_misclassified: int
    most_confused_with: int | None = None

    @property
    def error_rate(self) -> float | None:
        """Return the misclassification ratio, None if never tested."""
        if self.times_in_test == 0:
            return None
        return self.times_misclassified / self.times_in_test

    def to_dict(self) -> dict[str, Any]:
        """Return a JSON-ready dict."""
        return {
            "sample_id": self.sample_id,
            "class": ModulationClass(self.label).tag,
            "times_in_test": self.times_in_test,
            "times_misclassified": self.times_misclassified,
            "error_rate": self.error_rate,
            "most_confused_with": (
                None
                if self.most_confused_with is None
                else ModulationClass(self.most_confused_with).tag
            ),
        }


@dataclass
class ErrorRateReport:
    """Per-sample error rates from repeated refold runs."""

    entries: dict[int, SampleErrorRate]
    runs: int
    test_size: int
    config_hash: str
    snr_db: float | None = None

    def rate(self, sample_id: int) -> float | None:
        """Return a sample's error rate (None if unknown or never tested)."""
        entry = self.entries.get(sample_id)
        return None if entry is None else entry.error_rate

    def ranked(self) -> list[SampleErrorRate]:
        """Return entries by descending error rate, untested last."""
        return sorted(
            self.entries.values(),
            key=lambda e: (e.error_rate is None, -(e.error_rate or 0.0), e.sample_id),
        )

    def to_dict(self) -> dict[str, Any]:
        """Return the JSON document."""
        return {
            "magic": REPORT_MAGIC,
            "format_version": FORMAT_VERSION,
            "kind": ERROR_RATES_KIND,
            "runs": self.runs,
            "test_size": self.test_size,
            "config_hash": self.config_hash,
            "snr_db": self.snr_db,
            "samples": [e.to_dict() for e in self.ranked()],
        }

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> ErrorRateReport:
        """Parse a JSON document written by :meth:`to_dict`."""
        entries = {}
        for item in data["samples"]:
            confused = item.get("most_confused_with")
            entry = SampleErrorRate(
                sample_id=int(item["sample_id"]),
                label=int(ModulationClass.from_tag(item["class"])),
                times_in_test=int(item["times_in_test"]),
                times_misclassified=int(item["times_misclassified"]),
                most_confused_with=(
                    None if confused is None else int(ModulationClass.from_tag(confused))
                ),
            )
            entries[entry.sample_id] = entry
        return cls(
            entries=entries,
            runs=int(data["runs"]),
            test_size=int(data["test_size"]),
            config_hash=data["config_hash"],
            snr_db=data.get("snr_db"),
        )


def write_error_report(report: ErrorRateReport, path: Path) -> None:
    """Write an error-rate report as JSON."""
    write_json(Path(path), report.to_dict())


def read_error_report(path: Path) -> ErrorRateReport:
    """Read an error-rate report."""
    data = read_json(Path(path))
    check_header(data, REPORT_MAGIC, path)
    if data.get("kind") != ERROR_RATES_KIND:
        raise ContainerError(f"{path} is not an error-rate report")
    try:
        return ErrorRateReport.from_dict(data)
    except (KeyError, TypeError, ValueError, DataError) as err:
        raise ContainerError(f"{path}: malformed error-rate report: {err}") from err


def fold_seed(base_seed: int, run: int) -> int:
    """Return the split/initialization seed of refold run ``run``."""
    return base_seed + FOLD_SEED_STRIDE * (run + 1)


def error_rate_run(
    images: np.ndarray, labels: np.ndarray, sample_ids: np.ndarray, config: TrainConfig
) -> tuple[np.ndarray, np.ndarray]:
    """Train once and return ``(test sample ids, test predictions)``."""
    result = fit(images, labels, config, sample_ids=sample_ids)
    test = result.split.test
    scored = evaluate(result.model, images[test], labels[test])
    return sample_ids[test], scored.predictions


def tally_error_rates(
    sample_ids: np.ndarray,
    labels: np.ndarray,
    run_outputs: Sequence[tuple[np.ndarray, np.ndarray]],
    report_hash: str,
    snr_db: float | None = None,
) -> ErrorRateReport:
    """Reduce per-run test predictions into per-sample error rates."""
    label_of = {int(s): int(c) for s, c in zip(sample_ids, labels, strict=True)}
    in_test: Counter[int] = Counter()
    wrong: dict[int, Counter[int]] = {s: Counter() for s in label_of}
    test_size = 0
    for test_ids, predictions in run_outputs:
        test_size = len(test_ids)
        for sid, pred in zip(test_ids, predictions, strict=True):
            sid, pred = int(sid), int(pred)
            in_test[sid] += 1
            if pred != label_of[sid]:
                wrong[sid][pred] += 1
    entries = {}
    for sid, label in label_of.items():
        confusions = wrong[sid]
        # Ties go to the lowest class index
        confused = min(confusions, key=lambda c: (-confusions[c], c)) if confusions else None
        entries[sid] = SampleErrorRate(
            sample_id=sid,
            label=label,
            times_in_test=in_test[sid],
            times_misclassified=sum(confusions.values()),
            most_confused_with=confused,
        )
    never = sum(1 for e in entries.values() if e.times_in_test == 0)
    if never:
        _LOGGER.warning("%d samples never landed in a test partition", never)
    return ErrorRateReport(
        entries=entries,
        runs=len(run_outputs),
        test_size=test_size,
        config_hash=report_hash,
        snr_db=snr_db,
    )


async def async_per_sample_error_rates(
    coordinator: ExperimentCoordinator,
    images: np.ndarray,
    labels: np.ndarray,
    sample_ids: np.ndarray,
    config: TrainConfig,
    runs: int = DEFAULT_ERROR_RATE_RUNS,
    snr_db: float | None = None,
) -> ErrorRateReport:
    """Tally test-partition misclassifications over ``runs`` refold runs.

    Raises:
        InsufficientReplicationError: If ``runs < 2``.
    """
    if runs < 2:
        raise InsufficientReplicationError(f"insufficient replication: {runs} run(s), need >= 2")
    sample_ids = np.asarray(sample_ids, dtype=np.int64)
    labels = np.asarray(labels, dtype=np.int64)
    jobs = [
        (images, labels, sample_ids, config.replace(seed=fold_seed(config.seed, run)))
        for run in range(runs)
    ]
    _LOGGER.info("Estimating error rates of %d samples over %d runs", len(labels), runs)
    outputs = await coordinator.async_map(error_rate_run, jobs)
    report_hash = config_hash({"train": config.to_dict(), "runs": runs})
    return tally_error_rates(sample_ids, labels, outputs, report_hash, snr_db)


@dataclass(frozen=True)
class Partition:
    """Disjoint keep / augment / exclude sets of sample ids."""

    keep: frozenset[int] = field(default_factory=frozenset)
    augment: frozenset[int] = field(default_factory=frozenset)
    exclude: frozenset[int] = field(default_factory=frozenset)

    def to_dict(self) -> dict[str, list[int]]:
        """Return sorted id lists."""
        return {
            "keep": sorted(self.keep),
            "augment": sorted(self.augment),
            "exclude": sorted(self.exclude),
        }


def classify_samples(report: ErrorRateReport, policy: CurationPolicy) -> Partition:
    """Partition samples by error rate; untested samples are kept."""
    keep, augment, exclude = set(), set(), set()
    for sid, entry in report.entries.items():
        rate = entry.error_rate
        if rate is not None and rate >= policy.exclude_threshold:
            exclude.add(sid)
        elif rate is not None and rate >= policy.augment_threshold:
            augment.add(sid)
        else:
            keep.add(sid)
    return Partition(frozenset(keep), frozenset(augment), frozenset(exclude))


def jitter_params(params: ModulationParams, offset: float) -> ModulationParams:
    """Shift every carrier frequency of ``params`` by ``offset``."""
    if params.cls is ModulationClass.BFSK:
        return dataclasses.replace(params, f1=params.f1 + offset, f2=params.f2 + offset)
    return dataclasses.replace(params, f0=params.f0 + offset)


def _jittered(
    params: ModulationParams, policy: CurationPolicy, rng: np.random.Generator
) -> ModulationParams | None:
    for _ in range(JITTER_MAX_REJECTIONS):
        candidate = jitter_params(
            params, float(rng.uniform(-policy.carrier_jitter, policy.carrier_jitter))
        )
        track = instantaneous_frequency(candidate)
        if track.min() > 0 and track.max() < NYQUIST:
            return candidate
    return None


def augment(
    parent: Waveform,
    policy: CurationPolicy,
    rng: np.random.Generator,
    k: int | None = None,
    snr_db: float | None = None,
) -> list[Waveform]:
    """Return ``k`` label-preserving variants of a clean parent.

    Every variant is circularly shifted by up to ``shift_fraction * T``;
    with probability ``jitter_probability`` its carrier is offset by up to
    ``carrier_jitter``; it is then re-noised at ``snr_db`` when given.
    """
    if not parent.is_clean:
        raise DataError(f"sample {parent.sample_id}: augmentation needs the clean parent")
    count = policy.variants_per_sample if k is None else k
    bound = int(policy.shift_fraction * PULSE_LENGTH)
    variants = []
    for _ in range(count):
        shift = int(rng.integers(-bound, bound + 1))
        params = parent.params
        if policy.carrier_jitter > 0 and rng.random() < policy.jitter_probability:
            jittered = _jittered(params, policy, rng)
            if jittered is None:
                _LOGGER.warning(
                    "Sample %d: carrier jitter infeasible, using shift and noise only",
                    parent.sample_id,
                )
            else:
                params = jittered
        clean = synthesize(params, sample_id=parent.sample_id)
        variant = dataclasses.replace(
            clean,
            samples=np.roll(clean.samples, shift),
            parent_id=parent.sample_id,
            provenance=PROVENANCE_AUGMENTED,
        )
        if policy.renoise and snr_db is not None:
            variant = add_awgn(variant, snr_db, rng)
        variants.append(variant)
    return variants


def _class_totals(plan: Mapping[int, int], labels_by_id: Mapping[int, int]) -> Counter[int]:
    totals: Counter[int] = Counter()
    for sid, count in plan.items():
        totals[labels_by_id[sid]] += count
    return totals


def plan_augmentation(
    report: ErrorRateReport,
    partition: Partition,
    labels_by_id: Mapping[int, int],
    policy: CurationPolicy,
) -> dict[int, int]:
    """Decide how many variants every sample gets.

    Flagged samples request ``k`` variants each. Class totals are capped at
    ``max_growth`` times the class size. Only flagged samples
    receive variants; the largest grown class is then trimmed to at most
    ``1 + max_class_imbalance`` times the smallest.
    """

    def priority(sid: int) -> tuple[float, int]:
        rate = report.rate(sid)
        return (-(rate if rate is not None else -1.0), sid)

    sizes = Counter(labels_by_id.values())
    caps = {c: math.floor(policy.max_growth * n) for c, n in sizes.items()}
    plan = {
        sid: policy.variants_per_sample
        for sid in sorted(partition.augment, key=priority)
        if sid in labels_by_id
    }
    if not plan:
        return {}

    def trim(cls: int, limit: int) -> None:
        members = sorted((s for s in plan if labels_by_id[s] == cls), key=priority)
        excess = _class_totals(plan, labels_by_id)[cls] - limit
        while excess > 0 and members:
            victim = members[-1]
            plan[victim] -= 1
            excess -= 1
            if plan[victim] == 0:
                del plan[victim]
                members.pop()

    for cls, cap in caps.items():
        trim(cls, cap)

    while True:
        totals = _class_totals(plan, labels_by_id)
        grown = {c: sizes[c] + totals[c] for c in sizes}
        largest = max(grown, key=lambda c: (grown[c], c))
        if grown[largest] <= (1 + policy.max_class_imbalance) * min(grown.values()):
            break
        if totals[largest] == 0:
            break
        trim(largest, totals[largest] - 1)
    return dict(sorted(plan.items()))


@dataclass
class AugmentResult:
    """Variant waveforms plus their classifier images."""

    pool: AugmentPool
    variants: list[Waveform]


def build_augment_pool(
    dataset: Dataset,
    plan: Mapping[int, int],
    policy: CurationPolicy,
    tfr_config: TfrConfig,
    seed: int,
) -> AugmentResult:
    """Synthesize and transform the planned variants.

    Each parent draws from its own stream derived from ``seed`` and its
    sample id, and variants keep the parent's SNR.
    """
    index_of = {r.sample_id: i for i, r in enumerate(dataset.records)}
    variants: list[Waveform] = []
    for sid in sorted(plan):
        if sid not in index_of:
            raise DataError(f"planned sample {sid} is not in the dataset")
        index = index_of[sid]
        record = dataset.records[index]
        parent = dataset.clean_parent(index)
        rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(sid,)))
        variants.extend(augment(parent, policy, rng, plan[sid], snr_db=record.snr_db))
    height, width = tfr_config.image_size
    images = np.empty((len(variants), height, width), dtype=np.float32)
    for row, variant in enumerate(variants):
        images[row] = waveform_image(variant.samples, tfr_config)
    _LOGGER.info("Built %d augmented variants from %d parents", len(variants), len(plan))
    pool = AugmentPool(
        images=images,
        labels=np.array([int(v.cls) for v in variants], dtype=np.int64),
        parent_ids=np.array([v.parent_id for v in variants], dtype=np.int64),
    )
    return AugmentResult(pool=pool, variants=variants)


def write_curated_dataset(dataset: Dataset, variants: Sequence[Waveform], path: Path) -> Dataset:
    """Write ``dataset`` plus augmented variants as a new container."""
    curated = dataset.extend(variants)
    write_dataset(curated, Path(path))
    return curated


def class_balance(plan: Mapping[int, int], labels_by_id: Mapping[int, int]) -> dict[str, int]:
    """Return total training records per class after augmentation."""
    sizes = Counter(labels_by_id.values())
    totals = _class_totals(plan, labels_by_id)
    return {ModulationClass(c).tag: sizes[c] + totals[c] for c in range(NUM_CLASSES) if sizes[c]}
