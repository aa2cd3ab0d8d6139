"""Tests for error-rate estimation and targeted augmentation."""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np
import pytest

from intrapulse_amr.const import PROVENANCE_AUGMENTED, PULSE_LENGTH
from intrapulse_amr.coordinator import ExperimentCoordinator
from intrapulse_amr.curation import (
    CurationPolicy,
    ErrorRateReport,
    Partition,
    SampleErrorRate,
    async_per_sample_error_rates,
    augment,
    build_augment_pool,
    class_balance,
    classify_samples,
    fold_seed,
    plan_augmentation,
    read_error_report,
    tally_error_rates,
    write_curated_dataset,
    write_error_report,
)
from intrapulse_amr.exceptions import (
    ConfigError,
    ContainerError,
    DataError,
    InsufficientReplicationError,
)
from intrapulse_amr.model import TrainConfig
from intrapulse_amr.siggen import (
    Dataset,
    ModulationClass,
    ModulationParams,
    add_awgn,
    instantaneous_frequency,
    read_dataset,
    sample_params,
    synthesize,
)
from intrapulse_amr.tfr import ImageCache, TfrConfig

from .conftest import MOCK_IMAGE_SIZE, MOCK_SEED


def _report(rates: dict[int, float | None], labels: dict[int, int]) -> ErrorRateReport:
    """Build a report from exact rates over ten runs."""
    entries = {}
    for sid, rate in rates.items():
        tested = 0 if rate is None else 10
        entries[sid] = SampleErrorRate(
            sample_id=sid,
            label=labels[sid],
            times_in_test=tested,
            times_misclassified=0 if rate is None else round(rate * 10),
        )
    return ErrorRateReport(entries=entries, runs=10, test_size=22, config_hash="abc")


def _balanced_labels(per_class: int = 10) -> dict[int, int]:
    return {c * 100 + i: c for c in range(11) for i in range(per_class)}


# ---- Error rates ----


def test_tally_error_rates() -> None:
    """Test misclassifications are counted only while in test."""
    ids = np.array([10, 11, 12, 13])
    labels = np.array([0, 1, 2, 3])
    outputs = [
        (np.array([10, 11]), np.array([0, 2])),
        (np.array([11, 12]), np.array([2, 2])),
    ]
    report = tally_error_rates(ids, labels, outputs, "hash", snr_db=0.0)
    assert report.rate(10) == 0.0
    assert report.rate(11) == 1.0
    assert report.entries[11].most_confused_with == 2
    assert report.rate(12) == 0.0
    assert report.rate(13) is None
    assert report.runs == 2
    assert report.test_size == 2
    assert [e.sample_id for e in report.ranked()][0] == 11
    assert report.ranked()[-1].sample_id == 13


def test_tally_confusion_tie_goes_to_lowest_class() -> None:
    """Test ties between confusing classes resolve to the lowest index."""
    outputs = [(np.array([5]), np.array([7])), (np.array([5]), np.array([4]))]
    report = tally_error_rates(np.array([5]), np.array([0]), outputs, "hash")
    assert report.entries[5].most_confused_with == 4


def test_error_report_roundtrip(tmp_path: Path) -> None:
    """Test an error-rate report survives JSON."""
    outputs = [(np.array([1, 2]), np.array([3, 1])), (np.array([1, 2]), np.array([0, 0]))]
    report = tally_error_rates(np.array([1, 2]), np.array([0, 1]), outputs, "hash", 5.0)
    write_error_report(report, tmp_path / "rates.json")
    loaded = read_error_report(tmp_path / "rates.json")
    assert loaded.entries == report.entries
    assert loaded.snr_db == 5.0
    data = json.loads((tmp_path / "rates.json").read_text())
    assert data["samples"][0]["class"] == "BFSK"


def test_error_report_wrong_kind(tmp_path: Path) -> None:
    """Test other report documents are refused."""
    report = _report({1: 0.5}, {1: 0})
    data = report.to_dict()
    data["kind"] = "latency"
    (tmp_path / "rates.json").write_text(json.dumps(data))
    with pytest.raises(ContainerError, match="not an error-rate report"):
        read_error_report(tmp_path / "rates.json")


def test_fold_seeds_differ() -> None:
    """Test refold runs get distinct seeds."""
    assert len({fold_seed(7, run) for run in range(10)}) == 10


async def test_error_rates_need_replication(
    small_cache: ImageCache, train_config: TrainConfig
) -> None:
    """Test a single run is refused."""
    level = small_cache.at_snr(0.0)
    async with ExperimentCoordinator(1) as coordinator:
        with pytest.raises(InsufficientReplicationError, match="insufficient replication"):
            await async_per_sample_error_rates(
                coordinator, level.images, level.labels, level.sample_ids, train_config, runs=1
            )


async def test_error_rates_over_runs(small_cache: ImageCache, train_config: TrainConfig) -> None:
    """Test two refold runs put 2 x test_size samples through the test partition."""
    level = small_cache.at_snr(0.0)
    async with ExperimentCoordinator(1) as coordinator:
        report = await async_per_sample_error_rates(
            coordinator,
            level.images,
            level.labels,
            level.sample_ids,
            train_config,
            runs=2,
            snr_db=0.0,
        )
    assert len(report.entries) == len(level)
    assert report.test_size == 11
    assert sum(e.times_in_test for e in report.entries.values()) == 22
    for entry in report.entries.values():
        assert entry.times_misclassified <= entry.times_in_test


# ---- Partition ----


def test_classify_thresholds() -> None:
    """Test the augment and exclude thresholds are inclusive."""
    labels = dict.fromkeys(range(5), 0)
    report = _report({0: 0.0, 1: 0.4, 2: 0.5, 3: 0.9, 4: None}, labels)
    partition = classify_samples(report, CurationPolicy())
    assert partition.keep == {0, 1, 4}
    assert partition.augment == {2}
    assert partition.exclude == {3}
    assert partition.to_dict() == {"keep": [0, 1, 4], "augment": [2], "exclude": [3]}


@pytest.mark.parametrize(
    "kwargs",
    [
        {"augment_threshold": 0.95},
        {"variants_per_sample": 0},
        {"max_growth": -1.0},
        {"shift_fraction": 0.75},
        {"jitter_probability": 2.0},
    ],
)
def test_policy_validation(kwargs: dict) -> None:
    """Test inconsistent policies are rejected."""
    with pytest.raises(ConfigError):
        CurationPolicy(**kwargs)


# ---- augment ----


def test_augment_preserves_label_and_power() -> None:
    """Test variants keep the class, the parent link and the signal power."""
    parent = synthesize(sample_params(ModulationClass.FRANK, np.random.default_rng(MOCK_SEED)), 42)
    policy = CurationPolicy(renoise=False, jitter_probability=1.0)
    variants = augment(parent, policy, np.random.default_rng(1), k=6)
    assert len(variants) == 6
    parent_power = np.mean(parent.samples**2)
    for variant in variants:
        assert variant.cls is ModulationClass.FRANK
        assert variant.parent_id == 42
        assert variant.provenance == PROVENANCE_AUGMENTED
        assert variant.samples.shape == (PULSE_LENGTH,)
        assert np.mean(variant.samples**2) == pytest.approx(parent_power, abs=0.02)
        track = instantaneous_frequency(variant.params)
        assert track.min() > 0.0
        assert track.max() < 0.5


def test_augment_shift_only() -> None:
    """Test without jitter or noise a variant is a bounded circular shift."""
    parent = synthesize(ModulationParams(cls=ModulationClass.P4, f0=0.2, code_len=8))
    policy = CurationPolicy(renoise=False, carrier_jitter=0.0)
    (variant,) = augment(parent, policy, np.random.default_rng(2), k=1)
    bound = PULSE_LENGTH // 8
    matches = [
        s for s in range(-bound, bound + 1) if np.array_equal(variant.samples, np.roll(parent.samples, s))
    ]
    assert matches


def test_augment_renoise_keeps_snr() -> None:
    """Test variants are re-noised at the requested SNR."""
    parent = synthesize(ModulationParams(cls=ModulationClass.P3, f0=0.2, code_len=6))
    variants = augment(parent, CurationPolicy(), np.random.default_rng(3), k=2, snr_db=-5.0)
    assert all(v.snr_db == -5.0 for v in variants)


def test_augment_needs_clean_parent() -> None:
    """Test noisy parents are refused."""
    parent = synthesize(ModulationParams(cls=ModulationClass.P3, f0=0.2, code_len=6))
    noisy = add_awgn(parent, 0.0, np.random.default_rng(0))
    with pytest.raises(DataError, match="clean parent"):
        augment(noisy, CurationPolicy(), np.random.default_rng(0))


# ---- Planning ----


def test_plan_variants_only_for_flagged_samples() -> None:
    """Test the default plan gives variants only to augment-partition samples."""
    labels = _balanced_labels()
    rates = dict.fromkeys(labels, 0.1)
    rates.update({0: 0.6, 1: 0.7, 100: 0.5, 5: 0.95})
    report = _report(rates, labels)
    partition = classify_samples(report, CurationPolicy())
    plan = plan_augmentation(report, partition, labels, CurationPolicy())
    assert set(plan) <= partition.augment
    assert not set(plan) & partition.keep
    assert 5 not in plan
    assert plan == {1: 1, 100: 1}
    grown = class_balance(plan, labels)
    assert max(grown.values()) <= 1.1 * min(grown.values())


def test_plan_single_flagged_sample() -> None:
    """Test one hard sample does not pull kept samples of other classes into the plan."""
    labels = _balanced_labels()
    report = _report({**dict.fromkeys(labels, 0.0), 0: 0.6}, labels)
    partition = classify_samples(report, CurationPolicy())
    plan = plan_augmentation(report, partition, labels, CurationPolicy())
    assert plan == {0: 1}
    assert partition.keep.isdisjoint(plan)


def test_plan_respects_imbalance() -> None:
    """Test trimming keeps the largest class within the imbalance bound."""
    labels = _balanced_labels()
    report = _report({**dict.fromkeys(labels, 0.0), 0: 0.6, 1: 0.6, 100: 0.6}, labels)
    policy = CurationPolicy()
    plan = plan_augmentation(report, classify_samples(report, policy), labels, policy)
    grown = class_balance(plan, labels)
    assert max(grown.values()) <= 1.1 * min(grown.values())


def test_plan_growth_cap() -> None:
    """Test no class grows beyond max_growth times its size."""
    labels = _balanced_labels()
    report = _report({**dict.fromkeys(labels, 0.6)}, labels)
    policy = CurationPolicy(max_growth=0.5)
    plan = plan_augmentation(report, classify_samples(report, policy), labels, policy)
    assert set(class_balance(plan, labels).values()) == {15}


def test_plan_empty_when_nothing_flagged() -> None:
    """Test a clean report plans no variants."""
    labels = _balanced_labels(3)
    report = _report(dict.fromkeys(labels, 0.0), labels)
    assert plan_augmentation(report, Partition(keep=frozenset(labels)), labels, CurationPolicy()) == {}


# ---- Pool ----


def test_build_augment_pool(small_dataset: Dataset, tfr_config: TfrConfig) -> None:
    """Test planned variants become labeled images tied to their parents."""
    level = small_dataset.subset(0.0)
    first, second = level.records[0], level.records[5]
    plan = {first.sample_id: 2, second.sample_id: 1}
    result = build_augment_pool(level, plan, CurationPolicy(), tfr_config, seed=MOCK_SEED)
    assert len(result.pool) == 3
    assert result.pool.images.shape == (3, *MOCK_IMAGE_SIZE)
    assert result.pool.parent_ids.tolist() == [first.sample_id] * 2 + [second.sample_id]
    assert result.pool.labels.tolist() == [int(first.cls)] * 2 + [int(second.cls)]
    assert all(v.snr_db == 0.0 for v in result.variants)
    again = build_augment_pool(level, plan, CurationPolicy(), tfr_config, seed=MOCK_SEED)
    np.testing.assert_array_equal(again.pool.images, result.pool.images)


def test_build_augment_pool_unknown_sample(small_dataset: Dataset, tfr_config: TfrConfig) -> None:
    """Test planning a sample that is not in the dataset."""
    with pytest.raises(DataError, match="not in the dataset"):
        build_augment_pool(small_dataset, {10**9: 1}, CurationPolicy(), tfr_config, seed=0)


def test_write_curated_dataset(
    tmp_path: Path, small_dataset: Dataset, tfr_config: TfrConfig
) -> None:
    """Test the curated container carries the augmented records."""
    level = small_dataset.subset(0.0)
    plan = {level.records[0].sample_id: 2}
    result = build_augment_pool(level, plan, CurationPolicy(), tfr_config, seed=1)
    curated = write_curated_dataset(level, result.variants, tmp_path / "curated")
    loaded = read_dataset(tmp_path / "curated")
    assert len(loaded) == len(level) + 2
    assert loaded.records == curated.records
    assert sum(loaded.class_counts(PROVENANCE_AUGMENTED).values()) == 2
