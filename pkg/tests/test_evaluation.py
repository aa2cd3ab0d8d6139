"""Tests for metrics, the experiment harness and the run report."""

from __future__ import annotations

import json
import math
from pathlib import Path
from unittest.mock import patch

import numpy as np
import pandas as pd
import pytest

from intrapulse_amr.const import LITERATURE_BASELINES, NUM_CLASSES
from intrapulse_amr.coordinator import ExperimentCoordinator
from intrapulse_amr.curation import (
    CurationPolicy,
    ErrorRateReport,
    Partition,
    classify_samples,
)
from intrapulse_amr.evaluation import (
    ABLATION_VARIANTS,
    VARIANT_CNN,
    VARIANT_CNN_LSTM,
    AblationTable,
    ConfusionMatrix,
    KernelSweepPoint,
    LatencyRow,
    LatencyTable,
    RunOutcome,
    RunReport,
    SweepCurve,
    SweepPoint,
    VarianceStats,
    accuracy_histogram,
    async_ablation_grid,
    async_kernel_sweep,
    async_variance_study,
    bench_latency,
    confused_pair_votes,
    confusion_matrix,
    literature_comparison,
    snr_label,
    snr_sweep,
    training_parameters,
    variant_config,
    write_report,
)
from intrapulse_amr.exceptions import (
    DataError,
    InsufficientReplicationError,
    ShapeMismatchError,
)
from intrapulse_amr.model import ArchitectureSpec, Model, TrainConfig
from intrapulse_amr.siggen import Dataset
from intrapulse_amr.tfr import ImageCache, TfrConfig

from .conftest import small_architecture


def _counts(pairs: list[tuple[int, int, int]]) -> np.ndarray:
    counts = np.zeros((NUM_CLASSES, NUM_CLASSES), dtype=np.int64)
    for true, pred, n in pairs:
        counts[true, pred] = n
    return counts


# ---- Confusion ----


def test_confusion_matrix_counts() -> None:
    """Test rows are true classes and columns predictions."""
    matrix = confusion_matrix([0, 1, 1, 2], [0, 1, 2, 2])
    assert matrix.counts[2, 1] == 1
    assert matrix.total == 4
    assert matrix.accuracy == 0.75
    per_class = matrix.per_class_accuracy()
    assert per_class[2] == 0.5
    assert math.isnan(per_class[5])
    assert matrix.largest_confused_pair() == (1, 2)
    frame = matrix.to_frame()
    assert frame.loc["T2", "T2"] == 0
    assert list(frame.index)[2] == "Frank"


def test_confusion_matrix_validation() -> None:
    """Test mismatched or out-of-range inputs are rejected."""
    with pytest.raises(ShapeMismatchError):
        confusion_matrix([0, 1], [0])
    with pytest.raises(DataError, match="outside"):
        confusion_matrix([11], [0])


def test_largest_confused_pair_is_mutual() -> None:
    """Test confusions are summed in both directions."""
    matrix = ConfusionMatrix(_counts([(3, 4, 2), (4, 3, 2), (0, 8, 3)]))
    assert matrix.largest_confused_pair() == (3, 4)
    assert ConfusionMatrix(np.eye(NUM_CLASSES, dtype=np.int64)).largest_confused_pair() is None


def test_confused_pair_votes() -> None:
    """Test votes count the top pair of every run."""
    outcomes = [
        RunOutcome(seed=s, accuracy=0.9, counts=_counts([(4, 5, 3)]), seconds_per_epoch=1.0)
        for s in range(3)
    ]
    outcomes.append(
        RunOutcome(seed=9, accuracy=0.9, counts=_counts([(9, 10, 1)]), seconds_per_epoch=1.0)
    )
    votes = confused_pair_votes(outcomes)
    assert votes[("P1", "P2")] == 3
    assert votes[("T1", "T2")] == 1


# ---- SNR sweep ----


def test_chance_floor() -> None:
    """Test the chance floor is 1/11 minus three binomial sigmas."""
    point = SweepPoint(snr_db=-20.0, accuracy=0.1, samples=220)
    p = 1 / 11
    assert point.chance_floor == pytest.approx(p - 3 * math.sqrt(p * (1 - p) / 220))


def test_snr_sweep(small_cache: ImageCache) -> None:
    """Test one point per SNR with accuracies in [0, 1]."""
    models = {
        snr: Model(small_architecture(), np.random.default_rng(int(snr))) for snr in (10.0, 0.0)
    }
    test_sets = {}
    for snr in models:
        level = small_cache.at_snr(snr)
        test_sets[snr] = (level.images, level.labels)
    curve = snr_sweep(models, test_sets)
    assert [p.snr_db for p in curve.points] == [0.0, 10.0]
    assert all(0.0 <= p.accuracy <= 1.0 for p in curve.points)
    assert curve.points[0].samples == 33
    assert list(curve.to_frame().columns) == ["snr_db", "accuracy", "samples", "chance_floor"]
    with pytest.raises(DataError, match="no sweep point"):
        curve.accuracy_at(-5.0)
    with pytest.raises(DataError, match="no test set"):
        snr_sweep(models, {0.0: test_sets[0.0]})


# ---- Variance ----


def test_accuracy_histogram_fixed_width() -> None:
    """Test half-point bins cover every value."""
    edges, counts = accuracy_histogram([0.95, 0.951, 0.96])
    assert counts.tolist() == [2, 0, 1]
    np.testing.assert_allclose(edges, [0.95, 0.955, 0.96, 0.965])


def test_variance_stats() -> None:
    """Test summary statistics of the refold accuracies."""
    stats = VarianceStats(accuracies=[0.9, 0.95, 1.0], seeds=[1, 2, 3], snr_db=0.0)
    assert stats.mean == pytest.approx(0.95)
    assert stats.std == pytest.approx(0.05)
    assert (stats.minimum, stats.maximum) == (0.9, 1.0)
    summary = stats.to_dict()
    assert summary["runs"] == 3
    assert sum(summary["bin_counts"]) == 3
    assert summary["reported_mean"] == pytest.approx(0.963)
    assert stats.histogram_frame()["count"].sum() == 3


async def test_variance_study(small_cache: ImageCache, train_config: TrainConfig) -> None:
    """Test refold runs keep the images and vary the seed."""
    level = small_cache.at_snr(0.0)
    async with ExperimentCoordinator(1) as coordinator:
        stats, outcomes = await async_variance_study(
            coordinator, level.images, level.labels, train_config, runs=2, snr_db=0.0
        )
    assert stats.seeds == [7, 8]
    assert len(outcomes) == 2
    assert all(o.counts.sum() == 11 for o in outcomes)
    assert stats.accuracies == [o.accuracy for o in outcomes]


async def test_variance_study_needs_replication(
    small_cache: ImageCache, train_config: TrainConfig
) -> None:
    """Test one run is not a variance study."""
    level = small_cache.at_snr(0.0)
    async with ExperimentCoordinator(1) as coordinator:
        with pytest.raises(InsufficientReplicationError):
            await async_variance_study(coordinator, level.images, level.labels, train_config, runs=1)


# ---- Ablation ----


def test_ablation_table_ratios() -> None:
    """Test variant means are reported relative to the bare CNN."""
    table = AblationTable(
        snr_grid=[0.0],
        seeds=[1, 2],
        accuracies={VARIANT_CNN: {0.0: [0.4, 0.6]}, VARIANT_CNN_LSTM: {0.0: [0.6, 0.6]}},
    )
    assert table.ratio(VARIANT_CNN_LSTM, 0.0) == pytest.approx(1.2)
    assert table.mean_ratio(VARIANT_CNN) == pytest.approx(1.0)
    frame = table.to_frame()
    assert frame["variant"].tolist() == [VARIANT_CNN, VARIANT_CNN_LSTM]
    assert frame["runs"].tolist() == [2, 2]
    assert table.to_dict()["reported_augment_factor"] == pytest.approx(2.43)


def test_variant_config_heads(train_config: TrainConfig) -> None:
    """Test the CNN variants swap in the dense head."""
    assert variant_config(train_config, "cnn", 3).architecture.head == "dense"
    assert variant_config(train_config, "cnn_lstm_aug", 3).architecture.head == "lstm"
    assert variant_config(train_config, "cnn_aug", 3).seed == 3


def _no_exclusions(report: ErrorRateReport, policy: CurationPolicy) -> Partition:
    """Classify as usual but move excluded samples to the augment set."""
    partition = classify_samples(report, policy)
    return Partition(partition.keep, partition.augment | partition.exclude, frozenset())


async def test_ablation_grid(
    small_dataset: Dataset,
    small_cache: ImageCache,
    train_config: TrainConfig,
    tfr_config: TfrConfig,
) -> None:
    """Test all four variants are trained with paired seeds."""
    with patch("intrapulse_amr.evaluation.classify_samples", side_effect=_no_exclusions):
        async with ExperimentCoordinator(1) as coordinator:
            table, outcomes = await async_ablation_grid(
                coordinator,
                small_cache,
                small_dataset,
                train_config,
                CurationPolicy(),
                tfr_config,
                snr_grid=[0.0],
                seeds=[7],
                error_rate_runs=2,
            )
    assert set(table.accuracies) == set(ABLATION_VARIANTS)
    for variant in ABLATION_VARIANTS:
        assert len(table.accuracies[variant][0.0]) == 1
        assert outcomes[variant][0.0][0].seed == 7
    assert len(table.to_frame()) == 4


async def test_kernel_sweep(
    small_dataset: Dataset, train_config: TrainConfig, tfr_config: TfrConfig
) -> None:
    """Test one accuracy per alpha."""
    async with ExperimentCoordinator(1) as coordinator:
        points = await async_kernel_sweep(
            coordinator, small_dataset.subset(0.0), [0.5, 2.0], tfr_config, train_config
        )
    assert [p.alpha for p in points] == [0.5, 2.0]
    assert all(0.0 <= p.accuracy <= 1.0 for p in points)


# ---- Latency ----


def test_bench_latency() -> None:
    """Test throughput is batch size over median latency."""
    model = Model(ArchitectureSpec.tiny(), np.random.default_rng(0))
    table = bench_latency(model, batch_sizes=[1, 4], repetitions=5, warmup=1)
    assert [r.batch_size for r in table.rows] == [1, 4]
    for row in table.rows:
        assert row.throughput == pytest.approx(row.batch_size / row.median_s)
        assert row.p95_s >= row.median_s > 0
    assert table.threads == 1
    assert not model.training


def test_latency_plateau_and_roundtrip() -> None:
    """Test plateau detection and the JSON summary."""
    rows = [LatencyRow(1, 0.01, 0.02, 100.0), LatencyRow(2, 0.018, 0.02, 110.0)]
    table = LatencyTable(rows=rows, repetitions=10, warmup=2, threads=1)
    assert table.plateaued()
    assert not LatencyTable(rows=rows[:1], repetitions=10, warmup=2, threads=1).plateaued()
    steep = LatencyTable(
        rows=[rows[0], LatencyRow(2, 0.01, 0.01, 200.0)], repetitions=10, warmup=2, threads=1
    )
    assert not steep.plateaued()
    assert LatencyTable.from_dict(json.loads(json.dumps(table.to_dict()))) == table


# ---- Report ----


def test_literature_comparison() -> None:
    """Test reported baselines are labeled and compared."""
    frame = literature_comparison(0.95, 12_097)
    assert len(frame) == len(LITERATURE_BASELINES) + 1
    lstm = frame[frame["model"] == "LSTM"].iloc[0]
    assert lstm["improvement_factor"] == pytest.approx(0.95 / 0.63)
    assert lstm["source"] == "reported, not reproduced"


def test_training_parameters_table() -> None:
    """Test the training parameter table of the reference settings."""
    model = Model(ArchitectureSpec.reference(), np.random.default_rng(0))
    frame = training_parameters(TrainConfig(), model)
    values = dict(zip(frame["parameter"], frame["value"], strict=True))
    assert values["Learning Rate"] == "0.003"
    assert values["Train-Test-Val"] == "0.6-0.2-0.2"
    assert values["Model Parameters"] == "12097 (47kB)"


def test_snr_label() -> None:
    """Test file-name friendly SNR tags."""
    assert snr_label(-10.0) == "m10"
    assert snr_label(0.0) == "p0"
    assert snr_label(20.0) == "p20"


def test_write_report(tmp_path: Path) -> None:
    """Test the JSON report and its CSV tables."""
    report = RunReport(
        config_hash="abc123",
        sweep=SweepCurve(
            points=[SweepPoint(0.0, 0.9, 220), SweepPoint(10.0, 0.95, 220)]
        ),
        confusion={0.0: ConfusionMatrix(_counts([(0, 0, 20), (4, 5, 2)]))},
        variance=VarianceStats(accuracies=[0.9, 0.92], seeds=[1, 2]),
        latency=LatencyTable(rows=[LatencyRow(1, 0.01, 0.02, 100.0)], repetitions=5, warmup=1, threads=1),
        train_seconds_per_epoch={0.0: 1.5},
        kernel_sweep=[KernelSweepPoint(1.0, 0.9)],
        parameters=12_097,
        size_bytes=48_388,
        confused_pairs={0.0: {"P1/P2": 2}},
    )
    written = write_report(report, tmp_path)
    names = {p.name for p in written}
    assert names == {
        "confusion_snr_p0.csv",
        "snr_sweep.csv",
        "variance_histogram.csv",
        "latency.csv",
        "kernel_sweep.csv",
        "literature.csv",
    }
    data = json.loads((tmp_path / "run_report.json").read_text())
    assert data["kind"] == "run_report"
    assert data["per_snr_accuracy"] == {"0.0": 0.9, "10.0": 0.95}
    assert data["largest_confused_pair"] == {"0.0": ["P1", "P2"]}
    assert data["timing"]["train_s_per_epoch"] == {"0.0": 1.5}
    assert data["literature"][-1]["model"] == "reproduced"
    assert data["literature"][-1]["train_s_per_epoch"] is None
    confusion = pd.read_csv(tmp_path / "confusion_snr_p0.csv", index_col=0)
    assert confusion.loc["BFSK", "BFSK"] == 20


def test_report_without_zero_db(tmp_path: Path) -> None:
    """Test the literature table falls back to the reported rows."""
    report = RunReport(config_hash="x", sweep=SweepCurve(points=[SweepPoint(10.0, 0.9, 11)]), parameters=1)
    written = write_report(report, tmp_path)
    assert {p.name for p in written} == {"snr_sweep.csv"}
    data = json.loads((tmp_path / "run_report.json").read_text())
    assert [row["model"] for row in data["literature"]] == [r["model"] for r in LITERATURE_BASELINES]
