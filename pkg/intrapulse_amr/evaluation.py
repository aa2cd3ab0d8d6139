"""Metrics and experiment harness.

Covers confusion matrices, accuracy against SNR, the refold variance
study, the four-way ablation (CNN / CNN-LSTM, with and without targeted
augmentation), a CWD spread sweep, the latency/throughput benchmark and the
JSON + CSV run report.
"""

from __future__ import annotations

from collections import Counter
from collections.abc import Mapping, Sequence
import dataclasses
from dataclasses import dataclass, field
import logging
import math
from pathlib import Path
import time
from typing import Any, Final

import numpy as np
import pandas as pd
from sklearn.metrics import confusion_matrix as sk_confusion_matrix
from threadpoolctl import threadpool_info, threadpool_limits

from .const import (
    BENCH_THREADS,
    BENCH_WARMUP,
    DEFAULT_ABLATION_SEEDS,
    DEFAULT_BENCH_BATCHES,
    DEFAULT_BENCH_REPETITIONS,
    DEFAULT_ERROR_RATE_RUNS,
    DEFAULT_SEED,
    DEFAULT_VARIANCE_RUNS,
    FORMAT_VERSION,
    HEAD_DENSE,
    HEAD_LSTM,
    HISTOGRAM_BIN_WIDTH,
    LITERATURE_BASELINES,
    LOGGER_NAME,
    NUM_CLASSES,
    PLATEAU_TOLERANCE,
    REPORT_MAGIC,
    REPORTED_AUGMENT_FACTOR,
    REPORTED_LSTM_FACTOR,
    REPORTED_MEAN_ACCURACY,
    REPORTED_MIN_ACCURACY,
)
from .coordinator import ExperimentCoordinator
from .curation import (
    CurationPolicy,
    async_per_sample_error_rates,
    build_augment_pool,
    classify_samples,
    plan_augmentation,
)
from .exceptions import DataError, InsufficientReplicationError, ShapeMismatchError
from .model import AugmentPool, Model, TrainConfig, evaluate, fit
from .siggen import CLASS_TAGS, Dataset
from .storage import write_json
from .tfr import ImageCache, TfrConfig

_LOGGER: Final = logging.getLogger(LOGGER_NAME)

VARIANT_CNN: Final = "cnn"
VARIANT_CNN_LSTM: Final = "cnn_lstm"
VARIANT_CNN_AUG: Final = "cnn_aug"
VARIANT_CNN_LSTM_AUG: Final = "cnn_lstm_aug"
ABLATION_VARIANTS: Final = (VARIANT_CNN, VARIANT_CNN_LSTM, VARIANT_CNN_AUG, VARIANT_CNN_LSTM_AUG)


@dataclass(frozen=True)
class ConfusionMatrix:
    """Counts with rows = true class and columns = predicted class."""

    counts: np.ndarray

    @property
    def total(self) -> int:
        """Return the number of scored samples."""
        return int(self.counts.sum())

    @property
    def accuracy(self) -> float:
        """Return trace / total."""
        return float(np.trace(self.counts) / self.total) if self.total else float("nan")

    def per_class_accuracy(self) -> np.ndarray:
        """Return the diagonal over row sums (NaN for absent classes)."""
        rows = self.counts.sum(axis=1)
        with np.errstate(invalid="ignore", divide="ignore"):
            return np.where(rows > 0, np.diag(self.counts) / rows, np.nan)

    def largest_confused_pair(self) -> tuple[int, int] | None:
        """Return the unordered class pair with the most mutual confusions."""
        mutual = self.counts + self.counts.T
        np.fill_diagonal(mutual, 0)
        if not mutual.any():
            return None
        upper = np.triu(mutual, k=1)
        first, second = np.unravel_index(int(upper.argmax()), upper.shape)
        return int(first), int(second)

    def to_frame(self) -> pd.DataFrame:
        """Return the matrix as a labeled frame."""
        return pd.DataFrame(self.counts, index=list(CLASS_TAGS), columns=list(CLASS_TAGS))


def confusion_matrix(predictions: Sequence[int], labels: Sequence[int]) -> ConfusionMatrix:
    """Count (true, predicted) pairs over the eleven classes.

    Raises:
        ShapeMismatchError: If the sequences differ in length.
    """
    predictions, labels = np.asarray(predictions), np.asarray(labels)
    if predictions.shape != labels.shape:
        raise ShapeMismatchError(f"{predictions.size} predictions for {labels.size} labels")
    for name, values in (("label", labels), ("prediction", predictions)):
        if values.size and (values.min() < 0 or values.max() >= NUM_CLASSES):
            raise DataError(f"{name} outside 0..{NUM_CLASSES - 1}")
    counts = sk_confusion_matrix(labels, predictions, labels=list(range(NUM_CLASSES)))
    return ConfusionMatrix(counts=counts.astype(np.int64))


@dataclass(frozen=True)
class RunOutcome:
    """Test result of one training run."""

    seed: int
    accuracy: float
    counts: np.ndarray
    seconds_per_epoch: float

    @property
    def confusion(self) -> ConfusionMatrix:
        """Return the test confusion matrix."""
        return ConfusionMatrix(self.counts)


def train_and_test(
    images: np.ndarray,
    labels: np.ndarray,
    sample_ids: np.ndarray | None,
    config: TrainConfig,
    augment_pool: AugmentPool | None = None,
    exclude_ids: Sequence[int] = (),
) -> RunOutcome:
    """Fit once and score the untouched test partition."""
    result = fit(
        images,
        labels,
        config,
        sample_ids=sample_ids,
        augment_pool=augment_pool,
        exclude_ids=exclude_ids,
    )
    test = result.split.test
    scored = evaluate(result.model, images[test], labels[test])
    matrix = confusion_matrix(scored.predictions, labels[test])
    return RunOutcome(
        seed=config.seed,
        accuracy=scored.accuracy,
        counts=matrix.counts,
        seconds_per_epoch=result.seconds_per_epoch,
    )


def confused_pair_votes(outcomes: Sequence[RunOutcome]) -> Counter[tuple[str, str]]:
    """Count how often each class pair is the largest confusion across runs."""
    votes: Counter[tuple[str, str]] = Counter()
    for outcome in outcomes:
        pair = outcome.confusion.largest_confused_pair()
        if pair is not None:
            votes[(CLASS_TAGS[pair[0]], CLASS_TAGS[pair[1]])] += 1
    return votes


@dataclass(frozen=True)
class SweepPoint:
    """Test accuracy at one SNR level."""

    snr_db: float
    accuracy: float
    samples: int

    @property
    def chance_floor(self) -> float:
        """Return chance accuracy minus a three-sigma binomial margin."""
        p = 1 / NUM_CLASSES
        return p - 3 * math.sqrt(p * (1 - p) / max(self.samples, 1))


@dataclass
class SweepCurve:
    """Accuracy against SNR plus reported reference lines."""

    points: list[SweepPoint]
    literature: tuple[dict[str, Any], ...] = LITERATURE_BASELINES

    def accuracy_at(self, snr_db: float) -> float:
        """Return the accuracy at one grid point."""
        for point in self.points:
            if math.isclose(point.snr_db, snr_db, abs_tol=1e-9):
                return point.accuracy
        raise DataError(f"no sweep point at {snr_db} dB")

    def to_frame(self) -> pd.DataFrame:
        """Return one row per SNR level."""
        return pd.DataFrame(
            [
                {
                    "snr_db": p.snr_db,
                    "accuracy": p.accuracy,
                    "samples": p.samples,
                    "chance_floor": p.chance_floor,
                }
                for p in self.points
            ]
        )


def snr_sweep(
    models: Mapping[float, Model],
    test_sets: Mapping[float, tuple[np.ndarray, np.ndarray]],
) -> SweepCurve:
    """Score the model trained at every SNR on that SNR's test set."""
    points = []
    for snr in sorted(models):
        if snr not in test_sets:
            raise DataError(f"no test set for {snr} dB")
        images, labels = test_sets[snr]
        scored = evaluate(models[snr], images, labels)
        points.append(SweepPoint(snr_db=float(snr), accuracy=scored.accuracy, samples=len(labels)))
    return SweepCurve(points=points)


def accuracy_histogram(
    values: Sequence[float], width: float = HISTOGRAM_BIN_WIDTH
) -> tuple[np.ndarray, np.ndarray]:
    """Return fixed-width ``(edges, counts)`` covering the values."""
    index = np.floor(np.asarray(values, dtype=np.float64) / width + 1e-9).astype(np.int64)
    low, high = int(index.min()), int(index.max())
    counts = np.bincount(index - low, minlength=high - low + 1)
    edges = np.arange(low, high + 2) * width
    return edges, counts


@dataclass
class VarianceStats:
    """Spread of test accuracy over refold runs."""

    accuracies: list[float]
    seeds: list[int]
    snr_db: float | None = None
    bin_width: float = HISTOGRAM_BIN_WIDTH

    @property
    def mean(self) -> float:
        """Return the mean accuracy."""
        return float(np.mean(self.accuracies))

    @property
    def minimum(self) -> float:
        """Return the worst run."""
        return float(np.min(self.accuracies))

    @property
    def maximum(self) -> float:
        """Return the best run."""
        return float(np.max(self.accuracies))

    @property
    def std(self) -> float:
        """Return the sample standard deviation."""
        return float(np.std(self.accuracies, ddof=1)) if len(self.accuracies) > 1 else 0.0

    def histogram(self) -> tuple[np.ndarray, np.ndarray]:
        """Return the fixed-width histogram."""
        return accuracy_histogram(self.accuracies, self.bin_width)

    def to_dict(self) -> dict[str, Any]:
        """Return a JSON-ready summary."""
        edges, counts = self.histogram()
        return {
            "snr_db": self.snr_db,
            "runs": len(self.accuracies),
            "mean": self.mean,
            "min": self.minimum,
            "max": self.maximum,
            "std": self.std,
            "bin_width": self.bin_width,
            "bin_edges": edges.tolist(),
            "bin_counts": counts.tolist(),
            "accuracies": self.accuracies,
            "seeds": self.seeds,
            "reported_mean": REPORTED_MEAN_ACCURACY,
            "reported_min": REPORTED_MIN_ACCURACY,
        }

    def histogram_frame(self) -> pd.DataFrame:
        """Return one row per histogram bin."""
        edges, counts = self.histogram()
        return pd.DataFrame({"bin_low": edges[:-1], "bin_high": edges[1:], "count": counts})


async def async_variance_study(
    coordinator: ExperimentCoordinator,
    images: np.ndarray,
    labels: np.ndarray,
    config: TrainConfig,
    runs: int = DEFAULT_VARIANCE_RUNS,
    sample_ids: np.ndarray | None = None,
    seeds: Sequence[int] | None = None,
    snr_db: float | None = None,
) -> tuple[VarianceStats, list[RunOutcome]]:
    """Retrain on ``runs`` independent stratified refolds.

    The noise realization stays fixed; only the split and initialization
    change. ``seeds`` overrides the default ``config.seed + r`` sequence.
    """
    seeds = list(seeds) if seeds is not None else [config.seed + r for r in range(runs)]
    if len(seeds) < 2:
        raise InsufficientReplicationError(f"insufficient replication: {len(seeds)} run(s)")
    jobs = [(images, labels, sample_ids, config.replace(seed=s)) for s in seeds]
    _LOGGER.info("Variance study: %d runs", len(jobs))
    outcomes = await coordinator.async_map(train_and_test, jobs)
    stats = VarianceStats(
        accuracies=[o.accuracy for o in outcomes], seeds=list(seeds), snr_db=snr_db
    )
    _LOGGER.info(
        "Variance study: mean %.4f, min %.4f, max %.4f", stats.mean, stats.minimum, stats.maximum
    )
    return stats, outcomes


@dataclass
class AblationTable:
    """Per-SNR accuracies of the four model variants over paired seeds."""

    snr_grid: list[float]
    seeds: list[int]
    accuracies: dict[str, dict[float, list[float]]] = field(default_factory=dict)

    def mean(self, variant: str, snr_db: float) -> float:
        """Return the mean accuracy of a variant at one SNR."""
        return float(np.mean(self.accuracies[variant][snr_db]))

    def ratio(self, variant: str, snr_db: float) -> float:
        """Return the variant mean over the bare-CNN mean."""
        baseline = self.mean(VARIANT_CNN, snr_db)
        return self.mean(variant, snr_db) / baseline if baseline > 0 else float("nan")

    def mean_ratio(self, variant: str) -> float:
        """Return the ratio averaged over the SNR grid."""
        return float(np.mean([self.ratio(variant, s) for s in self.snr_grid]))

    def to_frame(self) -> pd.DataFrame:
        """Return one row per (SNR, variant)."""
        rows = []
        for snr in self.snr_grid:
            for variant in ABLATION_VARIANTS:
                if variant not in self.accuracies:
                    continue
                values = self.accuracies[variant][snr]
                rows.append(
                    {
                        "snr_db": snr,
                        "variant": variant,
                        "mean_accuracy": float(np.mean(values)),
                        "std_accuracy": float(np.std(values)),
                        "ratio_vs_cnn": self.ratio(variant, snr),
                        "runs": len(values),
                    }
                )
        return pd.DataFrame(rows)

    def to_dict(self) -> dict[str, Any]:
        """Return a JSON-ready summary with reported factors alongside."""
        return {
            "snr_grid": self.snr_grid,
            "seeds": self.seeds,
            "accuracies": {
                v: {str(s): a for s, a in by_snr.items()} for v, by_snr in self.accuracies.items()
            },
            "mean_ratio": {v: self.mean_ratio(v) for v in self.accuracies},
            "reported_augment_factor": REPORTED_AUGMENT_FACTOR,
            "reported_lstm_factor": REPORTED_LSTM_FACTOR,
        }


def variant_config(base: TrainConfig, variant: str, seed: int) -> TrainConfig:
    """Return the training config of one ablation variant."""
    head = HEAD_LSTM if variant in (VARIANT_CNN_LSTM, VARIANT_CNN_LSTM_AUG) else HEAD_DENSE
    architecture = dataclasses.replace(base.architecture, head=head)
    return base.replace(seed=seed, architecture=architecture)


async def async_ablation_grid(
    coordinator: ExperimentCoordinator,
    images: ImageCache,
    dataset: Dataset,
    base_config: TrainConfig,
    policy: CurationPolicy,
    tfr_config: TfrConfig,
    snr_grid: Sequence[float] | None = None,
    seeds: Sequence[int] | None = None,
    error_rate_runs: int = DEFAULT_ERROR_RATE_RUNS,
) -> tuple[AblationTable, dict[str, dict[float, list[RunOutcome]]]]:
    """Train the four variants per SNR with paired seeds.

    Augmented variants share one curation per SNR, derived from error rates
    of the base configuration, so they differ from their plain counterpart
    only in the training set.
    """
    snr_grid = [float(s) for s in (snr_grid if snr_grid is not None else dataset.snr_grid)]
    seeds = list(seeds) if seeds is not None else [
        base_config.seed + s for s in range(DEFAULT_ABLATION_SEEDS)
    ]
    table = AblationTable(snr_grid=snr_grid, seeds=seeds)
    outcomes: dict[str, dict[float, list[RunOutcome]]] = {v: {} for v in ABLATION_VARIANTS}
    for snr in snr_grid:
        level = images.at_snr(snr)
        subset = dataset.subset(snr)
        report = await async_per_sample_error_rates(
            coordinator,
            level.images,
            level.labels,
            level.sample_ids,
            base_config,
            error_rate_runs,
            snr,
        )
        partition = classify_samples(report, policy)
        labels_by_id = {int(s): int(c) for s, c in zip(level.sample_ids, level.labels, strict=True)}
        plan = plan_augmentation(report, partition, labels_by_id, policy)
        pool = build_augment_pool(subset, plan, policy, tfr_config, base_config.seed).pool
        excluded = sorted(partition.exclude)
        jobs, keys = [], []
        for variant in ABLATION_VARIANTS:
            augmented = variant in (VARIANT_CNN_AUG, VARIANT_CNN_LSTM_AUG)
            for seed in seeds:
                jobs.append(
                    (
                        level.images,
                        level.labels,
                        level.sample_ids,
                        variant_config(base_config, variant, seed),
                        pool if augmented else None,
                        excluded if augmented else (),
                    )
                )
                keys.append(variant)
        results = await coordinator.async_map(train_and_test, jobs)
        for variant, outcome in zip(keys, results, strict=True):
            outcomes[variant].setdefault(snr, []).append(outcome)
            table.accuracies.setdefault(variant, {}).setdefault(snr, []).append(outcome.accuracy)
        _LOGGER.info(
            "Ablation at %+.0f dB: %s",
            snr,
            ", ".join(f"{v}={table.mean(v, snr):.3f}" for v in ABLATION_VARIANTS),
        )
    return table, outcomes


@dataclass(frozen=True)
class KernelSweepPoint:
    """Test accuracy for one CWD spread."""

    alpha: float
    accuracy: float


async def async_kernel_sweep(
    coordinator: ExperimentCoordinator,
    dataset: Dataset,
    alphas: Sequence[float],
    tfr_config: TfrConfig,
    config: TrainConfig,
) -> list[KernelSweepPoint]:
    """Train the reference model on images made with every alpha."""
    points = []
    for alpha in alphas:
        cache = await coordinator.async_transform_dataset(dataset, tfr_config.with_alpha(alpha))
        outcome = await coordinator.async_run(
            train_and_test, cache.images, cache.labels, cache.sample_ids, config
        )
        points.append(KernelSweepPoint(alpha=float(alpha), accuracy=outcome.accuracy))
        _LOGGER.info("Kernel sweep alpha=%g: accuracy %.4f", alpha, outcome.accuracy)
    return points


@dataclass(frozen=True)
class LatencyRow:
    """Timing of one batch size."""

    batch_size: int
    median_s: float
    p95_s: float
    throughput: float


@dataclass
class LatencyTable:
    """Latency and throughput per batch size."""

    rows: list[LatencyRow]
    repetitions: int
    warmup: int
    threads: int
    thread_info: list[dict[str, Any]] = field(default_factory=list)

    def plateaued(self, tolerance: float = PLATEAU_TOLERANCE) -> bool:
        """Return True if the last two throughputs differ by less than ``tolerance``."""
        if len(self.rows) < 2:
            return False
        last, previous = self.rows[-1].throughput, self.rows[-2].throughput
        return abs(last - previous) / max(last, previous) < tolerance

    def to_frame(self) -> pd.DataFrame:
        """Return one row per batch size."""
        return pd.DataFrame([dataclasses.asdict(r) for r in self.rows])

    def to_dict(self) -> dict[str, Any]:
        """Return a JSON-ready summary."""
        return {
            "rows": [dataclasses.asdict(r) for r in self.rows],
            "repetitions": self.repetitions,
            "warmup": self.warmup,
            "threads": self.threads,
            "thread_info": self.thread_info,
            "plateaued": self.plateaued(),
        }

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> LatencyTable:
        """Parse a summary written by :meth:`to_dict`."""
        return cls(
            rows=[LatencyRow(**row) for row in data["rows"]],
            repetitions=int(data["repetitions"]),
            warmup=int(data["warmup"]),
            threads=int(data["threads"]),
            thread_info=list(data.get("thread_info", [])),
        )


def bench_latency(
    model: Model,
    batch_sizes: Sequence[int] = DEFAULT_BENCH_BATCHES,
    repetitions: int = DEFAULT_BENCH_REPETITIONS,
    warmup: int = BENCH_WARMUP,
    threads: int = BENCH_THREADS,
    seed: int = DEFAULT_SEED,
) -> LatencyTable:
    """Time eval-mode forward passes per batch size with pinned BLAS threads."""
    model.eval()
    rng = np.random.default_rng(seed)
    height, width = model.spec.input_shape
    rows = []
    with threadpool_limits(limits=threads):
        info = [
            {"internal_api": pool.get("internal_api"), "num_threads": pool.get("num_threads")}
            for pool in threadpool_info()
        ]
        for batch_size in batch_sizes:
            batch = rng.random((batch_size, height, width), dtype=np.float32)
            for _ in range(warmup):
                model.forward(batch)
            timings = np.empty(repetitions)
            for rep in range(repetitions):
                started = time.perf_counter()
                model.forward(batch)
                timings[rep] = time.perf_counter() - started
            median = float(np.median(timings))
            rows.append(
                LatencyRow(
                    batch_size=int(batch_size),
                    median_s=median,
                    p95_s=float(np.percentile(timings, 95)),
                    throughput=batch_size / median,
                )
            )
            _LOGGER.debug("Batch %d: median %.6f s", batch_size, median)
    return LatencyTable(
        rows=rows, repetitions=repetitions, warmup=warmup, threads=threads, thread_info=info
    )


def literature_comparison(accuracy: float, parameters: int) -> pd.DataFrame:
    """Compare a reproduced 0 dB accuracy with the reported baselines."""
    rows = [
        {
            "model": row["model"],
            "source": "reported, not reproduced",
            "accuracy": row["accuracy"],
            "params": row["params"],
            "train_s_per_epoch": row["train_s_per_epoch"],
            "improvement_factor": accuracy / row["accuracy"],
            "param_ratio": parameters / row["params"],
        }
        for row in LITERATURE_BASELINES
    ]
    rows.append(
        {
            "model": "reproduced",
            "source": "this run",
            "accuracy": accuracy,
            "params": parameters,
            "train_s_per_epoch": float("nan"),
            "improvement_factor": 1.0,
            "param_ratio": 1.0,
        }
    )
    return pd.DataFrame(rows)


def _records(frame: pd.DataFrame) -> list[dict[str, Any]]:
    """Return frame rows as dicts with NaN mapped to None."""
    return frame.astype(object).where(frame.notna(), None).to_dict(orient="records")


def training_parameters(config: TrainConfig, model: Model) -> pd.DataFrame:
    """Return the training parameter table of a configuration."""
    split = "-".join(f"{f:g}" for f in config.split)
    return pd.DataFrame(
        [
            {"parameter": "Learning Rate", "value": f"{config.learning_rate:g}"},
            {"parameter": "Training Epochs", "value": str(config.epochs)},
            {"parameter": "Batch Size", "value": str(config.batch_size)},
            {"parameter": "Train-Test-Val", "value": split},
            {"parameter": "Save Best Results", "value": str(config.save_best)},
            {"parameter": "Batch Normalization", "value": str(config.batch_norm)},
            {
                "parameter": "Model Parameters",
                "value": f"{model.parameter_count()} ({model.size_bytes() / 1024:.0f}kB)",
            },
        ]
    )


@dataclass
class RunReport:
    """Everything the report command renders."""

    config_hash: str
    sweep: SweepCurve | None = None
    confusion: dict[float, ConfusionMatrix] = field(default_factory=dict)
    variance: VarianceStats | None = None
    ablation: AblationTable | None = None
    latency: LatencyTable | None = None
    train_seconds_per_epoch: dict[float, float] = field(default_factory=dict)
    kernel_sweep: list[KernelSweepPoint] = field(default_factory=list)
    parameters: int | None = None
    size_bytes: int | None = None
    confused_pairs: dict[float, dict[str, int]] = field(default_factory=dict)

    def to_dict(self) -> dict[str, Any]:
        """Return the versioned JSON document (timing isolated under ``timing``)."""
        accuracy_0db = None
        if self.sweep is not None:
            try:
                accuracy_0db = self.sweep.accuracy_at(0.0)
            except DataError:
                accuracy_0db = None
        literature = (
            _records(literature_comparison(accuracy_0db, self.parameters))
            if accuracy_0db is not None and self.parameters
            else [dict(row) for row in LITERATURE_BASELINES]
        )
        return {
            "magic": REPORT_MAGIC,
            "format_version": FORMAT_VERSION,
            "kind": "run_report",
            "config_hash": self.config_hash,
            "model": {
                "parameters": self.parameters,
                "size_kb": None if self.size_bytes is None else self.size_bytes / 1024,
            },
            "per_snr_accuracy": (
                {str(p.snr_db): p.accuracy for p in self.sweep.points} if self.sweep else {}
            ),
            "confusion": {str(s): m.counts.tolist() for s, m in sorted(self.confusion.items())},
            "largest_confused_pair": {
                str(s): [CLASS_TAGS[i] for i in pair]
                for s, m in sorted(self.confusion.items())
                if (pair := m.largest_confused_pair()) is not None
            },
            "confused_pair_votes": {str(s): v for s, v in self.confused_pairs.items()},
            "variance": self.variance.to_dict() if self.variance else None,
            "ablation": self.ablation.to_dict() if self.ablation else None,
            "kernel_sweep": [dataclasses.asdict(p) for p in self.kernel_sweep],
            "literature": literature,
            "timing": {
                "train_s_per_epoch": {str(s): t for s, t in self.train_seconds_per_epoch.items()},
                "latency": self.latency.to_dict() if self.latency else None,
            },
        }


def snr_label(snr_db: float) -> str:
    """Return a file-name friendly SNR tag such as ``m10`` or ``p20``."""
    return f"{'m' if snr_db < 0 else 'p'}{abs(snr_db):g}"


def write_report(report: RunReport, path: Path) -> list[Path]:
    """Write the JSON report and one CSV per table; return the CSV paths."""
    path = Path(path)
    path.mkdir(parents=True, exist_ok=True)
    write_json(path / "run_report.json", report.to_dict())
    written = []

    def emit(name: str, frame: pd.DataFrame, index: bool = False) -> None:
        target = path / name
        frame.to_csv(target, index=index)
        written.append(target)

    for snr, matrix in sorted(report.confusion.items()):
        emit(f"confusion_snr_{snr_label(snr)}.csv", matrix.to_frame(), index=True)
    if report.sweep is not None:
        emit("snr_sweep.csv", report.sweep.to_frame())
    if report.variance is not None:
        emit("variance_histogram.csv", report.variance.histogram_frame())
    if report.ablation is not None:
        emit("ablation.csv", report.ablation.to_frame())
    if report.latency is not None:
        emit("latency.csv", report.latency.to_frame())
    if report.kernel_sweep:
        emit("kernel_sweep.csv", pd.DataFrame([dataclasses.asdict(p) for p in report.kernel_sweep]))
    if report.sweep is not None and report.parameters:
        try:
            emit(
                "literature.csv",
                literature_comparison(report.sweep.accuracy_at(0.0), report.parameters),
            )
        except DataError:
            _LOGGER.warning("No 0 dB point; skipping the literature comparison")
    _LOGGER.info("Wrote report with %d tables to %s", len(written), path)
    return written
