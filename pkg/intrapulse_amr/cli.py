"""Command line entry point orchestrating the pipeline."""

from __future__ import annotations

import argparse
import asyncio
from collections.abc import Awaitable, Callable, Sequence
from dataclasses import dataclass
import logging
from pathlib import Path
import sys
from typing import Any, Final, NoReturn

import numpy as np
import pandas as pd

from .config import PipelineConfig, load_config
from .const import (
    ARCH_FILE,
    BENCH_WARMUP,
    EFFECTIVE_CONFIG_FILE,
    EXIT_OK,
    IMAGES_FILE,
    KERNEL_CWD,
    KERNELS,
    LOGGER_NAME,
    MANIFEST_FILE,
    RUN_MANIFEST_FILE,
    TFR_MANIFEST_FILE,
    VERSION,
)
from .coordinator import ExperimentCoordinator
from .curation import (
    async_per_sample_error_rates,
    build_augment_pool,
    class_balance,
    classify_samples,
    plan_augmentation,
    read_error_report,
    write_curated_dataset,
    write_error_report,
)
from .diagnostics import build_run_manifest
from .evaluation import (
    VARIANT_CNN_LSTM,
    LatencyTable,
    RunReport,
    async_ablation_grid,
    async_kernel_sweep,
    async_variance_study,
    bench_latency,
    confusion_matrix,
    confused_pair_votes,
    snr_label,
    snr_sweep,
    training_parameters,
    write_report,
)
from .exceptions import (
    ConfigError,
    ContainerError,
    DataError,
    IntrapulseAMRError,
    MissingArtifactError,
)
from .model import FitResult, Model, evaluate, fit, load_checkpoint, save_checkpoint
from .plotting import plot_gallery, render_report_figures
from .siggen import CLASS_TAGS, Dataset, ModulationClass, generate_dataset, read_dataset, write_dataset
from .storage import read_json, write_json
from .tfr import ImageCache, cache_key, read_image_cache, write_image_cache

_LOGGER: Final = logging.getLogger(LOGGER_NAME)

SPLIT_FILE: Final = "split.json"
ERROR_RATES_FILE: Final = "error_rates.json"
PARTITION_FILE: Final = "partition.json"
PLAN_FILE: Final = "plan.json"
BENCH_FILE: Final = "bench.json"
GALLERY_SNR: Final = 20.0
NOISE_GALLERY_CLASSES: Final = (ModulationClass.BFSK, ModulationClass.P1)
NOISE_GALLERY_SNRS: Final = (-20.0, -10.0, -5.0, 0.0)


class ArgumentParser(argparse.ArgumentParser):
    """Argument parser reporting usage errors as configuration errors."""

    def error(self, message: str) -> NoReturn:
        """Raise instead of exiting so ``main`` owns the exit code."""
        raise ConfigError(f"{self.prog}: {message}")


def _float_list(text: str) -> list[float]:
    try:
        return [float(part) for part in text.split(",") if part.strip()]
    except ValueError as err:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from err


def _int_list(text: str) -> list[int]:
    try:
        return [int(part) for part in text.split(",") if part.strip()]
    except ValueError as err:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from err


@dataclass(frozen=True)
class ArtifactLayout:
    """Directory layout under the output root."""

    root: Path

    @property
    def dataset(self) -> Path:
        """Return the dataset container directory."""
        return self.root / "dataset"

    @property
    def images(self) -> Path:
        """Return the spectrogram cache directory."""
        return self.root / "images"

    def model(self, snr_db: float) -> Path:
        """Return the checkpoint directory of one SNR level."""
        return self.root / "models" / f"snr_{snr_label(snr_db)}"

    def curation(self, snr_db: float) -> Path:
        """Return the curation directory of one SNR level."""
        return self.root / "curation" / f"snr_{snr_label(snr_db)}"

    @property
    def eval(self) -> Path:
        """Return the evaluation directory."""
        return self.root / "eval"

    @property
    def bench(self) -> Path:
        """Return the benchmark directory."""
        return self.root / "bench"

    @property
    def report(self) -> Path:
        """Return the report directory."""
        return self.root / "report"


@dataclass
class CommandContext:
    """State shared by one command invocation."""

    args: argparse.Namespace
    config: PipelineConfig
    layout: ArtifactLayout
    coordinator: ExperimentCoordinator

    @property
    def force(self) -> bool:
        """Return True if up-to-date outputs should be rebuilt."""
        return bool(self.args.force)

    def snr_levels(self) -> list[float]:
        """Return the SNR levels a command should cover."""
        selected = getattr(self.args, "snr", None)
        return [float(s) for s in (selected or self.config.dataset.snr_grid)]

    async def async_provenance(
        self,
        directory: Path,
        command: str,
        seeds: dict[str, int] | None = None,
        inputs: dict[str, str] | None = None,
        extra: dict[str, Any] | None = None,
        timing: dict[str, Any] | None = None,
    ) -> None:
        """Write the effective config and the run manifest into ``directory``."""
        outputs = [p.name for p in directory.iterdir()] if directory.exists() else []
        manifest = build_run_manifest(
            command,
            self.config.section_hash(),
            seeds=seeds,
            inputs=inputs,
            outputs=[o for o in outputs if o not in (RUN_MANIFEST_FILE, EFFECTIVE_CONFIG_FILE)],
            extra=extra,
            timing=timing,
        )
        await self.coordinator.async_write(_write_provenance, directory, manifest, self.config)


def _write_provenance(directory: Path, manifest: dict[str, Any], config: PipelineConfig) -> None:
    directory.mkdir(parents=True, exist_ok=True)
    (directory / EFFECTIVE_CONFIG_FILE).write_text(config.to_yaml(), encoding="utf-8")
    write_json(directory / RUN_MANIFEST_FILE, manifest)


def _write_csv(frame: pd.DataFrame, path: Path) -> None:
    frame.to_csv(path, index=False)


def _emit(text: str) -> None:
    sys.stdout.write(text.rstrip("\n") + "\n")


def _require(path: Path, command: str) -> Path:
    if not path.exists():
        raise MissingArtifactError(str(path), command)
    return path


def _load_dataset(layout: ArtifactLayout) -> Dataset:
    return read_dataset(_require(layout.dataset / MANIFEST_FILE, "generate").parent)


def _load_images(layout: ArtifactLayout, dataset: Dataset, config: PipelineConfig) -> ImageCache:
    _require(layout.images / TFR_MANIFEST_FILE, "transform")
    try:
        return read_image_cache(layout.images, expected_key=cache_key(dataset, config.tfr))
    except ContainerError as err:
        raise ContainerError(f"{err}; rerun `transform` with the current settings") from err


def _load_model(directory: Path) -> Model:
    _require(directory / ARCH_FILE, "train")
    return load_checkpoint(directory).to_model()


def _test_ids(directory: Path) -> list[int]:
    return [int(s) for s in read_json(_require(directory / SPLIT_FILE, "train"))["test"]]


def _split_document(result: FitResult, sample_ids: np.ndarray, seed: int) -> dict[str, Any]:
    return {
        "seed": seed,
        "train": [int(s) for s in sample_ids[result.split.train]],
        "val": [int(s) for s in sample_ids[result.split.val]],
        "test": [int(s) for s in sample_ids[result.split.test]],
    }


def _save_fit(directory: Path, result: FitResult, sample_ids: np.ndarray, seed: int) -> None:
    save_checkpoint(result.checkpoint, directory)
    write_json(directory / SPLIT_FILE, _split_document(result, sample_ids, seed))


async def async_cmd_generate(ctx: CommandContext) -> int:
    """Generate the labeled pulse dataset."""
    settings = ctx.config.dataset
    dataset = await ctx.coordinator.async_run(generate_dataset, settings)
    await ctx.coordinator.async_write(write_dataset, dataset, ctx.layout.dataset)
    table = pd.crosstab(
        pd.Series([r.cls.tag for r in dataset.records], name="class"),
        pd.Series([r.snr_db for r in dataset.records], name="snr_db"),
    ).reindex(list(CLASS_TAGS))
    _emit(table.to_string())
    await ctx.async_provenance(
        ctx.layout.dataset,
        "generate",
        seeds={"dataset": settings.seed},
        extra={"records": len(dataset), "content_hash": dataset.content_hash()},
    )
    return EXIT_OK


async def async_cmd_transform(ctx: CommandContext) -> int:
    """Compute the spectrogram image cache."""
    dataset = _load_dataset(ctx.layout)
    key = cache_key(dataset, ctx.config.tfr)
    target = ctx.layout.images
    if not ctx.force and (target / TFR_MANIFEST_FILE).exists() and (target / IMAGES_FILE).exists():
        if read_json(target / TFR_MANIFEST_FILE).get("key") == key:
            _LOGGER.info("Image cache %s is up to date (key %s)", target, key)
            return EXIT_OK
    cache = await ctx.coordinator.async_transform_dataset(dataset, ctx.config.tfr)
    await ctx.coordinator.async_write(write_image_cache, target, cache)
    await ctx.async_provenance(
        target,
        "transform",
        inputs={"dataset": dataset.content_hash()},
        extra={"key": key, "images": len(cache)},
    )
    return EXIT_OK


async def async_cmd_train(ctx: CommandContext) -> int:
    """Train the reference model once per SNR level."""
    dataset = _load_dataset(ctx.layout)
    cache = _load_images(ctx.layout, dataset, ctx.config)
    train_config = ctx.config.train
    levels = ctx.snr_levels()
    subsets = [cache.at_snr(snr) for snr in levels]
    results = await ctx.coordinator.async_map(
        fit,
        [(level.images, level.labels, train_config, level.sample_ids) for level in subsets],
    )
    for snr, level, result in zip(levels, subsets, results, strict=True):
        directory = ctx.layout.model(snr)
        await ctx.coordinator.async_write(
            _save_fit, directory, result, level.sample_ids, train_config.seed
        )
        selected = result.checkpoint.selected
        _LOGGER.info(
            "Model at %+.0f dB: selected epoch %d, val acc %.3f",
            snr,
            result.checkpoint.selection_epoch,
            selected.val_acc if selected else float("nan"),
        )
        await ctx.async_provenance(
            directory,
            "train",
            seeds={"model": train_config.seed},
            inputs={"images": cache.key},
            extra={
                "snr_db": snr,
                "train_size": result.train_size,
                "parameters": result.model.parameter_count(),
            },
            timing={"seconds_per_epoch": result.seconds_per_epoch},
        )
    return EXIT_OK


def _score_models(
    layout: ArtifactLayout, cache: ImageCache, levels: Sequence[float]
) -> tuple[RunReport, Model]:
    """Score every trained per-SNR model on its own test partition."""
    models, test_sets, confusion, timing = {}, {}, {}, {}
    for snr in levels:
        directory = layout.model(snr)
        if not (directory / ARCH_FILE).exists():
            _LOGGER.warning("No model at %+.0f dB; run `train --snr=%g`", snr, snr)
            continue
        model = _load_model(directory)
        rows = cache.select(_test_ids(directory))
        images, labels = cache.images[rows], cache.labels[rows]
        models[snr], test_sets[snr] = model, (images, labels)
        confusion[snr] = confusion_matrix(evaluate(model, images, labels).predictions, labels)
        manifest = directory / RUN_MANIFEST_FILE
        if manifest.exists():
            seconds = read_json(manifest).get("timing", {}).get("seconds_per_epoch")
            if seconds is not None:
                timing[snr] = float(seconds)
    if not models:
        raise MissingArtifactError(str(layout.root / "models"), "train")
    reference = models[0.0] if 0.0 in models else next(iter(models.values()))
    report = RunReport(
        config_hash="",
        sweep=snr_sweep(models, test_sets),
        confusion=confusion,
        train_seconds_per_epoch=timing,
        parameters=reference.parameter_count(),
        size_bytes=reference.size_bytes(),
    )
    return report, reference


async def async_cmd_evaluate(ctx: CommandContext) -> int:
    """Score the per-SNR models and write confusion and sweep tables."""
    dataset = _load_dataset(ctx.layout)
    cache = _load_images(ctx.layout, dataset, ctx.config)
    report, _ = _score_models(ctx.layout, cache, ctx.snr_levels())
    report.config_hash = ctx.config.section_hash()
    await ctx.coordinator.async_write(write_report, report, ctx.layout.eval)
    for point in report.sweep.points:
        _emit(f"{point.snr_db:+6.1f} dB  accuracy {point.accuracy:.4f}  (n={point.samples})")
    await ctx.async_provenance(ctx.layout.eval, "evaluate", inputs={"images": cache.key})
    return EXIT_OK


async def async_cmd_outliers(ctx: CommandContext) -> int:
    """Estimate per-sample error rates and partition the samples."""
    dataset = _load_dataset(ctx.layout)
    cache = _load_images(ctx.layout, dataset, ctx.config)
    runs = ctx.config.error_rate_runs
    for snr in ctx.snr_levels():
        level = cache.at_snr(snr)
        report = await async_per_sample_error_rates(
            ctx.coordinator,
            level.images,
            level.labels,
            level.sample_ids,
            ctx.config.train,
            runs,
            snr,
        )
        partition = classify_samples(report, ctx.config.curation)
        directory = ctx.layout.curation(snr)
        directory.mkdir(parents=True, exist_ok=True)
        await ctx.coordinator.async_write(write_error_report, report, directory / ERROR_RATES_FILE)
        await ctx.coordinator.async_write(write_json, directory / PARTITION_FILE, partition.to_dict())
        _emit(
            f"{snr:+6.1f} dB  keep {len(partition.keep)}  augment {len(partition.augment)}"
            f"  exclude {len(partition.exclude)}"
        )
        await ctx.async_provenance(
            directory,
            "outliers",
            seeds={"model": ctx.config.train.seed},
            inputs={"images": cache.key},
            extra={"runs": runs, "snr_db": snr},
        )
    return EXIT_OK


async def async_cmd_augment(ctx: CommandContext) -> int:
    """Build targeted variants and train the augmented model per SNR."""
    dataset = _load_dataset(ctx.layout)
    cache = _load_images(ctx.layout, dataset, ctx.config)
    policy, train_config = ctx.config.curation, ctx.config.train
    for snr in ctx.snr_levels():
        directory = ctx.layout.curation(snr)
        report = read_error_report(_require(directory / ERROR_RATES_FILE, "outliers"))
        level = cache.at_snr(snr)
        partition = classify_samples(report, policy)
        labels_by_id = {int(s): int(c) for s, c in zip(level.sample_ids, level.labels, strict=True)}
        plan = plan_augmentation(report, partition, labels_by_id, policy)
        subset = dataset.subset(snr)
        built = await ctx.coordinator.async_run(
            build_augment_pool, subset, plan, policy, ctx.config.tfr, train_config.seed
        )
        await ctx.coordinator.async_write(
            write_curated_dataset, subset, built.variants, directory / "curated"
        )
        await ctx.coordinator.async_write(
            write_json,
            directory / PLAN_FILE,
            {
                "variants": {str(s): n for s, n in plan.items()},
                "class_balance": class_balance(plan, labels_by_id),
            },
        )
        result = await ctx.coordinator.async_run(
            fit,
            level.images,
            level.labels,
            train_config,
            level.sample_ids,
            built.pool,
            sorted(partition.exclude),
        )
        await ctx.coordinator.async_write(
            _save_fit, directory / "model", result, level.sample_ids, train_config.seed
        )
        test = result.split.test
        accuracy = evaluate(result.model, level.images[test], level.labels[test]).accuracy
        _emit(f"{snr:+6.1f} dB  variants {len(built.variants)}  test accuracy {accuracy:.4f}")
        await ctx.async_provenance(
            directory,
            "augment",
            seeds={"model": train_config.seed, "augment": train_config.seed},
            inputs={"images": cache.key, "error_rates": report.config_hash},
            extra={"snr_db": snr, "variants": len(built.variants), "test_accuracy": accuracy},
            timing={"seconds_per_epoch": result.seconds_per_epoch},
        )
    return EXIT_OK


async def async_cmd_bench(ctx: CommandContext) -> int:
    """Time inference of a trained model over the batch-size grid."""
    levels = ctx.snr_levels()
    snr = 0.0 if 0.0 in levels else levels[0]
    model = _load_model(ctx.layout.model(snr))
    settings = ctx.config.evaluation
    table = await ctx.coordinator.async_run(
        bench_latency,
        model,
        settings.bench_batches,
        settings.bench_repetitions,
        BENCH_WARMUP,
        settings.bench_threads,
    )
    directory = ctx.layout.bench
    directory.mkdir(parents=True, exist_ok=True)
    await ctx.coordinator.async_write(_write_csv, table.to_frame(), directory / "latency.csv")
    await ctx.coordinator.async_write(write_json, directory / BENCH_FILE, table.to_dict())
    for row in table.rows:
        _emit(
            f"batch {row.batch_size:4d}  median {row.median_s * 1e3:8.3f} ms"
            f"  throughput {row.throughput:10.1f}/s"
        )
    if not table.plateaued():
        _LOGGER.warning("Throughput did not plateau over batch sizes %s", settings.bench_batches)
    await ctx.async_provenance(
        directory, "bench", extra={"snr_db": snr, "plateaued": table.plateaued()}
    )
    return EXIT_OK


def _first_per_class(cache: ImageCache) -> tuple[list[np.ndarray], list[str]]:
    images, titles = [], []
    for cls in ModulationClass:
        rows = np.flatnonzero(cache.labels == int(cls))
        if rows.size:
            images.append(cache.images[rows[0]])
            titles.append(cls.tag)
    return images, titles


def _render_galleries(cache: ImageCache, directory: Path) -> list[Path]:
    written = []
    levels = sorted({float(s) for s in cache.snr_db if not np.isnan(s)})
    top = GALLERY_SNR if GALLERY_SNR in levels else levels[-1]
    images, titles = _first_per_class(cache.at_snr(top))
    written.append(plot_gallery(images, titles, directory / "gallery_classes.svg"))
    noisy, noisy_titles = [], []
    for cls in NOISE_GALLERY_CLASSES:
        for snr in NOISE_GALLERY_SNRS:
            if snr not in levels:
                continue
            level = cache.at_snr(snr)
            rows = np.flatnonzero(level.labels == int(cls))
            if rows.size:
                noisy.append(level.images[rows[0]])
                noisy_titles.append(f"{cls.tag} {snr:+.0f} dB")
    if noisy:
        written.append(
            plot_gallery(noisy, noisy_titles, directory / "gallery_noise.svg", columns=len(NOISE_GALLERY_SNRS))
        )
    return written


async def async_cmd_report(ctx: CommandContext) -> int:
    """Run the experiments and write the JSON, CSV and SVG report."""
    config = ctx.config
    settings = config.evaluation
    dataset = _load_dataset(ctx.layout)
    cache = _load_images(ctx.layout, dataset, config)
    report, reference = _score_models(ctx.layout, cache, list(config.dataset.snr_grid))
    report.config_hash = config.section_hash()

    bench_file = ctx.layout.bench / BENCH_FILE
    if bench_file.exists():
        report.latency = LatencyTable.from_dict(read_json(bench_file))
    else:
        _LOGGER.info("No benchmark found; run `bench` to add the latency figure")

    if settings.variance_runs:
        level = cache.at_snr(settings.variance_snr)
        report.variance, outcomes = await async_variance_study(
            ctx.coordinator,
            level.images,
            level.labels,
            config.train,
            settings.variance_runs,
            level.sample_ids,
            snr_db=settings.variance_snr,
        )
        report.confused_pairs[settings.variance_snr] = {
            f"{a}/{b}": n for (a, b), n in confused_pair_votes(outcomes).items()
        }

    if settings.ablation_seeds:
        seeds = [config.train.seed + s for s in range(settings.ablation_seeds)]
        report.ablation, by_variant = await async_ablation_grid(
            ctx.coordinator,
            cache,
            dataset,
            config.train,
            config.curation,
            config.tfr,
            snr_grid=settings.ablation_snr,
            seeds=seeds,
            error_rate_runs=config.error_rate_runs,
        )
        for snr, outcomes in by_variant[VARIANT_CNN_LSTM].items():
            report.confused_pairs[snr] = {
                f"{a}/{b}": n for (a, b), n in confused_pair_votes(outcomes).items()
            }

    if settings.kernel_sweep_snr is not None and config.tfr.kernel.kind == KERNEL_CWD:
        report.kernel_sweep = await async_kernel_sweep(
            ctx.coordinator,
            dataset.subset(settings.kernel_sweep_snr),
            config.sweep_alphas,
            config.tfr,
            config.train,
        )

    directory = ctx.layout.report
    await ctx.coordinator.async_write(write_report, report, directory)
    await ctx.coordinator.async_write(
        _write_csv,
        training_parameters(config.train, reference),
        directory / "training_parameters.csv",
    )
    figures = render_report_figures(directory)
    figures.extend(_render_galleries(cache, directory))
    _emit(f"Report written to {directory} ({len(figures)} figures)")
    await ctx.async_provenance(
        directory,
        "report",
        seeds={"model": config.train.seed, "dataset": config.dataset.seed},
        inputs={"images": cache.key},
    )
    return EXIT_OK


Handler = Callable[[CommandContext], Awaitable[int]]


def _add_snr(parser: argparse.ArgumentParser, help_text: str) -> None:
    parser.add_argument("--snr", type=_float_list, default=None, help=help_text)


def build_parser() -> ArgumentParser:
    """Return the argument parser of every subcommand."""
    parser = ArgumentParser(
        prog="intrapulse-amr",
        description="Intrapulse radar modulation recognition pipeline.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {VERSION}")
    parser.add_argument("--config", type=Path, default=None, help="YAML configuration file")
    parser.add_argument("--output", default=None, help="output root directory")
    parser.add_argument("--jobs", type=int, default=None, help="concurrent experiment jobs")
    parser.add_argument("--force", action="store_true", help="rebuild up-to-date outputs")
    verbosity = parser.add_mutually_exclusive_group()
    verbosity.add_argument("--verbose", "-v", action="store_true", help="debug logging")
    verbosity.add_argument("--quiet", "-q", action="store_true", help="warnings only")
    commands = parser.add_subparsers(dest="command", required=True, parser_class=ArgumentParser)

    generate = commands.add_parser("generate", help="generate the labeled dataset")
    generate.add_argument("--per-class", type=int, default=None, dest="per_class")
    _add_snr(generate, "comma-separated SNR grid in dB")
    generate.add_argument("--seed", type=int, default=None)
    generate.set_defaults(handler=async_cmd_generate)

    transform = commands.add_parser("transform", help="compute spectrogram images")
    transform.add_argument("--kernel", choices=KERNELS, default=None)
    transform.add_argument("--alpha", type=float, default=None)
    transform.set_defaults(handler=async_cmd_transform)

    train = commands.add_parser("train", help="train one model per SNR level")
    _add_snr(train, "SNR levels to train (default: the whole grid)")
    train.add_argument("--epochs", type=int, default=None)
    train.add_argument("--seed", type=int, default=None)
    train.set_defaults(handler=async_cmd_train)

    evaluate_cmd = commands.add_parser("evaluate", help="score the trained models")
    _add_snr(evaluate_cmd, "SNR levels to score")
    evaluate_cmd.set_defaults(handler=async_cmd_evaluate)

    outliers = commands.add_parser("outliers", help="estimate per-sample error rates")
    _add_snr(outliers, "SNR levels to analyse")
    outliers.add_argument("--runs", type=int, default=None)
    outliers.set_defaults(handler=async_cmd_outliers)

    augment_cmd = commands.add_parser("augment", help="targeted augmentation and retraining")
    _add_snr(augment_cmd, "SNR levels to curate")
    augment_cmd.set_defaults(handler=async_cmd_augment)

    bench = commands.add_parser("bench", help="latency and throughput benchmark")
    bench.add_argument("--batches", type=_int_list, default=None)
    bench.add_argument("--repetitions", type=int, default=None)
    _add_snr(bench, "SNR level of the model to time (default 0 dB)")
    bench.set_defaults(handler=async_cmd_bench)

    report = commands.add_parser("report", help="run the experiments and render the report")
    report.add_argument("--runs", type=int, default=None, help="variance study runs (0 skips)")
    report.set_defaults(handler=async_cmd_report)
    return parser


def collect_overrides(args: argparse.Namespace) -> dict[str, Any]:
    """Map parsed flags to dotted configuration keys."""
    overrides: dict[str, Any] = {"output": args.output, "jobs": args.jobs}
    command = args.command
    if command == "generate":
        overrides |= {
            "dataset.per_class_count": args.per_class,
            "dataset.snr_grid": args.snr,
            "dataset.seed": args.seed,
        }
    elif command == "transform":
        overrides |= {"tfr.kernel": args.kernel, "tfr.alpha": args.alpha}
    elif command == "train":
        overrides |= {"model.epochs": args.epochs, "model.seed": args.seed}
    elif command == "outliers":
        overrides |= {"curation.runs": args.runs}
    elif command == "bench":
        overrides |= {"eval.bench_batches": args.batches, "eval.bench_repetitions": args.repetitions}
    elif command == "report":
        overrides |= {"eval.variance_runs": args.runs}
    return overrides


def configure_logging(verbose: bool = False, quiet: bool = False) -> None:
    """Configure the root handler once."""
    level = logging.DEBUG if verbose else logging.WARNING if quiet else logging.INFO
    logging.basicConfig(
        level=level,
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
    )


async def async_main(args: argparse.Namespace, config: PipelineConfig) -> int:
    """Run one subcommand inside a coordinator."""
    handler: Handler = args.handler
    async with ExperimentCoordinator(config.jobs) as coordinator:
        ctx = CommandContext(
            args=args,
            config=config,
            layout=ArtifactLayout(config.output),
            coordinator=coordinator,
        )
        return await handler(ctx)


def main(argv: Sequence[str] | None = None) -> int:
    """Parse arguments, run the command and return its exit code."""
    try:
        args = build_parser().parse_args(argv)
        configure_logging(args.verbose, args.quiet)
        config = load_config(args.config, collect_overrides(args))
        return asyncio.run(async_main(args, config))
    except IntrapulseAMRError as err:
        _LOGGER.error("%s", err)
        return err.exit_code
    except OSError as err:
        _LOGGER.error("%s", err)
        return DataError.exit_code
