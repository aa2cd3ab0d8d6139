"""SVG figures rendered from the report CSVs."""

from __future__ import annotations

from collections.abc import Sequence
import logging
from pathlib import Path
from typing import Any, Final

import matplotlib as mpl
from matplotlib.figure import Figure
import numpy as np
import pandas as pd

from .const import LITERATURE_BASELINES, LOGGER_NAME, REPORTED_MEAN_ACCURACY
from .exceptions import DataError

_LOGGER: Final = logging.getLogger(LOGGER_NAME)

# Fixed ids and no date stamp, so reruns give identical files
SVG_RC: Final = {"svg.hashsalt": "intrapulse-amr", "svg.fonttype": "none"}
SVG_METADATA: Final = {"Date": None}


def _save(fig: Figure, path: Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with mpl.rc_context(SVG_RC):
        fig.savefig(path, format="svg", metadata=SVG_METADATA, bbox_inches="tight")
    _LOGGER.debug("Wrote figure %s", path)
    return path


def _read_csv(path: Path, **kwargs: Any) -> pd.DataFrame:
    try:
        return pd.read_csv(path, **kwargs)
    except FileNotFoundError as err:
        raise DataError(f"report table {path} does not exist") from err


def plot_confusion(frame: pd.DataFrame, path: Path, title: str = "") -> Path:
    """Draw a confusion matrix (rows true, columns predicted)."""
    counts = frame.to_numpy(dtype=float)
    totals = counts.sum(axis=1, keepdims=True)
    share = np.divide(counts, totals, out=np.zeros_like(counts), where=totals > 0)
    fig = Figure(figsize=(6.5, 5.5))
    ax = fig.add_subplot()
    mesh = ax.imshow(share, cmap="Blues", vmin=0.0, vmax=1.0)
    fig.colorbar(mesh, ax=ax, fraction=0.046)
    ticks = np.arange(len(frame.columns))
    ax.set_xticks(ticks, labels=list(frame.columns), rotation=45, ha="right")
    ax.set_yticks(ticks, labels=list(frame.index))
    for (row, col), value in np.ndenumerate(counts):
        if value:
            ax.text(
                col,
                row,
                f"{int(value)}",
                ha="center",
                va="center",
                fontsize=7,
                color="white" if share[row, col] > 0.5 else "black",
            )
    ax.set_xlabel("Predicted")
    ax.set_ylabel("True")
    ax.set_title(title)
    return _save(fig, path)


def plot_ablation(frame: pd.DataFrame, path: Path) -> Path:
    """Draw grouped bars of mean accuracy per SNR and variant."""
    pivot = frame.pivot_table(index="snr_db", columns="variant", values="mean_accuracy")
    errors = frame.pivot_table(index="snr_db", columns="variant", values="std_accuracy")
    fig = Figure(figsize=(8, 4))
    ax = fig.add_subplot()
    width = 0.8 / max(len(pivot.columns), 1)
    positions = np.arange(len(pivot.index))
    for offset, variant in enumerate(pivot.columns):
        ax.bar(
            positions + offset * width,
            pivot[variant].to_numpy(),
            width,
            yerr=errors[variant].to_numpy(),
            label=variant,
            capsize=2,
        )
    ax.set_xticks(
        positions + width * (len(pivot.columns) - 1) / 2,
        labels=[f"{snr:g}" for snr in pivot.index],
    )
    ax.set_xlabel("SNR (dB)")
    ax.set_ylabel("Mean test accuracy")
    ax.set_ylim(0.0, 1.0)
    ax.legend(fontsize=8)
    return _save(fig, path)


def plot_histogram(frame: pd.DataFrame, path: Path) -> Path:
    """Draw the refold accuracy histogram with the reported mean marked."""
    fig = Figure(figsize=(6, 4))
    ax = fig.add_subplot()
    widths = (frame["bin_high"] - frame["bin_low"]).to_numpy()
    ax.bar(frame["bin_low"], frame["count"], width=widths, align="edge", edgecolor="black")
    ax.axvline(REPORTED_MEAN_ACCURACY, color="gray", linestyle="--", label="reported mean")
    ax.set_xlabel("Test accuracy")
    ax.set_ylabel("Runs")
    ax.legend(fontsize=8)
    return _save(fig, path)


def plot_snr_sweep(
    frame: pd.DataFrame,
    path: Path,
    literature: Sequence[dict[str, Any]] = LITERATURE_BASELINES,
) -> Path:
    """Draw accuracy against SNR, with reported 0 dB results as reference lines."""
    fig = Figure(figsize=(6, 4))
    ax = fig.add_subplot()
    ax.plot(frame["snr_db"], frame["accuracy"], marker="o", label="reproduced")
    ax.plot(
        frame["snr_db"], frame["chance_floor"], color="gray", linestyle=":", label="chance floor"
    )
    for row in literature:
        ax.axhline(row["accuracy"], linestyle="--", linewidth=0.8, label=f"{row['model']} (reported, 0 dB)")
    ax.set_xlabel("SNR (dB)")
    ax.set_ylabel("Test accuracy")
    ax.set_ylim(0.0, 1.02)
    ax.legend(fontsize=7, loc="lower right")
    return _save(fig, path)


def plot_latency(frame: pd.DataFrame, path: Path) -> Path:
    """Draw median latency against throughput, one point per batch size."""
    fig = Figure(figsize=(6, 4))
    ax = fig.add_subplot()
    latency_ms = frame["median_s"].to_numpy() * 1e3
    ax.plot(frame["throughput"], latency_ms, marker="o")
    for batch, x, y in zip(frame["batch_size"], frame["throughput"], latency_ms, strict=True):
        ax.annotate(f"{int(batch)}", (x, y), textcoords="offset points", xytext=(4, 4), fontsize=8)
    ax.set_xlabel("Throughput (pulses/s)")
    ax.set_ylabel("Median latency (ms)")
    return _save(fig, path)


def plot_kernel_sweep(frame: pd.DataFrame, path: Path) -> Path:
    """Draw accuracy against the CWD spread."""
    fig = Figure(figsize=(5, 3.5))
    ax = fig.add_subplot()
    ax.semilogx(frame["alpha"], frame["accuracy"], marker="o")
    ax.set_xlabel("alpha")
    ax.set_ylabel("Test accuracy")
    return _save(fig, path)


def plot_gallery(
    images: Sequence[np.ndarray], titles: Sequence[str], path: Path, columns: int = 4
) -> Path:
    """Draw a grid of classifier images (time on x, frequency on y)."""
    if len(images) != len(titles):
        raise DataError(f"{len(images)} images but {len(titles)} titles")
    if not images:
        raise DataError("gallery needs at least one image")
    columns = min(columns, len(images))
    rows = -(-len(images) // columns)
    fig = Figure(figsize=(2.2 * columns, 2.2 * rows))
    axes = fig.subplots(rows, columns, squeeze=False)
    for ax in axes.flat:
        ax.set_axis_off()
    for ax, image, title in zip(axes.flat, images, titles, strict=False):
        ax.imshow(np.asarray(image).T, origin="lower", aspect="auto", cmap="viridis")
        ax.set_title(title, fontsize=8)
    fig.tight_layout()
    return _save(fig, path)


def render_report_figures(report_dir: Path) -> list[Path]:
    """Render an SVG next to every CSV table found in a report directory."""
    report_dir = Path(report_dir)
    written = [
        plot_confusion(
            _read_csv(csv, index_col=0),
            csv.with_suffix(".svg"),
            title=f"Confusion {csv.stem.removeprefix('confusion_snr_')}",
        )
        for csv in sorted(report_dir.glob("confusion_snr_*.csv"))
    ]
    renderers = {
        "snr_sweep.csv": plot_snr_sweep,
        "variance_histogram.csv": plot_histogram,
        "ablation.csv": plot_ablation,
        "latency.csv": plot_latency,
        "kernel_sweep.csv": plot_kernel_sweep,
    }
    for name, render in renderers.items():
        csv = report_dir / name
        if csv.exists():
            written.append(render(_read_csv(csv), csv.with_suffix(".svg")))
    _LOGGER.info("Rendered %d figures in %s", len(written), report_dir)
    return written
