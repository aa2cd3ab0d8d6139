"""Cohen's-class time-frequency representations and classifier images.

Two evaluation paths share the same discretization:

* the reference path builds the full instantaneous autocorrelation
  ``K[n, m] = z[n+m] z*[n-m]``, moves to the ambiguity domain with an FFT
  over ``n`` (``AF[m, l] = sum_n K[n, m] exp(+j 2 pi l n / N)``), multiplies
  by the kernel and transforms back. It is meant for short signals and
  tests.
* the fast path keeps lags ``|m| <= L``, applies the CWD kernel as the
  equivalent Gaussian smoothing of every lag column along time, decimates
  time by ``time_step`` and transforms over lag with an FFT of length
  ``2L + 2``.

Kernel units: ``tau`` is the half-lag index ``m`` in samples and ``nu`` is
doppler in cycles/sample, so the CWD kernel is ``exp(-alpha (m nu)^2)``.
Multiplying by that Gaussian in doppler is a convolution along time with a
Gaussian of standard deviation ``|m| sqrt(alpha / 2) / pi`` samples, i.e.
its doppler width scales as ``1 / (sqrt(alpha) |m|)``.

Frequency bin ``k`` of a transform of length ``M`` sits at ``k / (2M)``
cycles/sample, so the bins cover ``[0, 0.5)`` for analytic inputs. The
``1 / 4 pi^2`` constant of the continuous definition is absorbed into the
unnormalized forward / normalized inverse FFT pair.
"""

from __future__ import annotations

from collections.abc import Sequence
from dataclasses import asdict, dataclass, field
import logging
import math
from pathlib import Path
from typing import Any

import numpy as np
from scipy import fft as sp_fft, signal as sp_signal
from scipy.ndimage import gaussian_filter1d

from .const import (
    BOUNDARY_CIRCULAR,
    BOUNDARY_ZERO,
    DEFAULT_ALPHA,
    DEFAULT_IMAGE_SIZE,
    DEFAULT_KERNEL,
    DEFAULT_LAG_WINDOW,
    DEFAULT_TIME_STEP,
    GAUSSIAN_TRUNCATE,
    IMAGES_FILE,
    IMAGES_MAGIC,
    KERNEL_CWD,
    KERNEL_SPWVD,
    KERNEL_WVD,
    KERNELS,
    LOGGER_NAME,
    REFERENCE_MAX_LENGTH,
    TFR_MANIFEST_FILE,
)
from .exceptions import (
    ConfigError,
    ContainerError,
    DataError,
    ReferencePathError,
    UnsupportedKernelError,
)
from .siggen import Dataset, Waveform
from .storage import check_header, config_hash, first_bad_row, read_f32, read_json, write_f32, write_json

_LOGGER = logging.getLogger(LOGGER_NAME)

BOUNDARIES = (BOUNDARY_ZERO, BOUNDARY_CIRCULAR)


@dataclass(frozen=True)
class KernelSpec:
    """Kernel choice and fast-path grid."""

    kind: str = DEFAULT_KERNEL
    alpha: float = DEFAULT_ALPHA
    lag_window: int = DEFAULT_LAG_WINDOW
    time_step: int = DEFAULT_TIME_STEP

    def __post_init__(self) -> None:
        """Validate the kernel grammar and grid."""
        if self.kind not in KERNELS:
            raise ConfigError(f"unknown kernel {self.kind!r}, expected one of {KERNELS}")
        if not self.alpha > 0:
            raise ConfigError(f"alpha must be positive, got {self.alpha}")
        if self.lag_window < 1:
            raise ConfigError(f"lag_window must be at least 1, got {self.lag_window}")
        if self.time_step < 1:
            raise ConfigError(f"time_step must be at least 1, got {self.time_step}")

    @property
    def freq_bins(self) -> int:
        """Return the fast-path lag FFT length."""
        return 2 * self.lag_window + 2

    def time_bins(self, length: int) -> int:
        """Return the fast-path time bin count for a signal length."""
        return -(-length // self.time_step)

    def ensure_supported(self) -> None:
        """Raise for reserved kernels that have no implementation."""
        if self.kind == KERNEL_SPWVD:
            raise UnsupportedKernelError("unsupported kernel: spwvd")


@dataclass(frozen=True)
class AnalyticSignal:
    """Complex analytic counterpart of a real pulse."""

    samples: np.ndarray
    sample_id: int | None = None

    def __len__(self) -> int:
        """Return the sample count."""
        return len(self.samples)


@dataclass(frozen=True)
class TFRMatrix:
    """A time-frequency distribution on a (time, frequency) grid.

    ``values`` is complex on the reference path and real on the fast path.
    """

    values: np.ndarray
    kernel: KernelSpec
    time_step: int
    freq_resolution: float

    @property
    def shape(self) -> tuple[int, int]:
        """Return ``(time_bins, freq_bins)``."""
        return self.values.shape


@dataclass(frozen=True)
class SpectrogramImage:
    """Normalized classifier input with its label metadata."""

    pixels: np.ndarray
    sample_id: int | None = None
    label: int | None = None


def analytic_signal(w: Waveform | np.ndarray, sample_id: int | None = None) -> AnalyticSignal:
    """Return the analytic signal from the one-sided spectrum.

    The DC and Nyquist bins stay single and positive-frequency bins are
    doubled, so the real part reproduces the input.

    Raises:
        DataError: If the input length is odd or shorter than 2.
    """
    if isinstance(w, Waveform):
        x, sample_id = w.samples, w.sample_id
    else:
        x = w
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1 or x.size < 2 or x.size % 2:
        raise DataError(f"analytic signal needs an even length >= 2, got {x.shape}")
    return AnalyticSignal(samples=sp_signal.hilbert(x), sample_id=sample_id)


def _as_complex(z: AnalyticSignal | np.ndarray) -> np.ndarray:
    samples = z.samples if isinstance(z, AnalyticSignal) else z
    samples = np.asarray(samples, dtype=np.complex128)
    if not np.isfinite(samples).all():
        raise DataError("analytic signal has non-finite samples")
    return samples


def instantaneous_autocorrelation(
    z: np.ndarray, max_lag: int, boundary: str = BOUNDARY_ZERO
) -> np.ndarray:
    """Return ``K[n, m] = z[n+m] z*[n-m]`` for ``m = -max_lag..max_lag``.

    Column ``m + max_lag`` holds lag ``m``. Out-of-range samples are zero for
    the ``"zero"`` boundary and wrap modulo N for ``"circular"``.
    """
    if boundary not in BOUNDARIES:
        raise ConfigError(f"unknown boundary {boundary!r}")
    n_len = z.size
    n = np.arange(n_len)[:, None]
    m = np.arange(-max_lag, max_lag + 1)[None, :]
    ahead, behind = n + m, n - m
    if boundary == BOUNDARY_CIRCULAR:
        return z[ahead % n_len] * np.conj(z[behind % n_len])
    valid = (ahead >= 0) & (ahead < n_len) & (behind >= 0) & (behind < n_len)
    product = z[np.clip(ahead, 0, n_len - 1)] * np.conj(z[np.clip(behind, 0, n_len - 1)])
    return np.where(valid, product, 0.0)


def ambiguity_function(
    z: AnalyticSignal | np.ndarray, boundary: str = BOUNDARY_ZERO
) -> np.ndarray:
    """Return the discrete ambiguity function ``AF[m + N - 1, l]``.

    Rows are lags ``m = -(N-1)..N-1``, columns are doppler bins
    ``l = 0..N-1`` in FFT order (``nu_l = l / N`` cycles/sample, bins above
    ``N / 2`` are negative doppler).
    """
    samples = _as_complex(z)
    n_len = samples.size
    kern = instantaneous_autocorrelation(samples, n_len - 1, boundary)
    return (n_len * sp_fft.ifft(kern, axis=0)).T


def _signed_doppler(n_len: int) -> np.ndarray:
    return sp_fft.fftfreq(n_len)


def kernel_weight(spec: KernelSpec, tau: Any, nu: Any) -> np.ndarray | float:
    """Evaluate the kernel at lag ``tau`` (samples) and doppler ``nu`` (cycles/sample)."""
    spec.ensure_supported()
    tau, nu = np.asarray(tau, dtype=np.float64), np.asarray(nu, dtype=np.float64)
    if spec.kind == KERNEL_WVD:
        weight = np.ones(np.broadcast_shapes(tau.shape, nu.shape))
    else:
        weight = np.exp(-spec.alpha * (tau * nu) ** 2)
    return float(weight) if weight.ndim == 0 else weight


def _lag_fft(kern: np.ndarray, max_lag: int, n_freq: int) -> np.ndarray:
    """FFT over lag with lag ``m`` stored at index ``m mod n_freq``."""
    rows = kern.shape[0]
    buf = np.zeros((rows, n_freq), dtype=np.complex128)
    lags = np.arange(-max_lag, max_lag + 1)
    buf[:, lags % n_freq] = kern
    return sp_fft.fft(buf, axis=1)


def cohen_transform_reference(
    z: AnalyticSignal | np.ndarray,
    spec: KernelSpec,
    boundary: str = BOUNDARY_ZERO,
) -> TFRMatrix:
    """Evaluate the transform through the ambiguity domain.

    The frequency grid has ``2 max(L, N - 1) + 2`` bins, which is ``2N`` for
    a full lag window and equals the fast-path grid whenever ``L >= N - 1``.

    Raises:
        ReferencePathError: If the signal is longer than 512 samples.
    """
    spec.ensure_supported()
    samples = _as_complex(z)
    n_len = samples.size
    if n_len > REFERENCE_MAX_LENGTH:
        raise ReferencePathError(
            f"signal of {n_len} samples is too long for the reference path; use production path"
        )
    max_lag = n_len - 1
    af = ambiguity_function(samples, boundary)
    tau = np.arange(-max_lag, max_lag + 1)[:, None]
    nu = _signed_doppler(n_len)[None, :]
    weighted = af * kernel_weight(spec, tau, nu)
    smoothed = sp_fft.fft(weighted.T, axis=0) / n_len
    n_freq = 2 * max(spec.lag_window, max_lag) + 2
    values = _lag_fft(smoothed, max_lag, n_freq)
    return TFRMatrix(values=values, kernel=spec, time_step=1, freq_resolution=1 / (2 * n_freq))


def wigner_ville_bruteforce(z: AnalyticSignal | np.ndarray, n_freq: int | None = None) -> np.ndarray:
    """Evaluate ``W(t, w) = sum_m z[t+m] z*[t-m] exp(-j w m)`` point by point.

    ``w_k = 2 pi k / n_freq`` with ``n_freq`` defaulting to ``2N``.
    """
    samples = _as_complex(z)
    n_len = samples.size
    n_freq = n_freq or 2 * n_len
    out = np.zeros((n_len, n_freq), dtype=np.complex128)
    for t in range(n_len):
        for k in range(n_freq):
            omega = 2 * np.pi * k / n_freq
            acc = 0j
            for m in range(-(n_len - 1), n_len):
                if 0 <= t + m < n_len and 0 <= t - m < n_len:
                    acc += samples[t + m] * np.conj(samples[t - m]) * np.exp(-1j * omega * m)
            out[t, k] = acc
    return out


def smoothing_sigma(alpha: float, lag: int) -> float:
    """Return the time-smoothing std (samples) equivalent to the CWD kernel at one lag."""
    return abs(lag) * math.sqrt(alpha / 2) / math.pi


def cohen_transform_fast(z: AnalyticSignal | np.ndarray, spec: KernelSpec) -> TFRMatrix:
    """Evaluate the lag-windowed, time-decimated transform.

    Lags beyond the signal are zero-padded. The output is real (the lag
    sequence is Hermitian at every time bin).
    """
    spec.ensure_supported()
    samples = _as_complex(z)
    max_lag = spec.lag_window
    times = np.arange(0, samples.size, spec.time_step)
    if spec.kind == KERNEL_CWD:
        kern = instantaneous_autocorrelation(samples, max_lag)
        for col, lag in enumerate(range(-max_lag, max_lag + 1)):
            sigma = smoothing_sigma(spec.alpha, lag)
            if sigma == 0:
                continue
            for part in (kern[:, col].real, kern[:, col].imag):
                part[:] = gaussian_filter1d(
                    part, sigma, mode="constant", cval=0.0, truncate=GAUSSIAN_TRUNCATE
                )
        kern = kern[times]
    else:
        kern = instantaneous_autocorrelation(samples, max_lag)[times]
    values = _lag_fft(kern, max_lag, spec.freq_bins).real
    return TFRMatrix(
        values=values,
        kernel=spec,
        time_step=spec.time_step,
        freq_resolution=1 / (2 * spec.freq_bins),
    )


def _area_weights(n_in: int, n_out: int) -> np.ndarray:
    """Return the ``[n_out, n_in]`` area-average resampling matrix."""
    scale = n_in / n_out
    edges_out = np.arange(n_out + 1) * scale
    lo = np.maximum(edges_out[:-1, None], np.arange(n_in)[None, :])
    hi = np.minimum(edges_out[1:, None], np.arange(1, n_in + 1)[None, :])
    return np.clip(hi - lo, 0.0, None) / scale


def to_image(
    tfr: TFRMatrix | np.ndarray,
    out_size: tuple[int, int] = DEFAULT_IMAGE_SIZE,
    sample_id: int | None = None,
    label: int | None = None,
) -> SpectrogramImage:
    """Reduce a TFR to a normalized image.

    Magnitude, then ``log1p``, then area-average resize to ``out_size`` and
    per-image min-max scaling to [0, 1]. A constant input gives zeros.
    """
    values = tfr.values if isinstance(tfr, TFRMatrix) else np.asarray(tfr)
    if not np.isfinite(values).all():
        raise DataError("TFR has non-finite entries")
    logmag = np.log1p(np.abs(values))
    rows = _area_weights(logmag.shape[0], out_size[0])
    cols = _area_weights(logmag.shape[1], out_size[1])
    resized = rows @ logmag @ cols.T
    low, high = resized.min(), resized.max()
    if high - low <= np.finfo(np.float64).eps * max(abs(high), 1.0):
        pixels = np.zeros(out_size)
    else:
        pixels = np.clip((resized - low) / (high - low), 0.0, 1.0)
    return SpectrogramImage(pixels=pixels, sample_id=sample_id, label=label)


@dataclass(frozen=True)
class TfrConfig:
    """Transform settings for the production image pipeline."""

    kernel: KernelSpec = field(default_factory=KernelSpec)
    image_size: tuple[int, int] = DEFAULT_IMAGE_SIZE

    def to_dict(self) -> dict[str, Any]:
        """Return a JSON-ready dict (part of the cache key)."""
        return {"kernel": asdict(self.kernel), "image_size": list(self.image_size)}

    def with_alpha(self, alpha: float) -> TfrConfig:
        """Return a copy with a different CWD spread."""
        kernel = KernelSpec(
            kind=self.kernel.kind,
            alpha=alpha,
            lag_window=self.kernel.lag_window,
            time_step=self.kernel.time_step,
        )
        return TfrConfig(kernel=kernel, image_size=self.image_size)


def waveform_image(samples: np.ndarray, config: TfrConfig) -> np.ndarray:
    """Run one real pulse through analytic signal, fast TFR and imaging."""
    tfr = cohen_transform_fast(analytic_signal(samples), config.kernel)
    return to_image(tfr, config.image_size).pixels.astype(np.float32)


def transform_batch(samples: np.ndarray, config: TfrConfig) -> np.ndarray:
    """Transform a block of pulses ``[R, N]`` into images ``[R, H, W]``."""
    config.kernel.ensure_supported()
    out = np.empty((samples.shape[0], *config.image_size), dtype=np.float32)
    for row, pulse in enumerate(samples):
        out[row] = waveform_image(pulse, config)
    return out


@dataclass
class ImageCache:
    """Spectrogram images of a dataset in manifest order."""

    images: np.ndarray
    sample_ids: np.ndarray
    labels: np.ndarray
    snr_db: np.ndarray
    key: str
    config: dict[str, Any] = field(default_factory=dict)

    def __len__(self) -> int:
        """Return the image count."""
        return self.images.shape[0]

    def select(self, sample_ids: Sequence[int]) -> np.ndarray:
        """Return row indices of the given sample ids, in that order."""
        lookup = {int(s): i for i, s in enumerate(self.sample_ids)}
        try:
            return np.array([lookup[int(s)] for s in sample_ids], dtype=np.int64)
        except KeyError as err:
            raise DataError(f"sample {err.args[0]} not in image cache") from err

    def at_snr(self, snr_db: float) -> ImageCache:
        """Return the images generated at one SNR level."""
        mask = np.isclose(self.snr_db, snr_db, atol=1e-9)
        if not mask.any():
            raise DataError(f"no images at {snr_db} dB")
        return ImageCache(
            images=self.images[mask],
            sample_ids=self.sample_ids[mask],
            labels=self.labels[mask],
            snr_db=self.snr_db[mask],
            key=self.key,
            config=self.config,
        )


def cache_key(dataset: Dataset, config: TfrConfig) -> str:
    """Return the cache key of (dataset content, transform settings)."""
    return config_hash({"dataset": dataset.content_hash(), "tfr": config.to_dict()})


def transform_dataset(dataset: Dataset, config: TfrConfig) -> ImageCache:
    """Transform every record of a dataset serially."""
    images = transform_batch(dataset.samples, config)
    return make_image_cache(dataset, config, images)


def make_image_cache(dataset: Dataset, config: TfrConfig, images: np.ndarray) -> ImageCache:
    """Wrap images computed for ``dataset`` into a keyed cache."""
    if images.shape[0] != len(dataset):
        raise DataError(f"{images.shape[0]} images for {len(dataset)} records")
    return ImageCache(
        images=images,
        sample_ids=dataset.sample_ids,
        labels=dataset.labels,
        snr_db=np.array([np.nan if r.snr_db is None else r.snr_db for r in dataset.records]),
        key=cache_key(dataset, config),
        config=config.to_dict(),
    )


def write_image_cache(path: Path, cache: ImageCache) -> None:
    """Write ``tfr_manifest.json`` and ``images.bin``."""
    path = Path(path)
    write_f32(path / IMAGES_FILE, cache.images)
    write_json(
        path / TFR_MANIFEST_FILE,
        {
            "magic": IMAGES_MAGIC,
            "format_version": 1,
            "key": cache.key,
            "config": cache.config,
            "image_shape": list(cache.images.shape[1:]),
            "record_count": len(cache),
            "sample_ids": [int(s) for s in cache.sample_ids],
            "labels": [int(c) for c in cache.labels],
            "snr_db": [None if np.isnan(s) else float(s) for s in cache.snr_db],
        },
    )
    _LOGGER.info("Wrote %d images to %s (key %s)", len(cache), path, cache.key)


def read_image_cache(path: Path, expected_key: str | None = None) -> ImageCache:
    """Read an image cache, optionally requiring a matching key.

    Raises:
        ContainerError: On bad headers, sizes, non-finite images or a stale key.
    """
    path = Path(path)
    manifest = read_json(path / TFR_MANIFEST_FILE)
    check_header(manifest, IMAGES_MAGIC, path / TFR_MANIFEST_FILE)
    if expected_key is not None and manifest.get("key") != expected_key:
        raise ContainerError(f"{path}: cache key {manifest.get('key')} != {expected_key}")
    count = int(manifest["record_count"])
    height, width = manifest["image_shape"]
    images = read_f32(path / IMAGES_FILE, (count, height, width))
    bad = first_bad_row(images)
    if bad is not None:
        raise ContainerError(
            f"{path}: image {bad} (sample_id {manifest['sample_ids'][bad]}) is not finite"
        )
    return ImageCache(
        images=images,
        sample_ids=np.array(manifest["sample_ids"], dtype=np.int64),
        labels=np.array(manifest["labels"], dtype=np.int64),
        snr_db=np.array([np.nan if s is None else s for s in manifest["snr_db"]], dtype=np.float64),
        key=manifest["key"],
        config=manifest.get("config", {}),
    )
