"""Tests for the time-frequency transforms and the image cache."""

from __future__ import annotations

from pathlib import Path

import numpy as np
import pytest

from intrapulse_amr.const import BOUNDARY_CIRCULAR, PULSE_LENGTH
from intrapulse_amr.exceptions import (
    ConfigError,
    ContainerError,
    DataError,
    ReferencePathError,
    UnsupportedKernelError,
)
from intrapulse_amr.siggen import (
    Dataset,
    ModulationClass,
    ModulationParams,
    sample_params,
    synthesize,
)
from intrapulse_amr.tfr import (
    ImageCache,
    KernelSpec,
    TfrConfig,
    analytic_signal,
    cache_key,
    cohen_transform_fast,
    cohen_transform_reference,
    instantaneous_autocorrelation,
    kernel_weight,
    read_image_cache,
    smoothing_sigma,
    to_image,
    transform_batch,
    waveform_image,
    wigner_ville_bruteforce,
    write_image_cache,
)

from .conftest import MOCK_IMAGE_SIZE, MOCK_SEED


def _tone(freq: float, length: int) -> np.ndarray:
    return np.exp(2j * np.pi * freq * np.arange(length))


def _rel_error(actual: np.ndarray, expected: np.ndarray) -> float:
    return float(np.linalg.norm(actual - expected) / np.linalg.norm(expected))


# ---- Kernel ----


def test_kernel_spec_validation() -> None:
    """Test the kernel grammar rejects bad settings."""
    with pytest.raises(ConfigError, match="unknown kernel"):
        KernelSpec(kind="bj")
    with pytest.raises(ConfigError, match="alpha"):
        KernelSpec(alpha=0.0)
    with pytest.raises(ConfigError, match="lag_window"):
        KernelSpec(lag_window=0)
    with pytest.raises(ConfigError, match="time_step"):
        KernelSpec(time_step=0)


def test_kernel_grid() -> None:
    """Test the fast-path grid for the default settings."""
    spec = KernelSpec()
    assert spec.freq_bins == 128
    assert spec.time_bins(PULSE_LENGTH) == 128


def test_spwvd_is_reserved() -> None:
    """Test the reserved kernel parses but cannot be evaluated."""
    spec = KernelSpec(kind="spwvd")
    with pytest.raises(UnsupportedKernelError, match="unsupported kernel: spwvd"):
        cohen_transform_fast(_tone(0.1, 64), spec)
    with pytest.raises(UnsupportedKernelError):
        cohen_transform_reference(_tone(0.1, 64), spec)


def test_kernel_weight_values() -> None:
    """Test WVD is flat and CWD is Gaussian in lag times doppler."""
    assert kernel_weight(KernelSpec(kind="wvd"), 10, 0.3) == 1.0
    assert kernel_weight(KernelSpec(kind="cwd", alpha=2.0), 0, 0.4) == 1.0
    assert kernel_weight(KernelSpec(kind="cwd", alpha=2.0), 5, 0.1) == pytest.approx(
        np.exp(-2.0 * 0.25)
    )


def test_smoothing_sigma_scales_with_lag() -> None:
    """Test the equivalent time smoothing grows with lag and alpha."""
    assert smoothing_sigma(1.0, 0) == 0.0
    assert smoothing_sigma(1.0, 10) == pytest.approx(2 * smoothing_sigma(1.0, 5))
    assert smoothing_sigma(4.0, 5) == pytest.approx(2 * smoothing_sigma(1.0, 5))


# ---- Analytic signal ----


def test_analytic_signal_keeps_real_part() -> None:
    """Test the real part of the analytic signal is the input."""
    wave = synthesize(ModulationParams(cls=ModulationClass.P3, f0=0.2, code_len=7))
    z = analytic_signal(wave)
    np.testing.assert_allclose(z.samples.real, wave.samples, atol=1e-12)
    assert z.sample_id == wave.sample_id
    assert len(z) == PULSE_LENGTH


def test_analytic_signal_of_tone() -> None:
    """Test a cosine becomes a positive-frequency exponential."""
    t = np.arange(256)
    z = analytic_signal(np.cos(2 * np.pi * 0.125 * t))
    np.testing.assert_allclose(z.samples, _tone(0.125, 256), atol=1e-9)


def test_analytic_signal_rejects_odd_length() -> None:
    """Test odd lengths are rejected."""
    with pytest.raises(DataError, match="even length"):
        analytic_signal(np.ones(7))


# ---- Reference and fast paths ----


def test_autocorrelation_boundaries() -> None:
    """Test zero and circular boundaries differ only at the edges."""
    z = _tone(0.1, 32) * np.linspace(1, 2, 32)
    zero = instantaneous_autocorrelation(z, 4, "zero")
    circ = instantaneous_autocorrelation(z, 4, "circular")
    assert zero[0, 0] == 0.0
    assert circ[0, 0] != 0.0
    np.testing.assert_allclose(zero[4:-4], circ[4:-4])
    with pytest.raises(ConfigError, match="boundary"):
        instantaneous_autocorrelation(z, 4, "reflect")


def test_wvd_paths_match_bruteforce() -> None:
    """Test both WVD paths agree with the point-by-point definition."""
    rng = np.random.default_rng(MOCK_SEED)
    n_len = 64
    z = rng.normal(size=n_len) + 1j * rng.normal(size=n_len)
    expected = wigner_ville_bruteforce(z)
    spec = KernelSpec(kind="wvd", lag_window=n_len - 1, time_step=1)

    fast = cohen_transform_fast(z, spec)
    reference = cohen_transform_reference(z, spec)

    assert fast.shape == expected.shape == (n_len, 2 * n_len)
    assert _rel_error(fast.values, expected.real) <= 1e-9
    assert _rel_error(reference.values, expected) <= 1e-9
    np.testing.assert_allclose(expected.imag, 0.0, atol=1e-9)


def test_wvd_fast_matches_bruteforce_on_pulses() -> None:
    """Test the fast WVD on short analytic pulses of several classes."""
    rng = np.random.default_rng(MOCK_SEED)
    spec = KernelSpec(kind="wvd", lag_window=31, time_step=1)
    for cls in (ModulationClass.LFM, ModulationClass.FRANK, ModulationClass.BPSK):
        pulse = synthesize(sample_params(cls, rng)).samples[:32]
        z = analytic_signal(pulse)
        expected = wigner_ville_bruteforce(z).real
        assert _rel_error(cohen_transform_fast(z, spec).values, expected) <= 1e-9


def test_reference_path_length_limit() -> None:
    """Test long signals are refused by the reference path."""
    with pytest.raises(ReferencePathError, match="use production path"):
        cohen_transform_reference(_tone(0.1, 514), KernelSpec())


def test_cwd_small_alpha_approaches_wvd() -> None:
    """Test the CWD tends to the WVD as alpha shrinks."""
    rng = np.random.default_rng(MOCK_SEED)
    z = rng.normal(size=48) + 1j * rng.normal(size=48)
    wvd = cohen_transform_reference(z, KernelSpec(kind="wvd", lag_window=47))
    cwd = cohen_transform_reference(z, KernelSpec(kind="cwd", alpha=1e-8, lag_window=47))
    assert _rel_error(cwd.values, wvd.values) <= 1e-6


def test_wvd_time_marginal_is_instantaneous_power() -> None:
    """Test summing the WVD over frequency gives |z|^2 up to a constant."""
    rng = np.random.default_rng(MOCK_SEED)
    z = rng.normal(size=40) + 1j * rng.normal(size=40)
    wvd = cohen_transform_reference(z, KernelSpec(kind="wvd", lag_window=39))
    ratio = wvd.values.real.sum(axis=1) / np.abs(z) ** 2
    assert np.ptp(ratio) / np.abs(ratio).mean() <= 1e-6


@pytest.mark.parametrize(
    "spec", [KernelSpec(kind="wvd", lag_window=31), KernelSpec(kind="cwd", alpha=1.0, lag_window=31)]
)
def test_circular_boundary_is_shift_covariant(spec: KernelSpec) -> None:
    """Test a circular time shift of the signal shifts the transform along time."""
    rng = np.random.default_rng(MOCK_SEED)
    z = rng.normal(size=32) + 1j * rng.normal(size=32)
    shift = 5
    base = cohen_transform_reference(z, spec, boundary=BOUNDARY_CIRCULAR).values
    moved = cohen_transform_reference(np.roll(z, shift), spec, boundary=BOUNDARY_CIRCULAR).values
    assert _rel_error(moved, np.roll(base, shift, axis=0)) <= 1e-9


def test_zero_boundary_is_not_shift_covariant() -> None:
    """Test zero padding at the edges breaks circular shift covariance."""
    rng = np.random.default_rng(MOCK_SEED)
    z = rng.normal(size=32) + 1j * rng.normal(size=32)
    spec = KernelSpec(kind="wvd", lag_window=31)
    base = cohen_transform_reference(z, spec).values
    moved = cohen_transform_reference(np.roll(z, 5), spec).values
    assert _rel_error(moved, np.roll(base, 5, axis=0)) > 1e-3



def test_tone_lands_on_its_bin() -> None:
    """Test a tone at 0.125 cycles/sample peaks at bin 2 * f * M."""
    spec = KernelSpec(kind="cwd", alpha=1.0, lag_window=63, time_step=4)
    tfr = cohen_transform_fast(_tone(0.125, 256), spec)
    assert tfr.shape == (64, 128)
    assert int(np.argmax(np.abs(tfr.values).mean(axis=0))) == 32
    assert 32 * tfr.freq_resolution == pytest.approx(0.125)


def test_cwd_suppresses_cross_terms() -> None:
    """Test the CWD attenuates the interference between two tones."""
    z = _tone(0.125, 256) + _tone(0.25, 256)
    cross_bin = 48
    interior = slice(64, 192)
    wvd = cohen_transform_fast(z, KernelSpec(kind="wvd", lag_window=63, time_step=1))
    cwd = cohen_transform_fast(z, KernelSpec(kind="cwd", alpha=1.0, lag_window=63, time_step=1))
    wvd_cross = np.abs(wvd.values[interior, cross_bin]).mean()
    cwd_cross = np.abs(cwd.values[interior, cross_bin]).mean()
    assert cwd_cross < 0.5 * wvd_cross


def test_fast_path_shape_on_full_pulse(tfr_config: TfrConfig) -> None:
    """Test the fast grid on a 2048-sample pulse."""
    wave = synthesize(ModulationParams(cls=ModulationClass.LFM, f0=0.1, delta_f=0.2, chirp_sign=1))
    tfr = cohen_transform_fast(analytic_signal(wave), tfr_config.kernel)
    assert tfr.shape == (32, 32)
    assert tfr.time_step == 64
    assert np.isfinite(tfr.values).all()


def test_transform_rejects_non_finite() -> None:
    """Test NaN input is rejected."""
    z = _tone(0.1, 64)
    z[3] = np.nan
    with pytest.raises(DataError, match="non-finite"):
        cohen_transform_fast(z, KernelSpec(lag_window=15))


# ---- to_image ----


def test_to_image_range_and_shape() -> None:
    """Test images are resized and scaled to [0, 1]."""
    values = np.random.default_rng(MOCK_SEED).normal(size=(32, 40))
    image = to_image(values, (8, 8), sample_id=5, label=3)
    assert image.pixels.shape == (8, 8)
    assert image.pixels.min() == 0.0
    assert image.pixels.max() == 1.0
    assert (image.sample_id, image.label) == (5, 3)


def test_to_image_constant_gives_zeros() -> None:
    """Test a constant TFR maps to an all-zero image."""
    image = to_image(np.full((16, 16), 3.0), (8, 8))
    np.testing.assert_array_equal(image.pixels, np.zeros((8, 8)))


def test_to_image_rejects_non_finite() -> None:
    """Test non-finite TFR entries are rejected."""
    values = np.ones((8, 8))
    values[0, 0] = np.inf
    with pytest.raises(DataError, match="non-finite"):
        to_image(values, (4, 4))


def test_to_image_non_integer_ratio() -> None:
    """Test resizing by a non-integer ratio keeps a ramp monotone."""
    ramp = np.tile(np.arange(30.0), (10, 1))
    pixels = to_image(ramp, (4, 7)).pixels
    assert np.all(np.diff(pixels, axis=1) > 0)


def test_waveform_image(tfr_config: TfrConfig) -> None:
    """Test one pulse becomes a float32 image."""
    wave = synthesize(ModulationParams(cls=ModulationClass.P1, f0=0.2, code_len=6))
    image = waveform_image(wave.samples, tfr_config)
    assert image.dtype == np.float32
    assert image.shape == MOCK_IMAGE_SIZE


def test_transform_batch_rejects_spwvd(small_dataset: Dataset) -> None:
    """Test batches fail fast on the reserved kernel."""
    config = TfrConfig(kernel=KernelSpec(kind="spwvd"), image_size=MOCK_IMAGE_SIZE)
    with pytest.raises(UnsupportedKernelError):
        transform_batch(small_dataset.samples[:2], config)


# ---- Image cache ----


def test_cache_matches_dataset(small_dataset: Dataset, small_cache: ImageCache) -> None:
    """Test the cache follows manifest order."""
    assert len(small_cache) == len(small_dataset)
    np.testing.assert_array_equal(small_cache.sample_ids, small_dataset.sample_ids)
    np.testing.assert_array_equal(small_cache.labels, small_dataset.labels)
    assert small_cache.images.shape[1:] == MOCK_IMAGE_SIZE


def test_cache_key_depends_on_alpha(small_dataset: Dataset, tfr_config: TfrConfig) -> None:
    """Test changing alpha changes the cache key."""
    assert cache_key(small_dataset, tfr_config) != cache_key(
        small_dataset, tfr_config.with_alpha(4.0)
    )
    assert cache_key(small_dataset, tfr_config) == cache_key(small_dataset, tfr_config)


def test_cache_roundtrip(tmp_path: Path, small_cache: ImageCache) -> None:
    """Test an image cache survives writing and reading."""
    write_image_cache(tmp_path, small_cache)
    loaded = read_image_cache(tmp_path, expected_key=small_cache.key)
    np.testing.assert_array_equal(loaded.images, small_cache.images)
    np.testing.assert_array_equal(loaded.snr_db, small_cache.snr_db)
    assert loaded.key == small_cache.key


def test_cache_stale_key(tmp_path: Path, small_cache: ImageCache) -> None:
    """Test a cache built with other settings is refused."""
    write_image_cache(tmp_path, small_cache)
    with pytest.raises(ContainerError, match="cache key"):
        read_image_cache(tmp_path, expected_key="0" * 16)


def test_cache_at_snr_and_select(small_cache: ImageCache) -> None:
    """Test per-SNR views and id lookup."""
    level = small_cache.at_snr(10.0)
    assert len(level) == len(small_cache) // 2
    rows = level.select(level.sample_ids[::-1])
    np.testing.assert_array_equal(rows, np.arange(len(level))[::-1])
    with pytest.raises(DataError):
        small_cache.at_snr(-20.0)
    with pytest.raises(DataError, match="not in image cache"):
        level.select([10_000_000])
