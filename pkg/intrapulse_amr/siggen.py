"""Intrapulse radar waveform synthesis and labeled dataset containers.

Eleven modulation classes are synthesized from their instantaneous phase
laws with unit amplitude, optionally corrupted by calibrated additive white
Gaussian noise, and stored as a directory holding ``manifest.json`` plus a
little-endian float32 ``samples.bin``.

Time is measured in samples (sampling period 1) and all frequencies are
normalized to cycles/sample. The pulse duration T is the full record.
"""

from __future__ import annotations

from collections.abc import Iterator, Sequence
import dataclasses
from dataclasses import dataclass, field
from enum import IntEnum
import hashlib
import logging
import math
from pathlib import Path
from typing import Any

import numpy as np

from .const import (
    BARKER_LENGTHS,
    BFSK_F_RANGE,
    BFSK_MIN_SEPARATION,
    CARRIER_F0_RANGE,
    DATASET_MAGIC,
    DEFAULT_PER_CLASS_COUNT,
    DEFAULT_SEED,
    DEFAULT_SNR_GRID,
    FORMAT_VERSION,
    LFM_DELTA_F_RANGE,
    LFM_F0_RANGE,
    LOGGER_NAME,
    MANIFEST_FILE,
    MAX_REJECTIONS,
    NYQUIST,
    POLYPHASE_F0_RANGE,
    POLYPHASE_ORDERS,
    POLYTIME_DELTA_F_RANGE,
    POLYTIME_PHASE_STATES,
    POLYTIME_SEGMENTS,
    PROVENANCE_AUGMENTED,
    PROVENANCE_ORIGINAL,
    PULSE_LENGTH,
    QFM_DELTA_F_RANGE,
    QFM_F0_RANGE,
    SAMPLES_FILE,
    SNR_RANGE,
)
from .exceptions import ConfigError, ContainerError, DataError, DegenerateSignalError
from .storage import F32_LE, check_header, first_bad_row, read_f32, read_json, write_f32, write_json

_LOGGER = logging.getLogger(LOGGER_NAME)


class ModulationClass(IntEnum):
    """The eleven intrapulse modulation classes, encoded alphabetically."""

    BFSK = 0
    BPSK = 1
    FRANK = 2
    LFM = 3
    P1 = 4
    P2 = 5
    P3 = 6
    P4 = 7
    QFM = 8
    T1 = 9
    T2 = 10

    @property
    def tag(self) -> str:
        """Return the display tag ("Frank" rather than "FRANK")."""
        return "Frank" if self is ModulationClass.FRANK else self.name

    @classmethod
    def from_tag(cls, tag: str) -> ModulationClass:
        """Parse a class tag, case-insensitively."""
        try:
            return cls[tag.upper()]
        except KeyError as err:
            raise DataError(f"unknown modulation class {tag!r}") from err


CLASS_TAGS: tuple[str, ...] = tuple(c.tag for c in ModulationClass)

CHIRP_CLASSES = frozenset({ModulationClass.LFM, ModulationClass.QFM})
BARKER_CLASSES = frozenset({ModulationClass.BPSK, ModulationClass.BFSK})
MATRIX_CLASSES = frozenset({ModulationClass.FRANK, ModulationClass.P1, ModulationClass.P2})
CHIP_CLASSES = frozenset({ModulationClass.P3, ModulationClass.P4})
POLYTIME_CLASSES = frozenset({ModulationClass.T1, ModulationClass.T2})

# Barker sequences as +1/-1 chips
BARKER_CODES: dict[int, tuple[int, ...]] = {
    5: (1, 1, 1, -1, 1),
    7: (1, 1, 1, -1, -1, 1, -1),
    11: (1, 1, 1, -1, -1, -1, 1, -1, -1, 1, -1),
    13: (1, 1, 1, 1, 1, -1, -1, 1, 1, -1, 1, -1, 1),
}


def barker_code(length: int) -> np.ndarray:
    """Return the Barker sequence of a given length as +1/-1 chips."""
    try:
        return np.array(BARKER_CODES[length], dtype=np.int8)
    except KeyError as err:
        raise DataError(f"no Barker code of length {length}") from err


@dataclass(frozen=True)
class ModulationParams:
    """Sampled waveform parameters for one pulse.

    Fields not used by a class stay ``None``. ``theta_code`` holds one bit
    per chip: the BPSK phase is ``bit * pi`` and BFSK selects ``f1`` for 0
    and ``f2`` for 1.
    """

    cls: ModulationClass
    f0: float | None = None
    delta_f: float | None = None
    f1: float | None = None
    f2: float | None = None
    code_len: int | None = None
    chirp_sign: int | None = None
    segments_m: int | None = None
    phase_states_n: int | None = None
    theta_code: tuple[int, ...] | None = None

    def to_dict(self) -> dict[str, Any]:
        """Return a JSON-ready dict (class as tag, unset fields omitted)."""
        data: dict[str, Any] = {"class": self.cls.tag}
        for f in dataclasses.fields(self):
            if f.name == "cls":
                continue
            value = getattr(self, f.name)
            if value is not None:
                data[f.name] = list(value) if f.name == "theta_code" else value
        return data

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> ModulationParams:
        """Rebuild parameters from :meth:`to_dict` output."""
        values = dict(data)
        tag = values.pop("class")
        if "theta_code" in values:
            values["theta_code"] = tuple(int(b) for b in values["theta_code"])
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(values) - known
        if unknown:
            raise DataError(f"unknown parameter fields {sorted(unknown)}")
        return cls(cls=ModulationClass.from_tag(tag), **values)


@dataclass(frozen=True)
class Waveform:
    """One real pulse with its label and generation metadata."""

    samples: np.ndarray
    cls: ModulationClass
    params: ModulationParams
    snr_db: float | None = None
    sample_id: int = 0
    parent_id: int | None = None
    provenance: str = PROVENANCE_ORIGINAL

    @property
    def is_clean(self) -> bool:
        """Return True when no noise has been added."""
        return self.snr_db is None


def _uniform(rng: np.random.Generator, bounds: tuple[float, float]) -> float:
    return float(rng.uniform(bounds[0], bounds[1]))


def _in_band(track: np.ndarray) -> bool:
    return bool(track.min() > 0.0 and track.max() < NYQUIST)


def sample_params(cls: ModulationClass, rng: np.random.Generator) -> ModulationParams:
    """Draw waveform parameters uniformly within the class ranges.

    Chirp classes redraw (f0, delta_f, sign) until the whole instantaneous
    frequency track lies in (0, 0.5); BFSK redraws until the two tones are
    at least ``BFSK_MIN_SEPARATION`` apart.
    """
    cls = ModulationClass(cls)
    if cls in CHIRP_CLASSES:
        f0_range, df_range = (
            (LFM_F0_RANGE, LFM_DELTA_F_RANGE)
            if cls is ModulationClass.LFM
            else (QFM_F0_RANGE, QFM_DELTA_F_RANGE)
        )
        for _ in range(MAX_REJECTIONS):
            params = ModulationParams(
                cls=cls,
                f0=_uniform(rng, f0_range),
                delta_f=_uniform(rng, df_range),
                chirp_sign=int(rng.choice((-1, 1))),
            )
            if _in_band(instantaneous_frequency(params)):
                return params
        raise DataError(f"could not draw in-band parameters for {cls.tag}")

    if cls is ModulationClass.BPSK:
        n = int(rng.choice(BARKER_LENGTHS))
        bits = tuple(int(b) for b in (barker_code(n) < 0))
        return ModulationParams(
            cls=cls, f0=_uniform(rng, CARRIER_F0_RANGE), code_len=n, theta_code=bits
        )

    if cls is ModulationClass.BFSK:
        n = int(rng.choice(BARKER_LENGTHS))
        bits = tuple(int(b) for b in (barker_code(n) < 0))
        for _ in range(MAX_REJECTIONS):
            f1, f2 = _uniform(rng, BFSK_F_RANGE), _uniform(rng, BFSK_F_RANGE)
            if abs(f1 - f2) >= BFSK_MIN_SEPARATION:
                return ModulationParams(cls=cls, f1=f1, f2=f2, code_len=n, theta_code=bits)
        raise DataError("could not draw separated BFSK tones")

    if cls in POLYTIME_CLASSES:
        # delta_f is drawn for the record; the polytime phase law does not use it
        return ModulationParams(
            cls=cls,
            f0=_uniform(rng, CARRIER_F0_RANGE),
            delta_f=_uniform(rng, POLYTIME_DELTA_F_RANGE),
            segments_m=POLYTIME_SEGMENTS,
            phase_states_n=POLYTIME_PHASE_STATES,
        )

    return ModulationParams(
        cls=cls,
        f0=_uniform(rng, POLYPHASE_F0_RANGE),
        code_len=int(rng.choice(POLYPHASE_ORDERS)),
    )


def _time_grid(t_index: np.ndarray | None) -> np.ndarray:
    if t_index is None:
        return np.arange(PULSE_LENGTH, dtype=np.float64)
    return np.asarray(t_index, dtype=np.float64)


def chip_indices(params: ModulationParams, t_index: np.ndarray | None = None) -> np.ndarray:
    """Return the chip (or polytime segment) index of every sample.

    Codes fill the pulse by cyclic repetition of chips of length
    ``T // chips``; polytime classes return the segment index j.
    """
    t = _time_grid(t_index).astype(np.int64)
    cls = params.cls
    if cls in BARKER_CLASSES or cls in CHIP_CLASSES:
        chips = params.code_len
    elif cls in MATRIX_CLASSES:
        chips = params.code_len**2
    elif cls in POLYTIME_CLASSES:
        return (params.segments_m * t) // PULSE_LENGTH
    else:
        raise DataError(f"{cls.tag} has no chip structure")
    chip_len = PULSE_LENGTH // chips
    return (t // chip_len) % chips


def _matrix_code_phase(cls: ModulationClass, i: np.ndarray, j: np.ndarray, m: int) -> np.ndarray:
    if cls is ModulationClass.FRANK:
        return 2 * np.pi * (i - 1) * (j - 1) / m
    if cls is ModulationClass.P1:
        return -np.pi * (m - (2 * j - 1)) * ((j - 1) * m + (i - 1)) / m
    return -np.pi * (2 * i - 1 - m) * (2 * j - 1 - m) / (2 * m)


def code_phase(params: ModulationParams, t_index: np.ndarray | None = None) -> np.ndarray:
    """Return the code (non-carrier) phase term of a coded class, radians."""
    t = _time_grid(t_index)
    cls = params.cls
    if cls is ModulationClass.BPSK:
        bits = np.asarray(params.theta_code)
        return np.pi * bits[chip_indices(params, t)]
    if cls in MATRIX_CLASSES:
        c = chip_indices(params, t)
        m = params.code_len
        i = (c % m) + 1
        j = (c // m) + 1
        return _matrix_code_phase(cls, i, j, m)
    if cls in CHIP_CLASSES:
        i = chip_indices(params, t) + 1
        nc = params.code_len
        if cls is ModulationClass.P3:
            return np.pi * (i - 1) ** 2 / nc
        return np.pi * ((i - 1) ** 2 / nc - (i - 1))
    if cls in POLYTIME_CLASSES:
        m, n = params.segments_m, params.phase_states_n
        big_t = PULSE_LENGTH
        j = np.floor(m * t / big_t)
        if cls is ModulationClass.T1:
            steps = np.floor((m * t - j * big_t) * j * n / big_t)
        else:
            steps = np.floor((m * t - j * big_t) * ((2 * j - m + 1) / big_t) * (n / 2))
        return np.mod(2 * np.pi / n * steps, 2 * np.pi)
    raise DataError(f"{cls.tag} has no code phase")


def instantaneous_phase(
    params: ModulationParams, t_index: np.ndarray | None = None
) -> np.ndarray:
    """Evaluate the instantaneous phase law of ``params`` at sample times.

    Args:
        params: Waveform parameters.
        t_index: Sample indices, defaults to ``0..T-1``.

    Returns:
        Phase in radians, one value per index.
    """
    t = _time_grid(t_index)
    cls = params.cls
    big_t = PULSE_LENGTH
    if cls is ModulationClass.LFM:
        mu = params.delta_f / big_t
        return 2 * np.pi * (params.f0 * t + params.chirp_sign * mu / 2 * t**2)
    if cls is ModulationClass.QFM:
        mu = 8 * params.delta_f / (3 * big_t**2)
        return 2 * np.pi * params.f0 * t + params.chirp_sign * np.pi * mu * (t - big_t / 2) ** 3
    if cls is ModulationClass.BFSK:
        bits = np.asarray(params.theta_code)
        freq = np.where(bits[chip_indices(params, t)] == 0, params.f1, params.f2)
        return 2 * np.pi * freq * t
    return 2 * np.pi * params.f0 * t + code_phase(params, t)


def instantaneous_frequency(
    params: ModulationParams, t_index: np.ndarray | None = None
) -> np.ndarray:
    """Return the carrier frequency track in cycles/sample.

    Code phase steps are ignored; for chirps this is the derivative of the
    continuous phase law.
    """
    t = _time_grid(t_index)
    cls = params.cls
    big_t = PULSE_LENGTH
    if cls is ModulationClass.LFM:
        return params.f0 + params.chirp_sign * params.delta_f / big_t * t
    if cls is ModulationClass.QFM:
        mu = 8 * params.delta_f / (3 * big_t**2)
        return params.f0 + params.chirp_sign * 1.5 * mu * (t - big_t / 2) ** 2
    if cls is ModulationClass.BFSK:
        bits = np.asarray(params.theta_code)
        return np.where(bits[chip_indices(params, t)] == 0, params.f1, params.f2)
    return np.full(t.shape, params.f0)


def synthesize(params: ModulationParams, sample_id: int = 0) -> Waveform:
    """Synthesize the clean real pulse ``cos(phi[k])`` with unit amplitude."""
    samples = np.cos(instantaneous_phase(params))
    return Waveform(samples=samples, cls=params.cls, params=params, sample_id=sample_id)


def add_awgn(w: Waveform, snr_db: float, rng: np.random.Generator) -> Waveform:
    """Return a copy of a clean waveform with zero-mean white Gaussian noise.

    The noise variance is ``P_s / 10**(snr_db / 10)`` with ``P_s`` the mean
    power of the clean samples.

    Raises:
        DegenerateSignalError: If the input has zero power.
    """
    if not w.is_clean:
        raise DataError(f"sample {w.sample_id} is already noisy ({w.snr_db} dB)")
    if not math.isfinite(snr_db):
        raise DataError(f"SNR must be finite, got {snr_db}")
    power = float(np.mean(np.square(w.samples)))
    if power <= 0.0:
        raise DegenerateSignalError("degenerate signal")
    sigma = math.sqrt(power / 10 ** (snr_db / 10))
    noise = rng.normal(0.0, sigma, size=w.samples.shape)
    return dataclasses.replace(w, samples=w.samples + noise, snr_db=float(snr_db))


def measure_snr(clean: np.ndarray, noisy: np.ndarray) -> float:
    """Measure the SNR in dB of ``noisy`` against its clean reference."""
    noise_power = float(np.mean(np.square(noisy - clean)))
    return 10 * math.log10(float(np.mean(np.square(clean))) / noise_power)


@dataclass(frozen=True)
class DatasetConfig:
    """Dataset generation settings."""

    per_class_count: int = DEFAULT_PER_CLASS_COUNT
    snr_grid: tuple[float, ...] = DEFAULT_SNR_GRID
    seed: int = DEFAULT_SEED

    def __post_init__(self) -> None:
        """Validate counts and the SNR grid."""
        if self.per_class_count < 1:
            raise ConfigError("per_class_count must be at least 1")
        if not self.snr_grid:
            raise ConfigError("snr_grid must not be empty")
        for snr in self.snr_grid:
            if not SNR_RANGE[0] <= snr <= SNR_RANGE[1]:
                raise ConfigError(f"SNR {snr} dB outside {SNR_RANGE}")


@dataclass(frozen=True)
class RecordMeta:
    """Manifest entry for one stored pulse."""

    sample_id: int
    cls: ModulationClass
    snr_db: float | None
    params: ModulationParams
    pulse_id: int
    provenance: str = PROVENANCE_ORIGINAL
    parent_id: int | None = None

    def to_dict(self, byte_offset: int) -> dict[str, Any]:
        """Return the manifest form of the record."""
        return {
            "sample_id": self.sample_id,
            "class": self.cls.tag,
            "snr_db": self.snr_db,
            "params": self.params.to_dict(),
            "pulse_id": self.pulse_id,
            "provenance": self.provenance,
            "parent_id": self.parent_id,
            "byte_offset": byte_offset,
        }

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> RecordMeta:
        """Parse a manifest entry."""
        params = ModulationParams.from_dict(data["params"])
        label = ModulationClass.from_tag(data["class"])
        if params.cls is not label:
            raise DataError(f"class {label.tag} disagrees with params {params.cls.tag}")
        snr = data["snr_db"]
        return cls(
            sample_id=int(data["sample_id"]),
            cls=label,
            snr_db=None if snr is None else float(snr),
            params=params,
            pulse_id=int(data["pulse_id"]),
            provenance=data["provenance"],
            parent_id=data.get("parent_id"),
        )


@dataclass
class Dataset:
    """Labeled pulses plus their manifest metadata."""

    samples: np.ndarray
    records: list[RecordMeta]
    seed: int
    snr_grid: tuple[float, ...]
    per_class_count: int
    format_version: int = FORMAT_VERSION
    _hash: str | None = field(default=None, repr=False, compare=False)

    def __len__(self) -> int:
        """Return the record count."""
        return len(self.records)

    @property
    def labels(self) -> np.ndarray:
        """Return integer class labels in record order."""
        return np.array([int(r.cls) for r in self.records], dtype=np.int64)

    @property
    def sample_ids(self) -> np.ndarray:
        """Return sample ids in record order."""
        return np.array([r.sample_id for r in self.records], dtype=np.int64)

    def waveforms(self) -> Iterator[Waveform]:
        """Iterate over records as :class:`Waveform` objects."""
        for row, rec in zip(self.samples, self.records, strict=True):
            yield Waveform(
                samples=row.astype(np.float64),
                cls=rec.cls,
                params=rec.params,
                snr_db=rec.snr_db,
                sample_id=rec.sample_id,
                parent_id=rec.parent_id,
                provenance=rec.provenance,
            )

    def clean_parent(self, index: int) -> Waveform:
        """Re-synthesize the clean pulse behind record ``index``."""
        rec = self.records[index]
        return synthesize(rec.params, sample_id=rec.sample_id)

    def index_of(self, sample_id: int) -> int:
        """Return the record index of a sample id."""
        for idx, rec in enumerate(self.records):
            if rec.sample_id == sample_id:
                return idx
        raise DataError(f"sample {sample_id} not in dataset")

    def subset(self, snr_db: float) -> Dataset:
        """Return the records generated at one SNR level."""
        keep = [
            i
            for i, r in enumerate(self.records)
            if r.snr_db is not None and math.isclose(r.snr_db, snr_db, abs_tol=1e-9)
        ]
        if not keep:
            raise DataError(f"no records at {snr_db} dB")
        return Dataset(
            samples=self.samples[keep],
            records=[self.records[i] for i in keep],
            seed=self.seed,
            snr_grid=(float(snr_db),),
            per_class_count=self.per_class_count,
        )

    def extend(self, waveforms: Sequence[Waveform]) -> Dataset:
        """Return a new dataset with extra (augmented) records appended.

        New records get sample ids after the current maximum, in order.
        """
        next_id = int(self.sample_ids.max()) + 1 if self.records else 0
        records = list(self.records)
        rows = [self.samples]
        for offset, w in enumerate(waveforms):
            parent = self.records[self.index_of(w.parent_id)] if w.parent_id is not None else None
            records.append(
                RecordMeta(
                    sample_id=next_id + offset,
                    cls=w.cls,
                    snr_db=w.snr_db,
                    params=w.params,
                    pulse_id=parent.pulse_id if parent else next_id + offset,
                    provenance=w.provenance,
                    parent_id=w.parent_id,
                )
            )
            rows.append(w.samples.astype(np.float32)[None, :])
        return Dataset(
            samples=np.concatenate(rows, axis=0),
            records=records,
            seed=self.seed,
            snr_grid=self.snr_grid,
            per_class_count=self.per_class_count,
        )

    def class_counts(self, provenance: str = PROVENANCE_ORIGINAL) -> dict[str, int]:
        """Count records per class for one provenance."""
        counts = dict.fromkeys(CLASS_TAGS, 0)
        for r in self.records:
            if r.provenance == provenance:
                counts[r.cls.tag] += 1
        return counts

    def manifest(self) -> dict[str, Any]:
        """Return the JSON manifest describing this dataset."""
        row_bytes = PULSE_LENGTH * F32_LE.itemsize
        return {
            "magic": DATASET_MAGIC,
            "format_version": self.format_version,
            "seed": self.seed,
            "snr_grid": list(self.snr_grid),
            "per_class_count": self.per_class_count,
            "pulse_length": PULSE_LENGTH,
            "dtype": "<f4",
            "record_count": len(self.records),
            "records": [r.to_dict(i * row_bytes) for i, r in enumerate(self.records)],
        }

    def content_hash(self) -> str:
        """Return a hash over manifest and samples (cache key input)."""
        if self._hash is None:
            digest = hashlib.sha256()
            digest.update(repr(self.manifest()).encode())
            digest.update(np.ascontiguousarray(self.samples, dtype=F32_LE).tobytes())
            self._hash = digest.hexdigest()[:16]
        return self._hash


def _snr_key(snr_db: float) -> int:
    return round((snr_db - SNR_RANGE[0]) * 1000)


def generate_dataset(config: DatasetConfig) -> Dataset:
    """Generate a balanced labeled dataset.

    Each class gets ``per_class_count`` parameter draws; every clean pulse
    is noised independently at each SNR of the grid, so the SNR levels
    share clean parents. Random streams are derived hierarchically from
    the seed (class, then sample, then SNR) so the output is a pure
    function of ``config``.
    """
    rows: list[np.ndarray] = []
    records: list[RecordMeta] = []
    sample_id = 0
    for cls in ModulationClass:
        for index in range(config.per_class_count):
            param_rng = np.random.default_rng(
                np.random.SeedSequence(config.seed, spawn_key=(int(cls), index))
            )
            params = sample_params(cls, param_rng)
            pulse_id = int(cls) * 1_000_000 + index
            clean = synthesize(params, sample_id=pulse_id)
            for snr in config.snr_grid:
                noise_rng = np.random.default_rng(
                    np.random.SeedSequence(
                        config.seed, spawn_key=(int(cls), index, _snr_key(snr))
                    )
                )
                noisy = add_awgn(clean, snr, noise_rng)
                rows.append(noisy.samples.astype(np.float32))
                records.append(
                    RecordMeta(
                        sample_id=sample_id,
                        cls=cls,
                        snr_db=float(snr),
                        params=params,
                        pulse_id=pulse_id,
                    )
                )
                sample_id += 1
    _LOGGER.info(
        "Generated %d records (%d per class, %d SNR levels, seed %d)",
        len(records),
        config.per_class_count,
        len(config.snr_grid),
        config.seed,
    )
    return Dataset(
        samples=np.stack(rows),
        records=records,
        seed=config.seed,
        snr_grid=tuple(float(s) for s in config.snr_grid),
        per_class_count=config.per_class_count,
    )


def write_dataset(dataset: Dataset, path: Path) -> None:
    """Write a dataset container (manifest plus float32 samples)."""
    path = Path(path)
    path.mkdir(parents=True, exist_ok=True)
    write_f32(path / SAMPLES_FILE, dataset.samples)
    write_json(path / MANIFEST_FILE, dataset.manifest())
    _LOGGER.info("Wrote %d records to %s", len(dataset), path)


def read_dataset(path: Path) -> Dataset:
    """Read and validate a dataset container.

    Raises:
        ContainerError: On bad magic/version, size mismatch, or a malformed
            or non-finite record (the offending record is named).
    """
    path = Path(path)
    manifest = read_json(path / MANIFEST_FILE)
    check_header(manifest, DATASET_MAGIC, path / MANIFEST_FILE)
    length = manifest.get("pulse_length")
    if length != PULSE_LENGTH:
        raise ContainerError(f"{path}: pulse length {length}, expected {PULSE_LENGTH}")
    entries = manifest.get("records", [])
    if manifest.get("record_count") != len(entries):
        raise ContainerError(f"{path}: record_count disagrees with the record list")
    samples = read_f32(path / SAMPLES_FILE, (len(entries), PULSE_LENGTH))
    records = []
    for index, entry in enumerate(entries):
        try:
            records.append(RecordMeta.from_dict(entry))
        except (KeyError, TypeError, ValueError, DataError) as err:
            raise ContainerError(
                f"{path}: record {index} (sample_id {entry.get('sample_id')}) is malformed: {err}"
            ) from err
    bad = first_bad_row(samples)
    if bad is not None:
        raise ContainerError(
            f"{path}: record {bad} (sample_id {records[bad].sample_id}) has non-finite samples"
        )
    ids = [r.sample_id for r in records]
    if len(set(ids)) != len(ids):
        raise ContainerError(f"{path}: duplicate sample ids")
    return Dataset(
        samples=samples,
        records=records,
        seed=int(manifest["seed"]),
        snr_grid=tuple(float(s) for s in manifest["snr_grid"]),
        per_class_count=int(manifest["per_class_count"]),
        format_version=int(manifest["format_version"]),
    )
