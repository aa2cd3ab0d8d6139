"""Constants for the intrapulse modulation recognition pipeline."""

from __future__ import annotations

from typing import Final

LOGGER_NAME: Final = "intrapulse_amr"
VERSION: Final = "1.0.0"

ENV_OUTPUT_ROOT: Final = "INTRAPULSE_AMR_OUTPUT"
DEFAULT_OUTPUT_ROOT: Final = "artifacts"

# Signal model
PULSE_LENGTH: Final = 2048  # Samples per pulse, also the pulse duration T
NYQUIST: Final = 0.5  # Normalized frequency limit (cycles/sample)

# Parameter ranges (normalized frequency, cycles/sample)
LFM_F0_RANGE: Final = (0.01, 0.45)
LFM_DELTA_F_RANGE: Final = (0.05, 0.4)
QFM_F0_RANGE: Final = (0.01, 0.4)
QFM_DELTA_F_RANGE: Final = (0.05, 0.3)
CARRIER_F0_RANGE: Final = (0.05, 0.45)  # BPSK, T1, T2
BFSK_F_RANGE: Final = (0.05, 0.45)
POLYTIME_DELTA_F_RANGE: Final = (0.05, 0.4)
POLYPHASE_F0_RANGE: Final = (0.1, 0.4)  # Frank, P1, P2, P3, P4
BARKER_LENGTHS: Final = (5, 7, 11, 13)
POLYPHASE_ORDERS: Final = (6, 7, 8)
BFSK_MIN_SEPARATION: Final = 0.02  # Keep the two tones resolvable
POLYTIME_PHASE_STATES: Final = 2  # n
POLYTIME_SEGMENTS: Final = 4  # m
MAX_REJECTIONS: Final = 10_000  # Rejection sampling guard

# Dataset defaults
DEFAULT_PER_CLASS_COUNT: Final = 100
DEFAULT_SNR_GRID: Final = (-20.0, -15.0, -10.0, -5.0, 0.0, 5.0, 10.0, 15.0, 20.0)
DEFAULT_SEED: Final = 20250101
SNR_RANGE: Final = (-40.0, 60.0)

# Container formats
DATASET_MAGIC: Final = "intrapulse-amr/dataset"
IMAGES_MAGIC: Final = "intrapulse-amr/images"
CHECKPOINT_MAGIC: Final = "intrapulse-amr/checkpoint"
REPORT_MAGIC: Final = "intrapulse-amr/report"
FORMAT_VERSION: Final = 1
MANIFEST_FILE: Final = "manifest.json"
SAMPLES_FILE: Final = "samples.bin"
TFR_MANIFEST_FILE: Final = "tfr_manifest.json"
IMAGES_FILE: Final = "images.bin"
ARCH_FILE: Final = "arch.json"
WEIGHTS_FILE: Final = "weights.bin"
HISTORY_FILE: Final = "history.csv"
RUN_MANIFEST_FILE: Final = "run_manifest.json"
EFFECTIVE_CONFIG_FILE: Final = "effective_config.yaml"

# Time-frequency defaults
KERNEL_WVD: Final = "wvd"
KERNEL_CWD: Final = "cwd"
KERNEL_SPWVD: Final = "spwvd"  # Reserved, not implemented
KERNELS: Final = (KERNEL_WVD, KERNEL_CWD, KERNEL_SPWVD)
DEFAULT_KERNEL: Final = KERNEL_CWD
DEFAULT_ALPHA: Final = 1.0
DEFAULT_LAG_WINDOW: Final = 63  # L, gives 2L + 2 = 128 frequency bins
DEFAULT_TIME_STEP: Final = 16  # 2048 / 16 = 128 time bins
DEFAULT_IMAGE_SIZE: Final = (64, 64)
REFERENCE_MAX_LENGTH: Final = 512
GAUSSIAN_TRUNCATE: Final = 4.0  # Smoothing window half-width in standard deviations
BOUNDARY_ZERO: Final = "zero"
BOUNDARY_CIRCULAR: Final = "circular"

# Model / training
NUM_CLASSES: Final = 11
DEFAULT_LEARNING_RATE: Final = 0.003
DEFAULT_EPOCHS: Final = 100
DEFAULT_BATCH_SIZE: Final = 32
DEFAULT_SPLIT: Final = (0.6, 0.2, 0.2)
PARAMETER_BUDGET: Final = (10_000, 15_000)
ADAM_BETA1: Final = 0.9
ADAM_BETA2: Final = 0.999
ADAM_EPSILON: Final = 1e-8
BN_MOMENTUM: Final = 0.9
BN_EPSILON: Final = 1e-5
HEAD_LSTM: Final = "lstm"
HEAD_DENSE: Final = "dense"

# Curation
DEFAULT_AUGMENT_THRESHOLD: Final = 0.5
DEFAULT_EXCLUDE_THRESHOLD: Final = 0.9
DEFAULT_VARIANTS_PER_SAMPLE: Final = 4
DEFAULT_ERROR_RATE_RUNS: Final = 10
DEFAULT_MAX_CLASS_IMBALANCE: Final = 0.1
DEFAULT_MAX_GROWTH: Final = 1.0
SHIFT_FRACTION: Final = 1 / 8  # Circular shift bound, fraction of T
CARRIER_JITTER: Final = 0.01  # Normalized carrier offset bound
JITTER_MAX_REJECTIONS: Final = 100
PROVENANCE_ORIGINAL: Final = "original"
PROVENANCE_AUGMENTED: Final = "augmented"

# Evaluation
DEFAULT_VARIANCE_RUNS: Final = 50
DEFAULT_ABLATION_SEEDS: Final = 10
HISTOGRAM_BIN_WIDTH: Final = 0.005  # 0.5 accuracy points
DEFAULT_BENCH_BATCHES: Final = (1, 2, 4, 8, 16, 32, 64)
DEFAULT_BENCH_REPETITIONS: Final = 100
BENCH_WARMUP: Final = 10
BENCH_THREADS: Final = 1
PLATEAU_TOLERANCE: Final = 0.15

# Reported, not reproduced
LITERATURE_BASELINES: Final = (
    {"model": "LSTM", "accuracy": 0.63, "params": 203_000, "train_s_per_epoch": 497.0},
    {"model": "SSLWCNN", "accuracy": 0.93, "params": 1_280_000, "train_s_per_epoch": 256.0},
    {"model": "XLW-CNN-LSTM", "accuracy": 0.96, "params": 12_059, "train_s_per_epoch": 3.0},
)
REPORTED_MEAN_ACCURACY: Final = 0.963
REPORTED_MIN_ACCURACY: Final = 0.938
REPORTED_AUGMENT_FACTOR: Final = 2.43
REPORTED_LSTM_FACTOR: Final = 1.26

# CLI exit codes
EXIT_OK: Final = 0
EXIT_CONFIG: Final = 1
EXIT_DATA: Final = 2
EXIT_DIVERGED: Final = 3

# Configuration sections
CONF_OUTPUT: Final = "output"
CONF_JOBS: Final = "jobs"
CONF_DATASET: Final = "dataset"
CONF_TFR: Final = "tfr"
CONF_MODEL: Final = "model"
CONF_CURATION: Final = "curation"
CONF_EVAL: Final = "eval"
MAX_JOBS: Final = 256
