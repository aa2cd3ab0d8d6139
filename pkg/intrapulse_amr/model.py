"""CNN-LSTM classifier, optimizer, training loop and checkpoints.

Two convolution blocks extract spatial features from a spectrogram image;
the pooled feature map is read row by row as a sequence (rows are time
steps, channel-major columns are features) by a single LSTM whose final
hidden state feeds the 11-way dense classifier.
"""

from __future__ import annotations

from collections.abc import Callable, Iterable, Sequence
import csv
import dataclasses
from dataclasses import dataclass, field
import io
import logging
import math
from pathlib import Path
import time
from typing import Any

import numpy as np
from sklearn.model_selection import train_test_split
from threadpoolctl import threadpool_limits

from .const import (
    ADAM_BETA1,
    ADAM_BETA2,
    ADAM_EPSILON,
    ARCH_FILE,
    CHECKPOINT_MAGIC,
    DEFAULT_BATCH_SIZE,
    DEFAULT_EPOCHS,
    DEFAULT_IMAGE_SIZE,
    DEFAULT_LEARNING_RATE,
    DEFAULT_SEED,
    DEFAULT_SPLIT,
    FORMAT_VERSION,
    HEAD_DENSE,
    HEAD_LSTM,
    HISTORY_FILE,
    LOGGER_NAME,
    NUM_CLASSES,
    PARAMETER_BUDGET,
    WEIGHTS_FILE,
)
from .exceptions import (
    ArchitectureMismatchError,
    ConfigError,
    ContainerError,
    CorruptCheckpointError,
    DataError,
    ParameterBudgetError,
    ShapeMismatchError,
    StratificationError,
    TrainingDivergedError,
)
from .layers import (
    LSTM,
    AvgPool2D,
    BatchNorm2D,
    Conv2D,
    Dense,
    Layer,
    MaxPool2D,
    ReLU,
    softmax,
    softmax_cross_entropy,
)
from .storage import F32_LE, check_header, read_f32, read_json, write_f32, write_json

_LOGGER = logging.getLogger(LOGGER_NAME)

HEADS = (HEAD_LSTM, HEAD_DENSE)
HISTORY_COLUMNS = ("epoch", "train_loss", "train_acc", "val_loss", "val_acc")


@dataclass(frozen=True)
class ConvBlockSpec:
    """One conv -> batch norm -> ReLU -> max pool block."""

    in_channels: int
    out_channels: int
    kernel_size: int = 3
    pool: int = 2


@dataclass(frozen=True)
class ArchitectureSpec:
    """Layer-by-layer description of the classifier."""

    input_shape: tuple[int, int] = DEFAULT_IMAGE_SIZE
    conv_blocks: tuple[ConvBlockSpec, ...] = (ConvBlockSpec(1, 8), ConvBlockSpec(8, 16))
    head: str = HEAD_LSTM
    lstm_hidden: int = 10
    dense_hidden: int = 10
    head_pool: int = 2
    num_classes: int = NUM_CLASSES
    batch_norm: bool = True
    budget: tuple[int, int] | None = PARAMETER_BUDGET

    def __post_init__(self) -> None:
        """Validate head choice and block chaining."""
        if self.head not in HEADS:
            raise ConfigError(f"unknown head {self.head!r}, expected one of {HEADS}")
        if self.num_classes != NUM_CLASSES:
            raise ConfigError(f"the classifier has {NUM_CLASSES} outputs, got {self.num_classes}")
        channels = 1
        for block in self.conv_blocks:
            if block.in_channels != channels:
                raise ConfigError(f"conv block expects {block.in_channels} channels, has {channels}")
            channels = block.out_channels
        self.feature_shape()

    def feature_shape(self) -> tuple[int, int, int]:
        """Return ``(channels, rows, cols)`` after the conv blocks."""
        height, width = self.input_shape
        for block in self.conv_blocks:
            if height % block.pool or width % block.pool:
                raise ConfigError(f"pool {block.pool} does not divide {height}x{width}")
            height, width = height // block.pool, width // block.pool
        return self.conv_blocks[-1].out_channels, height, width

    def to_dict(self) -> dict[str, Any]:
        """Return a JSON-ready dict."""
        data = dataclasses.asdict(self)
        data["input_shape"] = list(self.input_shape)
        data["budget"] = list(self.budget) if self.budget else None
        return data

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> ArchitectureSpec:
        """Rebuild a spec from :meth:`to_dict` output."""
        try:
            values = dict(data)
            values["input_shape"] = tuple(values["input_shape"])
            values["conv_blocks"] = tuple(ConvBlockSpec(**b) for b in values["conv_blocks"])
            values["budget"] = tuple(values["budget"]) if values.get("budget") else None
            return cls(**values)
        except (KeyError, TypeError) as err:
            raise ArchitectureMismatchError(f"malformed architecture descriptor: {err}") from err

    @classmethod
    def reference(cls) -> ArchitectureSpec:
        """Return the CNN-LSTM reference configuration (12_097 parameters)."""
        return cls()

    @classmethod
    def cnn_only(cls) -> ArchitectureSpec:
        """Return the CNN ablation variant with a dense head (11_667 parameters)."""
        return cls(head=HEAD_DENSE)

    @classmethod
    def tiny(cls) -> ArchitectureSpec:
        """Return a small double-precision friendly instance for gradient checks."""
        return cls(
            input_shape=(8, 8),
            conv_blocks=(ConvBlockSpec(1, 2, 3, 2), ConvBlockSpec(2, 3, 3, 1)),
            lstm_hidden=3,
            budget=None,
        )


class Model:
    """The classifier: an ordered stack of layers plus a mode flag."""

    def __init__(
        self,
        spec: ArchitectureSpec,
        rng: np.random.Generator | None = None,
        dtype: Any = np.float32,
    ) -> None:
        """Build and initialize every layer."""
        rng = rng if rng is not None else np.random.default_rng(DEFAULT_SEED)
        self.spec = spec
        self.dtype = np.dtype(dtype)
        self.training = True
        self.features: list[Layer] = []
        for index, block in enumerate(spec.conv_blocks, start=1):
            self.features.append(
                Conv2D(
                    f"conv{index}", block.in_channels, block.out_channels, block.kernel_size, rng, dtype
                )
            )
            if spec.batch_norm:
                self.features.append(BatchNorm2D(f"bn{index}", block.out_channels, dtype=dtype))
            self.features.append(ReLU(f"relu{index}"))
            if block.pool > 1:
                self.features.append(MaxPool2D(f"pool{index}", block.pool))
        chans, rows, cols = spec.feature_shape()
        self.head: list[Layer]
        if spec.head == HEAD_LSTM:
            self.head = [
                LSTM("lstm", chans * cols, spec.lstm_hidden, rng, dtype),
                Dense("dense", spec.lstm_hidden, spec.num_classes, rng, dtype),
            ]
        else:
            pooled = chans * (rows // spec.head_pool) * (cols // spec.head_pool)
            self.head = [
                AvgPool2D("avgpool", spec.head_pool),
                Dense("dense1", pooled, spec.dense_hidden, rng, dtype),
                ReLU("relu_head"),
                Dense("dense2", spec.dense_hidden, spec.num_classes, rng, dtype),
            ]
        self._pre_head_shape: tuple[int, ...] | None = None

    @property
    def layers(self) -> list[Layer]:
        """Return all layers in forward order."""
        return self.features + self.head

    def train(self) -> Model:
        """Switch to training mode (batch statistics, cached activations)."""
        self.training = True
        return self

    def eval(self) -> Model:
        """Switch to evaluation mode (running statistics)."""
        self.training = False
        return self

    def forward(self, images: np.ndarray) -> np.ndarray:
        """Return logits ``[B, 11]`` for images ``[B, H, W]``."""
        images = np.asarray(images)
        if images.ndim != 3 or images.shape[1:] != tuple(self.spec.input_shape):
            raise ShapeMismatchError(
                f"expected images [B, {self.spec.input_shape[0]}, {self.spec.input_shape[1]}],"
                f" got {images.shape}"
            )
        x = images[:, None].astype(self.dtype, copy=False)
        for layer in self.features:
            x = layer.forward(x, self.training)
        if self.spec.head == HEAD_LSTM:
            self._pre_head_shape = x.shape
            batch, chans, rows, cols = x.shape
            x = x.transpose(0, 2, 1, 3).reshape(batch, rows, chans * cols)
            x = self.head[0].forward(x, self.training)
            return self.head[1].forward(x, self.training)
        x = self.head[0].forward(x, self.training)
        self._pre_head_shape = x.shape
        x = x.reshape(x.shape[0], -1)
        for layer in self.head[1:]:
            x = layer.forward(x, self.training)
        return x

    def backward(self, dlogits: np.ndarray) -> dict[str, np.ndarray]:
        """Backpropagate ``dloss/dlogits`` and return every parameter gradient."""
        if not self.training or self._pre_head_shape is None:
            raise RuntimeError("backward needs a forward pass in training mode")
        dx = dlogits
        if self.spec.head == HEAD_LSTM:
            dx = self.head[1].backward(dx)
            dx = self.head[0].backward(dx)
            batch, chans, rows, cols = self._pre_head_shape
            dx = dx.reshape(batch, rows, chans, cols).transpose(0, 2, 1, 3)
        else:
            for layer in reversed(self.head[1:]):
                dx = layer.backward(dx)
            dx = self.head[0].backward(dx.reshape(self._pre_head_shape))
        for layer in reversed(self.features):
            dx = layer.backward(dx)
        return {
            f"{layer.name}.{key}": grad for layer in self.layers for key, grad in layer.grads.items()
        }

    def loss_and_gradients(
        self, images: np.ndarray, labels: np.ndarray
    ) -> tuple[float, dict[str, np.ndarray], np.ndarray]:
        """Run a training forward/backward pass on one batch."""
        self.train()
        logits = self.forward(images)
        loss, dlogits = softmax_cross_entropy(logits, np.asarray(labels))
        return loss, self.backward(dlogits.astype(self.dtype, copy=False)), logits

    def parameters(self) -> dict[str, np.ndarray]:
        """Return live references to the trainable tensors."""
        return {f"{layer.name}.{key}": p for layer in self.layers for key, p in layer.params.items()}

    def state_tensors(self) -> list[tuple[str, np.ndarray]]:
        """Return trainable tensors and buffers in checkpoint order."""
        out = []
        for layer in self.layers:
            out.extend((f"{layer.name}.{key}", p) for key, p in layer.params.items())
            out.extend((f"{layer.name}.{key}", b) for key, b in layer.buffers.items())
        return out

    def load_state(self, tensors: dict[str, np.ndarray]) -> None:
        """Copy tensors (by name) into the model."""
        for layer in self.layers:
            for store in (layer.params, layer.buffers):
                for key in store:
                    name = f"{layer.name}.{key}"
                    if name not in tensors or tensors[name].shape != store[key].shape:
                        raise ArchitectureMismatchError(f"tensor {name} missing or misshaped")
                    store[key][...] = tensors[name]

    def parameter_table(self) -> list[tuple[str, int]]:
        """Return per-layer trainable parameter counts."""
        return [(layer.name, layer.parameter_count()) for layer in self.layers if layer.params]

    def parameter_count(self) -> int:
        """Return the total trainable parameter count."""
        return sum(count for _, count in self.parameter_table())

    def size_bytes(self) -> int:
        """Return the float32 storage size of the trainable parameters."""
        return self.parameter_count() * F32_LE.itemsize


def build_model(
    spec: ArchitectureSpec, rng: np.random.Generator, dtype: Any = np.float32
) -> Model:
    """Build a model and enforce its declared parameter budget.

    Raises:
        ParameterBudgetError: With the per-layer counts when the total falls
            outside ``spec.budget``.
    """
    model = Model(spec, rng, dtype)
    count = model.parameter_count()
    if spec.budget is not None and not spec.budget[0] <= count <= spec.budget[1]:
        table = ", ".join(f"{name}={n}" for name, n in model.parameter_table())
        _LOGGER.error("Parameter count %d outside %s", count, spec.budget)
        raise ParameterBudgetError(f"{count} parameters outside budget {spec.budget}: {table}")
    _LOGGER.debug("Built %s model with %d parameters", spec.head, count)
    return model


class Adam:
    """Bias-corrected Adam updating parameter arrays in place."""

    def __init__(
        self,
        params: dict[str, np.ndarray],
        learning_rate: float = DEFAULT_LEARNING_RATE,
        beta1: float = ADAM_BETA1,
        beta2: float = ADAM_BETA2,
        epsilon: float = ADAM_EPSILON,
    ) -> None:
        """Initialize zero moment estimates."""
        self.params = params
        self.learning_rate = learning_rate
        self.beta1, self.beta2, self.epsilon = beta1, beta2, epsilon
        self.m = {k: np.zeros_like(p, dtype=np.float64) for k, p in params.items()}
        self.v = {k: np.zeros_like(p, dtype=np.float64) for k, p in params.items()}
        self.t = 0

    def step(self, grads: dict[str, np.ndarray], learning_rate: float | None = None) -> None:
        """Apply one update."""
        lr = self.learning_rate if learning_rate is None else learning_rate
        self.t += 1
        correction1 = 1 - self.beta1**self.t
        correction2 = 1 - self.beta2**self.t
        for name, param in self.params.items():
            grad = grads[name]
            self.m[name] = self.beta1 * self.m[name] + (1 - self.beta1) * grad
            self.v[name] = self.beta2 * self.v[name] + (1 - self.beta2) * grad**2
            update = lr * (self.m[name] / correction1) / (
                np.sqrt(self.v[name] / correction2) + self.epsilon
            )
            param -= update.astype(param.dtype)


def _divergence_report(model: Model, loss: float) -> str:
    norms = ", ".join(
        f"{name}={float(np.linalg.norm(p)):.3g}" for name, p in model.parameters().items()
    )
    return f"loss={loss}; parameter norms: {norms}"


def _train_batch(
    model: Model,
    images: np.ndarray,
    labels: np.ndarray,
    optimizer: Adam,
    learning_rate: float | None = None,
) -> tuple[float, np.ndarray]:
    loss, grads, logits = model.loss_and_gradients(images, labels)
    if not math.isfinite(loss):
        _LOGGER.error("Non-finite loss at step %d", optimizer.t + 1)
        raise TrainingDivergedError(
            f"diverged at step {optimizer.t + 1}: {_divergence_report(model, loss)}"
        )
    optimizer.step(grads, learning_rate)
    for name, param in model.parameters().items():
        if not np.isfinite(param).all():
            raise TrainingDivergedError(
                f"diverged at step {optimizer.t}: {name} became non-finite;"
                f" {_divergence_report(model, loss)}"
            )
    return loss, logits


def train_step(
    model: Model,
    images: np.ndarray,
    labels: np.ndarray,
    optimizer: Adam,
    learning_rate: float | None = None,
) -> float:
    """Run one Adam step on a batch and return the batch loss.

    Raises:
        TrainingDivergedError: On a non-finite loss or parameter.
    """
    loss, _ = _train_batch(model, images, labels, optimizer, learning_rate)
    return loss


@dataclass(frozen=True)
class TrainConfig:
    """Training hyperparameters."""

    learning_rate: float = DEFAULT_LEARNING_RATE
    epochs: int = DEFAULT_EPOCHS
    batch_size: int = DEFAULT_BATCH_SIZE
    split: tuple[float, float, float] = DEFAULT_SPLIT
    seed: int = DEFAULT_SEED
    save_best: bool = True
    batch_norm: bool = True
    architecture: ArchitectureSpec = field(default_factory=ArchitectureSpec)
    dtype: str = "float32"

    def __post_init__(self) -> None:
        """Validate the hyperparameters."""
        if len(self.split) != 3 or min(self.split) <= 0 or not math.isclose(sum(self.split), 1.0):
            raise ConfigError(f"split fractions must be positive and sum to 1, got {self.split}")
        if self.epochs < 1 or self.batch_size < 1:
            raise ConfigError("epochs and batch_size must be at least 1")
        if self.learning_rate < 0:
            raise ConfigError("learning_rate must not be negative")

    def effective_architecture(self) -> ArchitectureSpec:
        """Return the architecture with this config's batch-norm flag applied."""
        return dataclasses.replace(self.architecture, batch_norm=self.batch_norm)

    def replace(self, **changes: Any) -> TrainConfig:
        """Return a copy with some fields changed."""
        return dataclasses.replace(self, **changes)

    def to_dict(self) -> dict[str, Any]:
        """Return a JSON-ready dict."""
        return {
            "learning_rate": self.learning_rate,
            "epochs": self.epochs,
            "batch_size": self.batch_size,
            "split": list(self.split),
            "seed": self.seed,
            "save_best": self.save_best,
            "batch_norm": self.batch_norm,
            "architecture": self.architecture.to_dict(),
            "dtype": self.dtype,
        }


@dataclass(frozen=True)
class SplitIndices:
    """Row indices of the three stratified partitions."""

    train: np.ndarray
    val: np.ndarray
    test: np.ndarray


def stratified_split(
    labels: np.ndarray, fractions: Sequence[float], seed: int
) -> SplitIndices:
    """Split row indices three ways, stratified by class.

    Every present class needs at least three samples; each partition gets at
    least one sample of every class.
    """
    labels = np.asarray(labels)
    counts = np.bincount(labels, minlength=NUM_CLASSES)
    present = counts[counts > 0]
    if present.size == 0 or present.min() < 3:
        raise StratificationError(
            f"every class needs at least 3 samples for a three-way split, got {counts.tolist()}"
        )
    total, n_classes = labels.size, present.size
    n_test = max(round(fractions[2] * total), n_classes)
    n_val = max(round(fractions[1] * total), n_classes)
    if total - n_test - n_val < n_classes:
        raise StratificationError(f"{total} samples cannot fill three stratified partitions")
    index = np.arange(total)
    rest, test = train_test_split(index, test_size=n_test, stratify=labels, random_state=seed)
    train, val = train_test_split(
        rest, test_size=n_val, stratify=labels[rest], random_state=seed
    )
    return SplitIndices(train=np.sort(train), val=np.sort(val), test=np.sort(test))


@dataclass(frozen=True)
class EpochRecord:
    """Per-epoch training history row."""

    epoch: int
    train_loss: float
    train_acc: float
    val_loss: float
    val_acc: float


@dataclass
class Checkpoint:
    """Architecture, ordered tensors and training history."""

    architecture: ArchitectureSpec
    tensors: dict[str, np.ndarray]
    history: list[EpochRecord] = field(default_factory=list)
    selection_epoch: int | None = None

    @classmethod
    def from_model(
        cls, model: Model, history: Sequence[EpochRecord] = (), selection_epoch: int | None = None
    ) -> Checkpoint:
        """Snapshot a model's tensors."""
        return cls(
            architecture=model.spec,
            tensors={name: t.astype(np.float32) for name, t in model.state_tensors()},
            history=list(history),
            selection_epoch=selection_epoch,
        )

    def to_model(self) -> Model:
        """Rebuild an eval-mode model from the stored tensors."""
        model = Model(self.architecture, dtype=np.float32)
        model.load_state(self.tensors)
        return model.eval()

    @property
    def selected(self) -> EpochRecord | None:
        """Return the history row of the selected epoch."""
        for row in self.history:
            if row.epoch == self.selection_epoch:
                return row
        return None


@dataclass
class AugmentPool:
    """Images of augmented variants keyed by their parent sample id."""

    images: np.ndarray
    labels: np.ndarray
    parent_ids: np.ndarray

    def __len__(self) -> int:
        """Return the variant count."""
        return int(self.labels.size)

    def for_parents(self, parent_ids: Iterable[int]) -> tuple[np.ndarray, np.ndarray]:
        """Return the variants whose parent is among ``parent_ids``."""
        mask = np.isin(self.parent_ids, np.fromiter(parent_ids, dtype=np.int64))
        return self.images[mask], self.labels[mask]


@dataclass
class EvalResult:
    """Loss, accuracy and predictions on a labeled set."""

    loss: float
    accuracy: float
    predictions: np.ndarray
    probabilities: np.ndarray


@dataclass
class FitResult:
    """Everything a training run produces."""

    checkpoint: Checkpoint
    history: list[EpochRecord]
    split: SplitIndices
    model: Model
    seconds_per_epoch: float
    train_size: int


def predict(model: Model, images: np.ndarray, batch_size: int = 256) -> np.ndarray:
    """Return class probabilities ``[B, 11]`` in evaluation mode."""
    model.eval()
    chunks = [
        softmax(model.forward(images[start : start + batch_size]).astype(np.float64))
        for start in range(0, len(images), batch_size)
    ]
    if not chunks:
        return np.zeros((0, model.spec.num_classes))
    return np.concatenate(chunks)


def evaluate(
    model: Model, images: np.ndarray, labels: np.ndarray, batch_size: int = 256
) -> EvalResult:
    """Evaluate mean cross-entropy and accuracy."""
    labels = np.asarray(labels)
    if len(images) != len(labels):
        raise ShapeMismatchError(f"{len(images)} images for {len(labels)} labels")
    probs = predict(model, images, batch_size)
    predictions = probs.argmax(axis=1)
    picked = np.clip(probs[np.arange(len(labels)), labels], np.finfo(np.float64).tiny, None)
    return EvalResult(
        loss=float(-np.log(picked).mean()) if len(labels) else float("nan"),
        accuracy=float((predictions == labels).mean()) if len(labels) else float("nan"),
        predictions=predictions,
        probabilities=probs,
    )


def _selection_key(record: EpochRecord) -> tuple[float, float, int]:
    return (record.val_acc, -record.val_loss, -record.epoch)


def fit(
    images: np.ndarray,
    labels: np.ndarray,
    config: TrainConfig,
    sample_ids: np.ndarray | None = None,
    augment_pool: AugmentPool | None = None,
    exclude_ids: Iterable[int] = (),
    progress: Callable[[EpochRecord], None] | None = None,
) -> FitResult:
    """Train a fresh model with a stratified split and best-epoch selection.

    Augmented variants join training only when their parent landed in the
    training partition; ``exclude_ids`` are dropped from training only. The
    test partition is never touched.
    """
    images = np.asarray(images, dtype=np.float32)
    labels = np.asarray(labels, dtype=np.int64)
    if len(images) != len(labels):
        raise ShapeMismatchError(f"{len(images)} images for {len(labels)} labels")
    ids = np.arange(len(labels)) if sample_ids is None else np.asarray(sample_ids)
    split = stratified_split(labels, config.split, config.seed)

    excluded = set(int(i) for i in exclude_ids)
    train_rows = np.array([r for r in split.train if int(ids[r]) not in excluded], dtype=np.int64)
    x_train, y_train = images[train_rows], labels[train_rows]
    if augment_pool is not None and len(augment_pool):
        extra_x, extra_y = augment_pool.for_parents(int(i) for i in ids[train_rows])
        x_train = np.concatenate([x_train, extra_x.astype(np.float32)])
        y_train = np.concatenate([y_train, extra_y.astype(np.int64)])
    if len(y_train) == 0:
        raise DataError("training partition is empty after exclusions")
    x_val, y_val = images[split.val], labels[split.val]

    init_rng = np.random.default_rng(np.random.SeedSequence(config.seed, spawn_key=(1,)))
    shuffle_rng = np.random.default_rng(np.random.SeedSequence(config.seed, spawn_key=(2,)))
    history: list[EpochRecord] = []
    best: tuple[EpochRecord, list[tuple[str, np.ndarray]]] | None = None

    with threadpool_limits(limits=1):
        model = build_model(config.effective_architecture(), init_rng, np.dtype(config.dtype))
        optimizer = Adam(model.parameters(), config.learning_rate)
        started = time.perf_counter()
        for epoch in range(1, config.epochs + 1):
            order = shuffle_rng.permutation(len(y_train))
            loss_sum, correct = 0.0, 0
            for start in range(0, len(order), config.batch_size):
                rows = order[start : start + config.batch_size]
                loss, logits = _train_batch(model, x_train[rows], y_train[rows], optimizer)
                loss_sum += loss * len(rows)
                correct += int((logits.argmax(axis=1) == y_train[rows]).sum())
            val = evaluate(model, x_val, y_val)
            record = EpochRecord(
                epoch=epoch,
                train_loss=loss_sum / len(y_train),
                train_acc=correct / len(y_train),
                val_loss=val.loss,
                val_acc=val.accuracy,
            )
            history.append(record)
            _LOGGER.debug(
                "Epoch %d: train loss %.4f acc %.3f, val loss %.4f acc %.3f",
                epoch,
                record.train_loss,
                record.train_acc,
                record.val_loss,
                record.val_acc,
            )
            if progress is not None:
                progress(record)
            if best is None or _selection_key(record) > _selection_key(best[0]):
                best = (record, [(n, t.copy()) for n, t in model.state_tensors()])
        elapsed = time.perf_counter() - started

    if config.save_best and best is not None:
        model.load_state(dict(best[1]))
        selection = best[0].epoch
    else:
        selection = history[-1].epoch
    model.eval()
    _LOGGER.info(
        "Trained %d epochs on %d samples, selected epoch %d (val acc %.3f)",
        config.epochs,
        len(y_train),
        selection,
        history[selection - 1].val_acc,
    )
    return FitResult(
        checkpoint=Checkpoint.from_model(model, history, selection),
        history=history,
        split=split,
        model=model,
        seconds_per_epoch=elapsed / config.epochs,
        train_size=len(y_train),
    )


def gradient_check(
    model: Model, images: np.ndarray, labels: np.ndarray, step: float = 1e-4
) -> dict[str, float]:
    """Compare backprop gradients against central finite differences.

    Returns the per-tensor relative error ``|a - n| / max(|a|, |n|)``, or the
    absolute error when both norms are below 1e-7.
    """
    _, analytic, _ = model.loss_and_gradients(images, labels)
    errors = {}
    for name, param in model.parameters().items():
        numeric = np.zeros_like(param, dtype=np.float64)
        for idx in np.ndindex(param.shape):
            original = param[idx]
            param[idx] = original + step
            plus, _, _ = model.loss_and_gradients(images, labels)
            param[idx] = original - step
            minus, _, _ = model.loss_and_gradients(images, labels)
            param[idx] = original
            numeric[idx] = (plus - minus) / (2 * step)
        diff = float(np.linalg.norm(analytic[name] - numeric))
        scale = max(float(np.linalg.norm(analytic[name])), float(np.linalg.norm(numeric)))
        errors[name] = diff if scale < 1e-7 else diff / scale
    return errors


def history_to_csv(history: Sequence[EpochRecord]) -> str:
    """Render a training history as CSV text."""
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(HISTORY_COLUMNS)
    for row in history:
        writer.writerow([row.epoch, row.train_loss, row.train_acc, row.val_loss, row.val_acc])
    return buffer.getvalue()


def read_history(path: Path) -> list[EpochRecord]:
    """Read a history CSV written by :func:`history_to_csv`."""
    try:
        with Path(path).open(newline="", encoding="utf-8") as handle:
            return [
                EpochRecord(
                    epoch=int(row["epoch"]),
                    train_loss=float(row["train_loss"]),
                    train_acc=float(row["train_acc"]),
                    val_loss=float(row["val_loss"]),
                    val_acc=float(row["val_acc"]),
                )
                for row in csv.DictReader(handle)
            ]
    except (OSError, KeyError, ValueError) as err:
        raise CorruptCheckpointError(f"corrupt checkpoint history {path}: {err}") from err


def save_checkpoint(checkpoint: Checkpoint, path: Path) -> None:
    """Write ``arch.json``, ``weights.bin`` and ``history.csv`` into ``path``."""
    path = Path(path)
    path.mkdir(parents=True, exist_ok=True)
    ordered = list(checkpoint.tensors.items())
    blob = np.concatenate([t.astype(F32_LE).ravel() for _, t in ordered])
    write_f32(path / WEIGHTS_FILE, blob)
    trainable = Model(checkpoint.architecture).parameter_count()
    write_json(
        path / ARCH_FILE,
        {
            "magic": CHECKPOINT_MAGIC,
            "format_version": FORMAT_VERSION,
            "architecture": checkpoint.architecture.to_dict(),
            "tensors": [{"name": n, "shape": list(t.shape)} for n, t in ordered],
            "selection_epoch": checkpoint.selection_epoch,
            "parameter_count": trainable,
            "dtype": "<f4",
        },
    )
    (path / HISTORY_FILE).write_text(history_to_csv(checkpoint.history), encoding="utf-8")
    _LOGGER.info("Saved checkpoint to %s (%d bytes of weights)", path, blob.nbytes)


def load_checkpoint(path: Path) -> Checkpoint:
    """Load a checkpoint directory.

    Raises:
        CorruptCheckpointError: If a file is missing or truncated.
        ArchitectureMismatchError: If the tensors disagree with the declared
            architecture.
    """
    path = Path(path)
    try:
        manifest = read_json(path / ARCH_FILE)
        check_header(manifest, CHECKPOINT_MAGIC, path / ARCH_FILE)
    except ContainerError as err:
        raise CorruptCheckpointError(f"corrupt checkpoint: {err}") from err
    spec = ArchitectureSpec.from_dict(manifest["architecture"])
    expected = [(n, list(t.shape)) for n, t in Model(spec).state_tensors()]
    recorded = [(t["name"], list(t["shape"])) for t in manifest["tensors"]]
    if recorded != expected:
        raise ArchitectureMismatchError(
            f"{path}: tensors {recorded} do not match architecture layout {expected}"
        )
    total = sum(int(np.prod(shape)) for _, shape in expected)
    try:
        blob = read_f32(path / WEIGHTS_FILE, (total,))
    except ContainerError as err:
        raise CorruptCheckpointError(f"corrupt checkpoint: {err}") from err
    tensors, offset = {}, 0
    for name, shape in expected:
        size = int(np.prod(shape))
        tensors[name] = blob[offset : offset + size].reshape(shape).copy()
        offset += size
    if not np.isfinite(blob).all():
        raise CorruptCheckpointError(f"corrupt checkpoint: {path} holds non-finite weights")
    history = read_history(path / HISTORY_FILE) if (path / HISTORY_FILE).exists() else []
    return Checkpoint(
        architecture=spec,
        tensors=tensors,
        history=history,
        selection_epoch=manifest.get("selection_epoch"),
    )
