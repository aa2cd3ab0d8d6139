"""Neural network layers with explicit forward and backward passes.

Every layer keeps its trainable tensors in ``params``, the matching
gradients in ``grads`` after :meth:`Layer.backward`, and non-trainable state
(batch-norm running statistics) in ``buffers``. Image tensors are laid out
``[batch, channels, height, width]``.
"""

from __future__ import annotations

import logging

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .const import BN_EPSILON, BN_MOMENTUM, LOGGER_NAME
from .exceptions import ShapeMismatchError

_LOGGER = logging.getLogger(LOGGER_NAME)


class Layer:
    """Base class: named tensors plus a cached forward pass."""

    def __init__(self, name: str) -> None:
        """Initialize empty tensor dictionaries."""
        self.name = name
        self.params: dict[str, np.ndarray] = {}
        self.grads: dict[str, np.ndarray] = {}
        self.buffers: dict[str, np.ndarray] = {}
        self._cache: tuple | None = None

    def forward(self, x: np.ndarray, training: bool) -> np.ndarray:
        """Compute the layer output, caching what backward needs."""
        raise NotImplementedError

    def backward(self, dy: np.ndarray) -> np.ndarray:
        """Fill ``grads`` and return the gradient with respect to the input."""
        raise NotImplementedError

    def parameter_count(self) -> int:
        """Return the number of trainable scalars."""
        return sum(p.size for p in self.params.values())

    def _cached(self) -> tuple:
        if self._cache is None:
            raise RuntimeError(f"{self.name}: backward called without a training forward pass")
        return self._cache


def _uniform(rng: np.random.Generator, bound: float, shape: tuple[int, ...], dtype) -> np.ndarray:
    return rng.uniform(-bound, bound, size=shape).astype(dtype)


def _im2col(x: np.ndarray, k: int) -> np.ndarray:
    """Return same-padded patches ``[B*H*W, C*k*k]`` of ``x``."""
    pad = k // 2
    batch, chans, height, width = x.shape
    xp = np.pad(x, ((0, 0), (0, 0), (pad, pad), (pad, pad)))
    windows = sliding_window_view(xp, (k, k), axis=(2, 3))
    return windows.transpose(0, 2, 3, 1, 4, 5).reshape(batch * height * width, chans * k * k)


class Conv2D(Layer):
    """2-D convolution, stride 1, same padding, odd square kernel."""

    def __init__(
        self,
        name: str,
        in_channels: int,
        out_channels: int,
        kernel_size: int,
        rng: np.random.Generator,
        dtype=np.float32,
    ) -> None:
        """Initialize fan-in scaled uniform weights and zero bias."""
        super().__init__(name)
        if kernel_size % 2 == 0:
            raise ShapeMismatchError(f"{name}: kernel size must be odd, got {kernel_size}")
        self.kernel_size = kernel_size
        fan_in = in_channels * kernel_size * kernel_size
        self.params["W"] = _uniform(
            rng,
            np.sqrt(6.0 / fan_in),
            (out_channels, in_channels, kernel_size, kernel_size),
            dtype,
        )
        self.params["b"] = np.zeros(out_channels, dtype=dtype)

    def forward(self, x: np.ndarray, training: bool) -> np.ndarray:
        """Convolve ``x`` of shape ``[B, C, H, W]``."""
        weight = self.params["W"]
        if x.ndim != 4 or x.shape[1] != weight.shape[1]:
            raise ShapeMismatchError(f"{self.name}: expected {weight.shape[1]} channels, got {x.shape}")
        batch, _, height, width = x.shape
        cols = _im2col(x, self.kernel_size)
        out = cols @ weight.reshape(weight.shape[0], -1).T + self.params["b"]
        if training:
            self._cache = (cols, x.shape)
        return out.reshape(batch, height, width, -1).transpose(0, 3, 1, 2)

    def backward(self, dy: np.ndarray) -> np.ndarray:
        """Backpropagate; the input gradient is a convolution with flipped weights."""
        cols, x_shape = self._cached()
        weight = self.params["W"]
        out_ch = weight.shape[0]
        dy_rows = dy.transpose(0, 2, 3, 1).reshape(-1, out_ch)
        self.grads["W"] = (dy_rows.T @ cols).reshape(weight.shape)
        self.grads["b"] = dy_rows.sum(axis=0)
        flipped = weight[:, :, ::-1, ::-1].transpose(1, 0, 2, 3)
        dcols = _im2col(dy, self.kernel_size)
        batch, chans, height, width = x_shape
        dx = dcols @ flipped.reshape(chans, -1).T
        return dx.reshape(batch, height, width, chans).transpose(0, 3, 1, 2)


class BatchNorm2D(Layer):
    """Per-channel batch normalization with running statistics."""

    def __init__(
        self,
        name: str,
        channels: int,
        momentum: float = BN_MOMENTUM,
        epsilon: float = BN_EPSILON,
        dtype=np.float32,
    ) -> None:
        """Initialize unit scale, zero shift and unit running variance."""
        super().__init__(name)
        self.momentum = momentum
        self.epsilon = epsilon
        self.params["gamma"] = np.ones(channels, dtype=dtype)
        self.params["beta"] = np.zeros(channels, dtype=dtype)
        self.buffers["running_mean"] = np.zeros(channels, dtype=dtype)
        self.buffers["running_var"] = np.ones(channels, dtype=dtype)

    def forward(self, x: np.ndarray, training: bool) -> np.ndarray:
        """Normalize with batch statistics in training, running ones otherwise."""
        shape = (1, -1, 1, 1)
        if training:
            mean = x.mean(axis=(0, 2, 3))
            var = x.var(axis=(0, 2, 3))
            m = self.momentum
            self.buffers["running_mean"] = (
                m * self.buffers["running_mean"] + (1 - m) * mean
            ).astype(x.dtype)
            self.buffers["running_var"] = (m * self.buffers["running_var"] + (1 - m) * var).astype(
                x.dtype
            )
        else:
            mean, var = self.buffers["running_mean"], self.buffers["running_var"]
        inv_std = 1.0 / np.sqrt(var + self.epsilon)
        x_hat = (x - mean.reshape(shape)) * inv_std.reshape(shape)
        if training:
            self._cache = (x_hat, inv_std)
        return self.params["gamma"].reshape(shape) * x_hat + self.params["beta"].reshape(shape)

    def backward(self, dy: np.ndarray) -> np.ndarray:
        """Backpropagate through the batch statistics."""
        x_hat, inv_std = self._cached()
        shape = (1, -1, 1, 1)
        count = dy.shape[0] * dy.shape[2] * dy.shape[3]
        self.grads["gamma"] = (dy * x_hat).sum(axis=(0, 2, 3))
        self.grads["beta"] = dy.sum(axis=(0, 2, 3))
        dx_hat = dy * self.params["gamma"].reshape(shape)
        return (
            inv_std.reshape(shape)
            / count
            * (
                count * dx_hat
                - dx_hat.sum(axis=(0, 2, 3), keepdims=True)
                - x_hat * (dx_hat * x_hat).sum(axis=(0, 2, 3), keepdims=True)
            )
        )


class ReLU(Layer):
    """Rectified linear unit."""

    def forward(self, x: np.ndarray, training: bool) -> np.ndarray:
        """Clamp negatives to zero."""
        if training:
            self._cache = (x > 0,)
        return np.maximum(x, 0)

    def backward(self, dy: np.ndarray) -> np.ndarray:
        """Pass gradients where the input was positive."""
        (mask,) = self._cached()
        return dy * mask


def _blocks(x: np.ndarray, size: int) -> np.ndarray:
    batch, chans, height, width = x.shape
    if height % size or width % size:
        raise ShapeMismatchError(f"pooling {size} does not divide {height}x{width}")
    return (
        x.reshape(batch, chans, height // size, size, width // size, size)
        .transpose(0, 1, 2, 4, 3, 5)
        .reshape(batch, chans, height // size, width // size, size * size)
    )


def _unblocks(blocks: np.ndarray, size: int) -> np.ndarray:
    batch, chans, rows, cols, _ = blocks.shape
    return (
        blocks.reshape(batch, chans, rows, cols, size, size)
        .transpose(0, 1, 2, 4, 3, 5)
        .reshape(batch, chans, rows * size, cols * size)
    )


class MaxPool2D(Layer):
    """Non-overlapping max pooling; gradients route to the first maximum."""

    def __init__(self, name: str, size: int = 2) -> None:
        """Initialize with the pooling window."""
        super().__init__(name)
        self.size = size

    def forward(self, x: np.ndarray, training: bool) -> np.ndarray:
        """Take the maximum of every ``size x size`` block."""
        blocks = _blocks(x, self.size)
        winner = blocks.argmax(axis=-1)
        if training:
            self._cache = (winner, blocks.shape)
        return np.take_along_axis(blocks, winner[..., None], axis=-1)[..., 0]

    def backward(self, dy: np.ndarray) -> np.ndarray:
        """Scatter gradients back to the winning positions."""
        winner, shape = self._cached()
        dblocks = np.zeros(shape, dtype=dy.dtype)
        np.put_along_axis(dblocks, winner[..., None], dy[..., None], axis=-1)
        return _unblocks(dblocks, self.size)


class AvgPool2D(Layer):
    """Non-overlapping average pooling."""

    def __init__(self, name: str, size: int = 2) -> None:
        """Initialize with the pooling window."""
        super().__init__(name)
        self.size = size

    def forward(self, x: np.ndarray, training: bool) -> np.ndarray:
        """Average every ``size x size`` block."""
        blocks = _blocks(x, self.size)
        if training:
            self._cache = (blocks.shape,)
        return blocks.mean(axis=-1)

    def backward(self, dy: np.ndarray) -> np.ndarray:
        """Spread gradients evenly over each block."""
        (shape,) = self._cached()
        dblocks = np.broadcast_to(dy[..., None] / shape[-1], shape)
        return _unblocks(np.ascontiguousarray(dblocks), self.size)


def _sigmoid(x: np.ndarray) -> np.ndarray:
    return 0.5 * (1.0 + np.tanh(0.5 * x))


class LSTM(Layer):
    """Single-layer LSTM returning the final hidden state.

    Gate rows of ``W_ih``, ``W_hh`` and ``b`` are stacked in the order
    input, forget, cell, output.
    """

    def __init__(
        self,
        name: str,
        input_size: int,
        hidden_size: int,
        rng: np.random.Generator,
        dtype=np.float32,
    ) -> None:
        """Initialize small uniform weights and a forget-gate bias of one."""
        super().__init__(name)
        self.hidden_size = hidden_size
        bound = 1.0 / np.sqrt(hidden_size)
        self.params["W_ih"] = _uniform(rng, bound, (4 * hidden_size, input_size), dtype)
        self.params["W_hh"] = _uniform(rng, bound, (4 * hidden_size, hidden_size), dtype)
        bias = np.zeros(4 * hidden_size, dtype=dtype)
        bias[hidden_size : 2 * hidden_size] = 1.0
        self.params["b"] = bias

    def forward(self, x: np.ndarray, training: bool) -> np.ndarray:
        """Run the sequence ``x`` of shape ``[B, T, F]``."""
        if x.ndim != 3 or x.shape[2] != self.params["W_ih"].shape[1]:
            raise ShapeMismatchError(f"{self.name}: bad sequence shape {x.shape}")
        batch, steps, _ = x.shape
        hid = self.hidden_size
        h = np.zeros((batch, hid), dtype=x.dtype)
        c = np.zeros((batch, hid), dtype=x.dtype)
        projected = x @ self.params["W_ih"].T + self.params["b"]
        history = []
        for t in range(steps):
            z = projected[:, t] + h @ self.params["W_hh"].T
            i = _sigmoid(z[:, :hid])
            f = _sigmoid(z[:, hid : 2 * hid])
            g = np.tanh(z[:, 2 * hid : 3 * hid])
            o = _sigmoid(z[:, 3 * hid :])
            c_prev, h_prev = c, h
            c = f * c_prev + i * g
            tanh_c = np.tanh(c)
            h = o * tanh_c
            history.append((i, f, g, o, c_prev, h_prev, tanh_c))
        if training:
            self._cache = (x, history)
        return h

    def backward(self, dy: np.ndarray) -> np.ndarray:
        """Backpropagate through time from the final hidden state."""
        x, history = self._cached()
        hid = self.hidden_size
        w_ih, w_hh = self.params["W_ih"], self.params["W_hh"]
        d_w_ih = np.zeros_like(w_ih)
        d_w_hh = np.zeros_like(w_hh)
        d_b = np.zeros_like(self.params["b"])
        dx = np.zeros_like(x)
        dh = dy
        dc = np.zeros_like(dy)
        for t in reversed(range(x.shape[1])):
            i, f, g, o, c_prev, h_prev, tanh_c = history[t]
            do = dh * tanh_c
            dc = dc + dh * o * (1 - tanh_c**2)
            di = dc * g
            dg = dc * i
            df = dc * c_prev
            dz = np.concatenate(
                [di * i * (1 - i), df * f * (1 - f), dg * (1 - g**2), do * o * (1 - o)], axis=1
            )
            d_w_ih += dz.T @ x[:, t]
            d_w_hh += dz.T @ h_prev
            d_b += dz.sum(axis=0)
            dx[:, t] = dz @ w_ih
            dh = dz @ w_hh
            dc = dc * f
        self.grads["W_ih"], self.grads["W_hh"], self.grads["b"] = d_w_ih, d_w_hh, d_b
        return dx


class Dense(Layer):
    """Fully connected layer ``y = x W^T + b``."""

    def __init__(
        self,
        name: str,
        in_features: int,
        out_features: int,
        rng: np.random.Generator,
        dtype=np.float32,
    ) -> None:
        """Initialize fan-in scaled uniform weights and zero bias."""
        super().__init__(name)
        self.params["W"] = _uniform(rng, np.sqrt(6.0 / in_features), (out_features, in_features), dtype)
        self.params["b"] = np.zeros(out_features, dtype=dtype)

    def forward(self, x: np.ndarray, training: bool) -> np.ndarray:
        """Apply the affine map to ``[B, in_features]``."""
        if x.ndim != 2 or x.shape[1] != self.params["W"].shape[1]:
            raise ShapeMismatchError(f"{self.name}: bad input shape {x.shape}")
        if training:
            self._cache = (x,)
        return x @ self.params["W"].T + self.params["b"]

    def backward(self, dy: np.ndarray) -> np.ndarray:
        """Return the input gradient and fill weight gradients."""
        (x,) = self._cached()
        self.grads["W"] = dy.T @ x
        self.grads["b"] = dy.sum(axis=0)
        return dy @ self.params["W"]


def softmax(logits: np.ndarray) -> np.ndarray:
    """Row-wise numerically stable softmax."""
    shifted = logits - logits.max(axis=1, keepdims=True)
    exp = np.exp(shifted)
    return exp / exp.sum(axis=1, keepdims=True)


def softmax_cross_entropy(logits: np.ndarray, labels: np.ndarray) -> tuple[float, np.ndarray]:
    """Return the mean cross-entropy and its gradient ``(softmax - onehot) / B``."""
    batch = logits.shape[0]
    shifted = logits - logits.max(axis=1, keepdims=True)
    log_probs = shifted - np.log(np.exp(shifted).sum(axis=1, keepdims=True))
    rows = np.arange(batch)
    loss = float(-log_probs[rows, labels].mean())
    grad = np.exp(log_probs)
    grad[rows, labels] -= 1
    return loss, grad / batch
