"""Mini-batch training for the neural regressors.

One loop serves both architectures: seeded shuffling each epoch, Adam
updates, optional global-norm gradient clipping, inverted dropout, and
a per-epoch loss curve.  A non-finite epoch loss aborts with diagnostics
instead of silently producing NaN weights.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ..errors import ConfigError, TrainingDivergedError
from ..numerics import AdamState, Rng, adam_step
from . import lstm as lstm_mod
from . import mlp as mlp_mod


@dataclass
class TrainConfig:
    """Optimization knobs shared by both neural models."""

    epochs: int = 50
    batch_size: int = 32
    lr: float = 0.001
    seed: int = 0
    dropout: float = 0.0
    grad_clip: float | None = None  # global gradient norm ceiling
    center_output_bias: bool = True  # start the head at the target mean

    def validate(self) -> None:
        if self.epochs < 1:
            raise ConfigError(f"epochs must be >= 1, got {self.epochs}")
        if self.batch_size < 1:
            raise ConfigError(f"batch_size must be >= 1, got {self.batch_size}")
        if self.lr <= 0:
            raise ConfigError(f"learning rate must be positive, got {self.lr}")
        if not 0.0 <= self.dropout < 1.0:
            raise ConfigError(f"dropout must be in [0, 1), got {self.dropout}")
        if self.grad_clip is not None and self.grad_clip <= 0:
            raise ConfigError(f"grad_clip must be positive, got {self.grad_clip}")


def global_norm(grads: list[np.ndarray]) -> float:
    return math.sqrt(sum(float(np.sum(g * g)) for g in grads))


def clip_gradients(grads: list[np.ndarray], ceiling: float) -> tuple[list[np.ndarray], float]:
    """Scale all gradients down to ``ceiling`` when their global norm exceeds it."""
    norm = global_norm(grads)
    if norm > ceiling and norm > 0.0:
        scale = ceiling / norm
        return [g * scale for g in grads], norm
    return grads, norm


def _train(params, backward, n_samples: int, config: TrainConfig) -> list[float]:
    """Generic epoch loop; mutates ``params`` in place via ``assign_flat``."""
    config.validate()
    shuffle_rng = Rng(config.seed).spawn(11)
    state = AdamState(lr=config.lr)
    curve: list[float] = []
    arrays = params.flat_arrays()
    last_norm = 0.0
    for epoch in range(config.epochs):
        order = shuffle_rng.permutation(n_samples)
        total = 0.0
        for start in range(0, n_samples, config.batch_size):
            batch = order[start : start + config.batch_size]
            loss, grads = backward(batch)
            if config.grad_clip is not None:
                grads, last_norm = clip_gradients(grads, config.grad_clip)
            else:
                last_norm = global_norm(grads)
            arrays, state = adam_step(state, arrays, grads)
            params.assign_flat(arrays)
            total += loss * len(batch)
        epoch_loss = total / n_samples
        if not math.isfinite(epoch_loss):
            raise TrainingDivergedError(epoch=epoch, lr=config.lr, grad_norm=last_norm)
        curve.append(epoch_loss)
    return curve


def train_mlp(
    X: np.ndarray,
    y: np.ndarray,
    hidden_layers: tuple[int, ...] = mlp_mod.DEFAULT_HIDDEN,
    config: TrainConfig | None = None,
) -> tuple[mlp_mod.MLPParams, list[float]]:
    """Fit a feed-forward regressor; returns (params, per-epoch loss curve)."""
    config = config or TrainConfig()
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64).reshape(-1, 1)
    rng = Rng(config.seed)
    params = mlp_mod.mlp_init([X.shape[1], *hidden_layers, 1], rng.spawn(1))
    if config.center_output_bias:
        params.biases[-1][:] = float(y.mean())
    dropout_rng = rng.spawn(3)

    def backward(batch_idx):
        xb, yb = X[batch_idx], y[batch_idx]
        masks = mlp_mod.dropout_masks_for(params, xb.shape[0], config.dropout, dropout_rng)
        return mlp_mod.mlp_backward(params, xb, yb, masks)

    curve = _train(params, backward, X.shape[0], config)
    return params, curve


def train_lstm(
    windows: np.ndarray,
    y: np.ndarray,
    hidden: tuple[int, ...] = lstm_mod.DEFAULT_HIDDEN,
    config: TrainConfig | None = None,
    cell_activation: str = "tanh",
) -> tuple[lstm_mod.LSTMParams, list[float]]:
    """Fit the stacked LSTM; returns (params, per-epoch loss curve)."""
    config = config or TrainConfig(dropout=0.3, grad_clip=5.0)
    windows = np.asarray(windows, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64).reshape(-1, 1)
    n, steps, k = windows.shape
    rng = Rng(config.seed)
    params = lstm_mod.lstm_init(k, hidden, rng.spawn(1), cell_activation)
    if config.center_output_bias:
        params.dense_b[:] = float(y.mean())
    dropout_rng = rng.spawn(3)

    def backward(batch_idx):
        wb, yb = windows[batch_idx], y[batch_idx]
        masks = lstm_mod.lstm_dropout_masks(
            params, wb.shape[0], steps, config.dropout, dropout_rng
        )
        return lstm_mod.lstm_backward(params, wb, yb, masks)

    curve = _train(params, backward, n, config)
    return params, curve
