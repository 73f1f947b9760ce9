"""Feed-forward regressor: affine layers with ReLU hidden units.

Forward and backward passes are written directly against the package
numerics so the gradient algebra stays visible; the output layer is
linear and the training loss is mean squared error over the batch.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import ConfigError, ShapeError
from ..numerics import Rng, activation

DEFAULT_HIDDEN = (300, 300, 150)


@dataclass
class MLPParams:
    """Weights ``(fan_in, fan_out)`` and biases ``(fan_out,)`` per layer."""

    weights: list[np.ndarray]
    biases: list[np.ndarray]
    hidden_activation: str = "relu"

    def layer_sizes(self) -> list[int]:
        return [self.weights[0].shape[0]] + [w.shape[1] for w in self.weights]

    def flat_arrays(self) -> list[np.ndarray]:
        """Canonical parameter order: per layer, weight then bias."""
        out: list[np.ndarray] = []
        for w, b in zip(self.weights, self.biases):
            out.extend((w, b))
        return out

    def assign_flat(self, arrays: list[np.ndarray]) -> None:
        it = iter(arrays)
        for i in range(len(self.weights)):
            self.weights[i] = next(it)
            self.biases[i] = next(it)


def mlp_parameter_count(params: MLPParams) -> int:
    """``sum((fan_in + 1) * fan_out)`` across layers."""
    return sum((w.shape[0] + 1) * w.shape[1] for w in params.weights)


def mlp_init(layer_sizes: list[int], rng: Rng, hidden_activation: str = "relu") -> MLPParams:
    """Scaled-uniform init: ``U(-r, r)`` with ``r = sqrt(6 / (fan_in + fan_out))``."""
    if len(layer_sizes) < 2:
        raise ConfigError(f"need at least input and output sizes, got {layer_sizes}")
    if any(s < 1 for s in layer_sizes):
        raise ConfigError(f"layer sizes must be positive: {layer_sizes}")
    weights, biases = [], []
    for fan_in, fan_out in zip(layer_sizes, layer_sizes[1:]):
        r = np.sqrt(6.0 / (fan_in + fan_out))
        weights.append(rng.uniform(fan_in * fan_out, -r, r).reshape(fan_in, fan_out))
        biases.append(np.zeros(fan_out))
    return MLPParams(weights=weights, biases=biases, hidden_activation=hidden_activation)


def _forward(params: MLPParams, X: np.ndarray, dropout_masks: list[np.ndarray] | None):
    """Returns (prediction, per-layer pre-activations, post-activations)."""
    act, _ = activation(params.hidden_activation)
    pre, post = [], [X]
    h = X
    last = len(params.weights) - 1
    for i, (w, b) in enumerate(zip(params.weights, params.biases)):
        z = h @ w + b
        pre.append(z)
        if i < last:
            h = act(z)
            if dropout_masks is not None:
                h = h * dropout_masks[i]
        else:
            h = z  # linear output
        post.append(h)
    return h, pre, post


def mlp_predict(params: MLPParams, X: np.ndarray) -> np.ndarray:
    """Deterministic forward pass (no dropout), ``(n, 1)`` output."""
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[1] != params.weights[0].shape[0]:
        raise ShapeError(
            f"input shape {X.shape} does not match first layer fan-in "
            f"{params.weights[0].shape[0]}"
        )
    out, _, _ = _forward(params, X, None)
    return out


def dropout_masks_for(
    params: MLPParams, batch_size: int, rate: float, rng: Rng
) -> list[np.ndarray] | None:
    """Inverted-dropout masks for each hidden layer, or None when disabled."""
    if rate <= 0.0:
        return None
    if not 0.0 < rate < 1.0:
        raise ConfigError(f"dropout rate must be in [0, 1), got {rate}")
    keep = 1.0 - rate
    masks = []
    for w in params.weights[:-1]:
        u = rng.uniform(batch_size * w.shape[1]).reshape(batch_size, w.shape[1])
        masks.append((u < keep).astype(np.float64) / keep)
    return masks


def mlp_backward(
    params: MLPParams,
    X: np.ndarray,
    y: np.ndarray,
    dropout_masks: list[np.ndarray] | None = None,
) -> tuple[float, list[np.ndarray]]:
    """Batch MSE loss and gradients in ``flat_arrays`` order.

    Loss is ``mean((pred - y)^2)`` over the batch; gradients follow by
    the chain rule through each affine/ReLU stage (and through the
    inverted-dropout masks when supplied).
    """
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64).reshape(-1, 1)
    if X.shape[0] != y.shape[0]:
        raise ShapeError(f"X has {X.shape[0]} rows but y has {y.shape[0]}")
    n = X.shape[0]
    _, dact = activation(params.hidden_activation)

    pred, pre, post = _forward(params, X, dropout_masks)
    residual = pred - y
    loss = float(np.mean(residual**2))

    grads: list[np.ndarray] = [np.empty(0)] * (2 * len(params.weights))
    delta = 2.0 * residual / n  # d loss / d output
    for i in range(len(params.weights) - 1, -1, -1):
        grads[2 * i] = post[i].T @ delta
        grads[2 * i + 1] = delta.sum(axis=0)
        if i > 0:
            delta = delta @ params.weights[i].T
            if dropout_masks is not None:
                delta = delta * dropout_masks[i - 1]
            delta = delta * dact(pre[i - 1])
    return loss, grads
