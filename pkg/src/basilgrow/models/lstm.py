"""Stacked LSTM regressor with backpropagation through time.

Each layer keeps a combined kernel ``W (n_in, 4H)``, recurrent kernel
``U (H, 4H)`` and bias ``b (4H,)`` with gate blocks ordered
``[input, forget, candidate, output]``.  Recurrent activations are
sigmoid; the cell activation (applied to the candidate and to the cell
state on output) is tanh by default, relu as an option.  Hidden and cell
states start at zero for every window.  A dense head maps the final
hidden state of the top layer to one output.

Dropout (training only) masks each layer's *output* connection, both
between layers and into the head; the recurrent path stays intact.
Masks use inverted scaling, so inference needs no correction.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import ConfigError, ShapeError
from ..numerics import Rng, sigmoid

DEFAULT_HIDDEN = (100, 100)


@dataclass
class LSTMLayer:
    W: np.ndarray  # (n_in, 4H)
    U: np.ndarray  # (H, 4H)
    b: np.ndarray  # (4H,)

    @property
    def hidden(self) -> int:
        return self.U.shape[0]


@dataclass
class LSTMParams:
    layers: list[LSTMLayer]
    dense_w: np.ndarray  # (H_last, 1)
    dense_b: np.ndarray  # (1,)
    cell_activation: str = "tanh"

    def flat_arrays(self) -> list[np.ndarray]:
        """Canonical order: per layer W, U, b; then dense weight and bias."""
        out: list[np.ndarray] = []
        for layer in self.layers:
            out.extend((layer.W, layer.U, layer.b))
        out.extend((self.dense_w, self.dense_b))
        return out

    def assign_flat(self, arrays: list[np.ndarray]) -> None:
        it = iter(arrays)
        for layer in self.layers:
            layer.W, layer.U, layer.b = next(it), next(it), next(it)
        self.dense_w, self.dense_b = next(it), next(it)


def lstm_parameter_count(params: LSTMParams) -> int:
    """``4 * (n_in + H + 1) * H`` per layer plus the dense head."""
    total = 0
    for layer in params.layers:
        n_in, h = layer.W.shape[0], layer.hidden
        total += 4 * (n_in + h + 1) * h
    total += params.dense_w.size + params.dense_b.size
    return total


def lstm_init(
    n_features: int,
    hidden: tuple[int, ...] = DEFAULT_HIDDEN,
    rng: Rng | None = None,
    cell_activation: str = "tanh",
) -> LSTMParams:
    """Scaled-uniform kernels, zero biases except forget gates at 1.0.

    Kernel ranges are ``sqrt(6 / (fan_in + H))`` per gate block; the
    forget-gate bias of 1.0 keeps early cell states flowing.
    """
    if cell_activation not in ("tanh", "relu"):
        raise ConfigError(f"cell activation must be 'tanh' or 'relu', got {cell_activation!r}")
    if not hidden or any(h < 1 for h in hidden):
        raise ConfigError(f"hidden sizes must be positive: {hidden}")
    rng = rng if rng is not None else Rng(0)
    layers = []
    n_in = n_features
    for h in hidden:
        rw = np.sqrt(6.0 / (n_in + h))
        ru = np.sqrt(6.0 / (h + h))
        b = np.zeros(4 * h)
        b[h : 2 * h] = 1.0  # forget gate
        layers.append(
            LSTMLayer(
                W=rng.uniform(n_in * 4 * h, -rw, rw).reshape(n_in, 4 * h),
                U=rng.uniform(h * 4 * h, -ru, ru).reshape(h, 4 * h),
                b=b,
            )
        )
        n_in = h
    rd = np.sqrt(6.0 / (n_in + 1))
    return LSTMParams(
        layers=layers,
        dense_w=rng.uniform(n_in, -rd, rd).reshape(n_in, 1),
        dense_b=np.zeros(1),
        cell_activation=cell_activation,
    )


def _cell_act(name: str, x: np.ndarray) -> np.ndarray:
    return np.tanh(x) if name == "tanh" else np.maximum(x, 0.0)


def _check_windows(params: LSTMParams, windows: np.ndarray) -> np.ndarray:
    windows = np.asarray(windows, dtype=np.float64)
    if windows.ndim != 3:
        raise ShapeError(f"expected windows of shape (n, steps, features), got {windows.shape}")
    if windows.shape[2] != params.layers[0].W.shape[0]:
        raise ShapeError(
            f"windows carry {windows.shape[2]} features but the first layer "
            f"expects {params.layers[0].W.shape[0]}"
        )
    return windows


def _forward(
    params: LSTMParams,
    windows: np.ndarray,
    dropout_masks: list[np.ndarray] | None,
):
    """Run the stack; returns (prediction, caches per layer, head input).

    Each layer cache holds, per step: input, gate activations, previous
    and current cell state, and act(c), everything BPTT needs.
    """
    act_name = params.cell_activation
    n, steps, _ = windows.shape
    inputs = windows.transpose(1, 0, 2)  # (steps, n, k)
    caches = []
    for li, layer in enumerate(params.layers):
        h_dim = layer.hidden
        h = np.zeros((n, h_dim))
        c = np.zeros((n, h_dim))
        cache = {
            "x": inputs,
            "i": np.empty((steps, n, h_dim)), "f": np.empty((steps, n, h_dim)),
            "g": np.empty((steps, n, h_dim)), "o": np.empty((steps, n, h_dim)),
            "c_prev": np.empty((steps, n, h_dim)), "c": np.empty((steps, n, h_dim)),
            "act_c": np.empty((steps, n, h_dim)), "h_prev": np.empty((steps, n, h_dim)),
        }
        outputs = np.empty((steps, n, h_dim))
        for t in range(steps):
            pre = inputs[t] @ layer.W + h @ layer.U + layer.b
            i = sigmoid(pre[:, :h_dim])
            f = sigmoid(pre[:, h_dim : 2 * h_dim])
            g = _cell_act(act_name, pre[:, 2 * h_dim : 3 * h_dim])
            o = sigmoid(pre[:, 3 * h_dim :])
            cache["h_prev"][t], cache["c_prev"][t] = h, c
            c = f * c + i * g
            act_c = _cell_act(act_name, c)
            h = o * act_c
            cache["i"][t], cache["f"][t], cache["g"][t], cache["o"][t] = i, f, g, o
            cache["c"][t], cache["act_c"][t] = c, act_c
            outputs[t] = h
        if dropout_masks is not None:
            outputs = outputs * dropout_masks[li]
        caches.append(cache)
        inputs = outputs
    head_in = inputs[-1]  # final step of the top layer (after dropout if any)
    pred = head_in @ params.dense_w + params.dense_b
    return pred, caches, head_in


def lstm_predict(params: LSTMParams, windows: np.ndarray, chunk: int = 4096) -> np.ndarray:
    """Deterministic predictions, ``(n, 1)``, computed in bounded chunks."""
    windows = _check_windows(params, windows)
    parts = []
    for start in range(0, windows.shape[0], chunk):
        pred, _, _ = _forward(params, windows[start : start + chunk], None)
        parts.append(pred)
    return np.vstack(parts)


def lstm_dropout_masks(
    params: LSTMParams, batch_size: int, steps: int, rate: float, rng: Rng
) -> list[np.ndarray] | None:
    """Inverted-dropout masks per layer, shape (steps, batch, hidden)."""
    if rate <= 0.0:
        return None
    if not 0.0 < rate < 1.0:
        raise ConfigError(f"dropout rate must be in [0, 1), got {rate}")
    keep = 1.0 - rate
    masks = []
    for layer in params.layers:
        u = rng.uniform(steps * batch_size * layer.hidden)
        masks.append(
            (u < keep).astype(np.float64).reshape(steps, batch_size, layer.hidden) / keep
        )
    return masks


def _dact_from_value(name: str, act_value: np.ndarray, raw: np.ndarray) -> np.ndarray:
    """Cell-activation derivative from cached values.

    tanh' recovers from the activation value; relu' from the sign of the
    raw argument (zero at the kink).
    """
    if name == "tanh":
        return 1.0 - act_value**2
    return (raw > 0.0).astype(np.float64)


def lstm_backward(
    params: LSTMParams,
    windows: np.ndarray,
    y: np.ndarray,
    dropout_masks: list[np.ndarray] | None = None,
) -> tuple[float, list[np.ndarray]]:
    """Batch MSE loss and gradients in ``flat_arrays`` order (full BPTT)."""
    windows = _check_windows(params, windows)
    y = np.asarray(y, dtype=np.float64).reshape(-1, 1)
    n, steps, _ = windows.shape
    if y.shape[0] != n:
        raise ShapeError(f"windows carry {n} samples but y has {y.shape[0]}")
    act_name = params.cell_activation

    pred, caches, head_in = _forward(params, windows, dropout_masks)
    residual = pred - y
    loss = float(np.mean(residual**2))
    delta = 2.0 * residual / n

    d_dense_w = head_in.T @ delta
    d_dense_b = delta.sum(axis=0)

    # gradient wrt each layer's *unmasked* outputs, per step
    top = len(params.layers) - 1
    dh_ext = np.zeros((steps, n, params.layers[top].hidden))
    dh_ext[-1] = delta @ params.dense_w.T
    if dropout_masks is not None:
        dh_ext[-1] *= dropout_masks[top][-1]

    grads: list[np.ndarray] = [np.empty(0)] * (3 * len(params.layers) + 2)
    for li in range(top, -1, -1):
        layer, cache = params.layers[li], caches[li]
        h_dim = layer.hidden
        dW = np.zeros_like(layer.W)
        dU = np.zeros_like(layer.U)
        db = np.zeros_like(layer.b)
        dx = np.empty((steps, n, layer.W.shape[0]))
        dh_rec = np.zeros((n, h_dim))
        dc_rec = np.zeros((n, h_dim))
        for t in range(steps - 1, -1, -1):
            i, f, g, o = cache["i"][t], cache["f"][t], cache["g"][t], cache["o"][t]
            dh = dh_ext[t] + dh_rec
            dc = dc_rec + dh * o * _dact_from_value(act_name, cache["act_c"][t], cache["c"][t])
            dpre = np.empty((n, 4 * h_dim))
            dpre[:, :h_dim] = dc * g * i * (1.0 - i)
            dpre[:, h_dim : 2 * h_dim] = dc * cache["c_prev"][t] * f * (1.0 - f)
            if act_name == "tanh":
                dpre[:, 2 * h_dim : 3 * h_dim] = dc * i * (1.0 - g**2)
            else:
                dpre[:, 2 * h_dim : 3 * h_dim] = dc * i * (g > 0.0)
            dpre[:, 3 * h_dim :] = dh * cache["act_c"][t] * o * (1.0 - o)
            dW += cache["x"][t].T @ dpre
            dU += cache["h_prev"][t].T @ dpre
            db += dpre.sum(axis=0)
            dx[t] = dpre @ layer.W.T
            dh_rec = dpre @ layer.U.T
            dc_rec = dc * f
        grads[3 * li], grads[3 * li + 1], grads[3 * li + 2] = dW, dU, db
        if li > 0:
            dh_ext = dx
            if dropout_masks is not None:
                dh_ext = dh_ext * dropout_masks[li - 1]
    grads[-2], grads[-1] = d_dense_w, d_dense_b
    return loss, grads
