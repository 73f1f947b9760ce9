"""Low-level numeric kernels shared by every model in this package.

Conventions
-----------
* Matrices are C-order ``float64`` numpy arrays: ``shape[0]`` rows,
  ``shape[1]`` columns, data laid out row-major.
* All randomness flows through :class:`Rng`, a SplitMix64 counter-based
  generator implemented with explicit 64-bit integer arithmetic.  Equal
  seeds produce byte-identical streams on every platform, so seeded runs
  are reproducible end to end regardless of numpy version.
* Reductions use a fixed evaluation order for fixed inputs, so repeated
  runs on one machine give bit-identical results.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, ShapeError

_MASK64 = (1 << 64) - 1
_SPLITMIX_GAMMA = 0x9E3779B97F4A7C15
_INV_2_53 = 1.0 / (1 << 53)


def as_matrix(a) -> np.ndarray:
    """Coerce ``a`` to a 2-D float64 C-order array."""
    m = np.ascontiguousarray(a, dtype=np.float64)
    if m.ndim != 2:
        raise ShapeError(f"expected a 2-D matrix, got ndim={m.ndim} (shape {m.shape})")
    return m


def matmul(a, b) -> np.ndarray:
    """Matrix product of two 2-D arrays.

    Raises :class:`ShapeError` naming both shapes when the inner
    dimensions disagree.
    """
    a = as_matrix(a)
    b = as_matrix(b)
    if a.shape[1] != b.shape[0]:
        raise ShapeError(f"cannot multiply {a.shape} by {b.shape}: inner dimensions differ")
    return a @ b


# --------------------------------------------------------------------------
# activations


def sigmoid(x: np.ndarray) -> np.ndarray:
    """Logistic function, evaluated without overflow for any magnitude."""
    x = np.asarray(x, dtype=np.float64)
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def dsigmoid(x: np.ndarray) -> np.ndarray:
    s = sigmoid(x)
    return s * (1.0 - s)


def tanh(x: np.ndarray) -> np.ndarray:
    return np.tanh(np.asarray(x, dtype=np.float64))


def dtanh(x: np.ndarray) -> np.ndarray:
    t = np.tanh(np.asarray(x, dtype=np.float64))
    return 1.0 - t * t


def relu(x: np.ndarray) -> np.ndarray:
    return np.maximum(np.asarray(x, dtype=np.float64), 0.0)


def drelu(x: np.ndarray) -> np.ndarray:
    # subgradient at the kink is taken as 0
    return (np.asarray(x, dtype=np.float64) > 0.0).astype(np.float64)


ACTIVATIONS = {
    "sigmoid": (sigmoid, dsigmoid),
    "tanh": (tanh, dtanh),
    "relu": (relu, drelu),
}


def activation(name: str):
    """Return ``(f, df)`` for a named activation."""
    try:
        return ACTIVATIONS[name]
    except KeyError:
        raise ConfigError(
            f"unknown activation {name!r}; choose from {sorted(ACTIVATIONS)}"
        ) from None


# --------------------------------------------------------------------------
# Adam


@dataclass
class AdamState:
    """First/second moment accumulators for one list of parameter arrays.

    ``lr``, ``beta1``, ``beta2`` and ``eps`` default to the standard
    published values.  ``step`` counts completed updates and drives the
    bias correction.
    """

    lr: float = 0.001
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step: int = 0
    m: list[np.ndarray] = field(default_factory=list)
    v: list[np.ndarray] = field(default_factory=list)


def adam_step(
    state: AdamState, params: list[np.ndarray], grads: list[np.ndarray]
) -> tuple[list[np.ndarray], AdamState]:
    """One bias-corrected Adam update.

    Returns fresh parameter arrays and a fresh state; inputs are left
    untouched.  With zero gradients and zero moment accumulators the
    update is exactly the identity on parameters.
    """
    if len(params) != len(grads):
        raise ShapeError(f"got {len(params)} parameter arrays but {len(grads)} gradients")
    if not state.m:
        state = AdamState(
            state.lr, state.beta1, state.beta2, state.eps, state.step,
            [np.zeros_like(p) for p in params],
            [np.zeros_like(p) for p in params],
        )
    t = state.step + 1
    b1, b2 = state.beta1, state.beta2
    new_m, new_v, new_p = [], [], []
    for p, g, m, v in zip(params, grads, state.m, state.v):
        if p.shape != g.shape:
            raise ShapeError(f"parameter shape {p.shape} does not match gradient shape {g.shape}")
        m = b1 * m + (1.0 - b1) * g
        v = b2 * v + (1.0 - b2) * (g * g)
        m_hat = m / (1.0 - b1**t)
        v_hat = v / (1.0 - b2**t)
        new_p.append(p - state.lr * m_hat / (np.sqrt(v_hat) + state.eps))
        new_m.append(m)
        new_v.append(v)
    return new_p, AdamState(state.lr, b1, b2, state.eps, t, new_m, new_v)


# --------------------------------------------------------------------------
# seeded random stream


def _splitmix64(x: np.ndarray) -> np.ndarray:
    """SplitMix64 finalizer applied elementwise to uint64 values."""
    with np.errstate(over="ignore"):
        z = x.copy()
        z ^= z >> np.uint64(30)
        z *= np.uint64(0xBF58476D1CE4E5B9)
        z ^= z >> np.uint64(27)
        z *= np.uint64(0x94D049BB133111EB)
        z ^= z >> np.uint64(31)
    return z


class Rng:
    """Deterministic SplitMix64 random stream.

    The state advances by the SplitMix64 increment per drawn value;
    blocks of values are produced by vectorizing the same per-value
    recurrence, so ``n`` single draws and one block of ``n`` draws yield
    identical numbers.
    """

    def __init__(self, seed: int):
        self._state = int(seed) & _MASK64

    def _raw(self, n: int) -> np.ndarray:
        """Next ``n`` uint64 values from the stream."""
        if n < 0:
            raise ConfigError(f"cannot draw {n} values")
        offsets = np.arange(1, n + 1, dtype=np.uint64)
        with np.errstate(over="ignore"):
            states = np.uint64(self._state) + offsets * np.uint64(_SPLITMIX_GAMMA)
        self._state = (self._state + n * _SPLITMIX_GAMMA) & _MASK64
        return _splitmix64(states)

    def next_u64(self) -> int:
        return int(self._raw(1)[0])

    def uniform(self, n: int, low: float = 0.0, high: float = 1.0) -> np.ndarray:
        """``n`` doubles in ``[low, high)`` using the top 53 bits per draw."""
        u = (self._raw(n) >> np.uint64(11)).astype(np.float64) * _INV_2_53
        return low + (high - low) * u

    def normal(self, n: int, mean: float = 0.0, std: float = 1.0) -> np.ndarray:
        """``n`` Gaussian draws via the Box-Muller transform.

        Draws pairs ``(u1, u2)`` with ``u1`` in ``(0, 1]`` (so the log is
        finite) and maps them to ``sqrt(-2 ln u1) * (cos, sin)(2 pi u2)``.
        """
        if std < 0:
            raise ConfigError(f"normal std must be >= 0, got {std}")
        pairs = (n + 1) // 2
        u1 = (self._raw(pairs) >> np.uint64(11)).astype(np.float64)
        u1 = (u1 + 1.0) * _INV_2_53  # (0, 1]
        u2 = (self._raw(pairs) >> np.uint64(11)).astype(np.float64) * _INV_2_53
        r = np.sqrt(-2.0 * np.log(u1))
        theta = (2.0 * np.pi) * u2
        z = np.concatenate([r * np.cos(theta), r * np.sin(theta)])[:n]
        return mean + std * z

    def permutation(self, n: int) -> np.ndarray:
        """Deterministic permutation of ``range(n)``: stable argsort of uniforms."""
        return np.argsort(self.uniform(n), kind="stable")

    def choice(self, n: int, k: int) -> np.ndarray:
        """``k`` distinct indices from ``range(n)``, order seeded."""
        if k > n:
            raise ConfigError(f"cannot choose {k} distinct values from {n}")
        return self.permutation(n)[:k]

    def spawn(self, tag: int) -> "Rng":
        """Independent child stream; distinct tags give distinct streams."""
        mixed = _splitmix64(np.array([(self._state ^ tag) & _MASK64], dtype=np.uint64))
        return Rng(int(mixed[0]) ^ _SPLITMIX_GAMMA)
