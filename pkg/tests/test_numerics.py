"""Kernel-level checks: matmul, activations, Adam, and the seeded stream.

Reference values come from independent routes: a pure-python SplitMix64
transcription for the RNG, hand-evaluated closed forms for Adam and the
activations, and central finite differences for every derivative.
"""

import math

import numpy as np
import pytest

from basilgrow.errors import ConfigError, ShapeError
from basilgrow.numerics import (
    AdamState,
    Rng,
    activation,
    adam_step,
    dsigmoid,
    matmul,
    relu,
    sigmoid,
    tanh,
)

MASK = (1 << 64) - 1


def reference_splitmix64(seed, n):
    """Pure-python transcription of the published SplitMix64 recurrence."""
    out = []
    state = seed & MASK
    for _ in range(n):
        state = (state + 0x9E3779B97F4A7C15) & MASK
        z = state
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK
        out.append(z ^ (z >> 31))
    return out


# --------------------------------------------------------------------------
# matmul


def test_matmul_hand_product():
    out = matmul([[1.0, 2.0], [3.0, 4.0]], [[5.0], [6.0]])
    assert out.tolist() == [[17.0], [39.0]]


def test_matmul_identity():
    a = np.arange(12.0).reshape(3, 4)
    assert np.array_equal(matmul(np.eye(3), a), a)


def test_matmul_shape_error_names_both_shapes():
    with pytest.raises(ShapeError) as err:
        matmul(np.zeros((2, 3)), np.zeros((2, 3)))
    assert "(2, 3)" in str(err.value)


def test_matmul_rejects_non_2d():
    with pytest.raises(ShapeError):
        matmul(np.zeros(3), np.zeros((3, 1)))


def test_matmul_associativity_within_relative_tolerance():
    rng = Rng(11)
    for trial in range(20):
        a = rng.normal(12).reshape(3, 4)
        b = rng.normal(20).reshape(4, 5)
        c = rng.normal(10).reshape(5, 2)
        left = matmul(matmul(a, b), c)
        right = matmul(a, matmul(b, c))
        scale = max(np.abs(left).max(), 1.0)
        assert np.abs(left - right).max() / scale < 1e-9


# --------------------------------------------------------------------------
# activations


def test_activation_fixed_points():
    assert sigmoid(np.array(0.0)) == 0.5
    assert relu(np.array(-3.0)) == 0.0
    assert relu(np.array(2.5)) == 2.5
    assert tanh(np.array(0.0)) == 0.0


def test_tanh_reference_value():
    # hand value of tanh(1) to 16 digits
    assert abs(float(tanh(np.array(1.0))) - 0.7615941559557649) < 1e-15


def test_sigmoid_saturates_without_overflow():
    with np.errstate(over="raise"):
        hi = sigmoid(np.array([1000.0]))
        lo = sigmoid(np.array([-1000.0]))
    assert hi[0] == 1.0
    assert lo[0] == 0.0


def test_derivatives_match_central_differences():
    h = 1e-5
    points = np.array([-2.3, -0.7, 0.31, 1.9])  # away from the relu kink
    for name in ("sigmoid", "tanh", "relu"):
        f, df = activation(name)
        numeric = (f(points + h) - f(points - h)) / (2 * h)
        assert np.abs(numeric - df(points)).max() < 1e-6, name


def test_relu_subgradient_at_kink_is_zero():
    _, df = activation("relu")
    assert df(np.array([0.0]))[0] == 0.0


def test_unknown_activation_rejected():
    with pytest.raises(ConfigError):
        activation("swish")


# --------------------------------------------------------------------------
# Adam


def test_adam_scalar_step_matches_hand_recurrence():
    p = [np.array([1.0])]
    g = [np.array([0.5])]
    new_p, state = adam_step(AdamState(), p, g)
    # closed form for one fresh step: m_hat = g, v_hat = g^2
    expected = 1.0 - 0.001 * 0.5 / (math.sqrt(0.25) + 1e-8)
    assert abs(new_p[0][0] - expected) < 1e-15
    assert state.step == 1
    assert p[0][0] == 1.0  # input untouched


def test_adam_zero_gradient_is_identity_from_zero_moments():
    p = [np.array([3.0, -2.0])]
    z = [np.zeros(2)]
    state = AdamState()
    for _ in range(4):
        p2, state = adam_step(state, p, z)
        assert np.array_equal(p2[0], p[0])
        p = p2
    assert state.step == 4


def test_adam_constant_gradient_moves_monotonically():
    p = [np.array([0.0])]
    g = [np.array([1.0])]
    state = AdamState()
    last = 0.0
    for _ in range(5):
        p, state = adam_step(state, p, g)
        assert p[0][0] < last
        last = p[0][0]


def test_adam_converges_on_quadratic():
    # minimize (x - 3)^2: gradient 2(x - 3)
    p = [np.array([0.0])]
    state = AdamState(lr=0.05)
    for _ in range(2000):
        g = [2.0 * (p[0] - 3.0)]
        p, state = adam_step(state, p, g)
    assert abs(p[0][0] - 3.0) < 1e-4


def test_adam_shape_mismatch_rejected():
    with pytest.raises(ShapeError):
        adam_step(AdamState(), [np.zeros(2)], [np.zeros(3)])
    with pytest.raises(ShapeError):
        adam_step(AdamState(), [np.zeros(2)], [np.zeros(2), np.zeros(2)])


# --------------------------------------------------------------------------
# seeded stream


def test_stream_matches_pure_python_reference():
    for seed in (0, 1, 42, 2**63 + 17):
        rng = Rng(seed)
        got = [rng.next_u64() for _ in range(8)]
        assert got == reference_splitmix64(seed, 8)


def test_block_draws_equal_single_draws():
    block = Rng(9).uniform(64)
    rng = Rng(9)
    singles = np.array([rng.uniform(1)[0] for _ in range(64)])
    assert np.array_equal(block, singles)


def test_equal_seeds_equal_streams():
    a, b = Rng(123), Rng(123)
    assert np.array_equal(a.normal(100), b.normal(100))
    assert not np.array_equal(Rng(123).normal(100), Rng(124).normal(100))


def test_uniform_range_and_determinism():
    u = Rng(7).uniform(10_000)
    assert u.min() >= 0.0 and u.max() < 1.0
    v = Rng(7).uniform(10_000, low=-2.0, high=5.0)
    assert v.min() >= -2.0 and v.max() < 5.0


def test_normal_moments():
    z = Rng(2024).normal(100_000)
    assert abs(z.mean()) < 0.02
    assert abs(z.std() - 1.0) < 0.02


def test_normal_zero_std_is_constant():
    z = Rng(5).normal(17, mean=4.2, std=0.0)
    assert np.array_equal(z, np.full(17, 4.2))


def test_normal_negative_std_rejected():
    with pytest.raises(ConfigError):
        Rng(5).normal(3, std=-1.0)


def test_permutation_is_a_permutation():
    p = Rng(31).permutation(257)
    assert sorted(p.tolist()) == list(range(257))


def test_choice_distinct_and_bounded():
    idx = Rng(77).choice(50, 12)
    assert len(set(idx.tolist())) == 12
    assert idx.min() >= 0 and idx.max() < 50
    with pytest.raises(ConfigError):
        Rng(77).choice(5, 9)


def test_spawned_streams_differ_from_parent_and_each_other():
    parent = Rng(1000)
    c1 = parent.spawn(1).uniform(32)
    c2 = parent.spawn(2).uniform(32)
    base = Rng(1000).uniform(32)
    assert not np.array_equal(c1, c2)
    assert not np.array_equal(c1, base)
