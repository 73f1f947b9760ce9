"""Recurrent model: counts, cell dynamics, and BPTT gradient verification."""

import numpy as np
import pytest

from basilgrow.errors import ConfigError, ShapeError
from basilgrow.models.lstm import (
    _forward,
    lstm_backward,
    lstm_dropout_masks,
    lstm_init,
    lstm_parameter_count,
    lstm_predict,
)
from basilgrow.numerics import Rng
from gradcheck import max_relative_error, numeric_gradients


def test_parameter_count_matches_gate_algebra():
    # 4*(10+100+1)*100 + 4*(100+100+1)*100 + (100+1)
    params = lstm_init(10, (100, 100), Rng(0))
    assert lstm_parameter_count(params) == 124_901
    small = lstm_init(3, (4,), Rng(0))
    assert lstm_parameter_count(small) == 4 * (3 + 4 + 1) * 4 + 5


def test_zero_parameters_give_zero_output():
    params = lstm_init(2, (3,), Rng(0))
    for arr in params.flat_arrays():
        arr[:] = 0.0
    windows = Rng(1).normal(4 * 5 * 2).reshape(4, 5, 2)
    # gates sit at sigmoid(0)=0.5 but the candidate tanh(0)=0 keeps c at 0
    assert np.array_equal(lstm_predict(params, windows), np.zeros((4, 1)))


def test_saturated_gates_preserve_cell_state():
    params = lstm_init(2, (3,), Rng(2))
    h = 3
    params.layers[0].b[0:h] = -50.0  # input gate shut
    params.layers[0].b[h : 2 * h] = 50.0  # forget gate wide open
    windows = Rng(3).normal(6 * 8 * 2).reshape(6, 8, 2)
    _, caches, _ = _forward(params, windows, None)
    final_cell = caches[0]["c"][-1]
    assert np.abs(final_cell).max() < 1e-9  # stays at the zero init


def test_gradients_match_central_differences_two_steps():
    rng = Rng(31)
    windows = rng.normal(6 * 2 * 3).reshape(6, 2, 3)
    y = rng.normal(6).reshape(6, 1)
    params = lstm_init(3, (4,), rng.spawn(2))
    _, analytic = lstm_backward(params, windows, y)
    numeric = numeric_gradients(
        lambda: lstm_backward(params, windows, y)[0], params.flat_arrays()
    )
    assert max_relative_error(analytic, numeric) < 1e-4


def test_gradients_stacked_layers_and_relu_cell():
    rng = Rng(37)
    windows = rng.normal(5 * 3 * 2).reshape(5, 3, 2)
    y = rng.normal(5).reshape(5, 1)
    params = lstm_init(2, (4, 3), rng.spawn(2), cell_activation="relu")
    _, analytic = lstm_backward(params, windows, y)
    numeric = numeric_gradients(
        lambda: lstm_backward(params, windows, y)[0], params.flat_arrays()
    )
    assert max_relative_error(analytic, numeric) < 1e-4


def test_gradients_with_dropout_masks_fixed():
    rng = Rng(41)
    windows = rng.normal(7 * 2 * 3).reshape(7, 2, 3)
    y = rng.normal(7).reshape(7, 1)
    params = lstm_init(3, (4, 4), rng.spawn(2))
    masks = lstm_dropout_masks(params, 7, 2, 0.3, rng.spawn(5))
    _, analytic = lstm_backward(params, windows, y, masks)
    numeric = numeric_gradients(
        lambda: lstm_backward(params, windows, y, masks)[0], params.flat_arrays()
    )
    assert max_relative_error(analytic, numeric) < 1e-4


def test_predict_chunking_is_invisible():
    params = lstm_init(3, (5,), Rng(7))
    windows = Rng(8).normal(50 * 2 * 3).reshape(50, 2, 3)
    assert np.array_equal(
        lstm_predict(params, windows, chunk=7), lstm_predict(params, windows, chunk=1000)
    )


def test_dropout_masks_shapes_and_scaling():
    params = lstm_init(4, (6, 5), Rng(1))
    masks = lstm_dropout_masks(params, 10, 3, 0.3, Rng(2))
    assert masks[0].shape == (3, 10, 6)
    assert masks[1].shape == (3, 10, 5)
    for m in masks:
        assert set(np.unique(m).tolist()) <= {0.0, 1.0 / 0.7}
    assert lstm_dropout_masks(params, 10, 3, 0.0, Rng(2)) is None


def test_forget_bias_initialized_to_one():
    params = lstm_init(3, (4, 2), Rng(0))
    for layer in params.layers:
        h = layer.hidden
        assert np.array_equal(layer.b[h : 2 * h], np.ones(h))
        assert np.array_equal(layer.b[:h], np.zeros(h))


def test_input_validation():
    params = lstm_init(3, (4,), Rng(0))
    with pytest.raises(ShapeError):
        lstm_predict(params, np.zeros((5, 2)))  # not 3-D
    with pytest.raises(ShapeError):
        lstm_predict(params, np.zeros((5, 2, 7)))  # wrong feature count
    with pytest.raises(ConfigError):
        lstm_init(3, (0,), Rng(0))
    with pytest.raises(ConfigError):
        lstm_init(3, (4,), Rng(0), cell_activation="gelu")
