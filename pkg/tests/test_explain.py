"""Exact attribution: closed-form linear oracle, game-theory axioms, reports."""

from itertools import permutations
from math import factorial

import numpy as np
import pytest

from basilgrow.dataset import design_matrix, fit_scaler, apply_scaler, split
from basilgrow.errors import ConfigError, EmptyDatasetError, ShapeError
from basilgrow.explain import (
    Attribution,
    ImportanceReport,
    background_sample,
    importance,
    read_importance_csv,
    shapley_exact,
    write_attributions_csv,
    write_importance_csv,
)
from basilgrow.models.training import TrainConfig, train_mlp
from basilgrow.models.mlp import mlp_predict
from basilgrow.numerics import Rng
from basilgrow.sensorsim import SimConfig, generate


def reference_shapley(predict_fn, x, background):
    """Permutation-average formulation, independent of the library's route.

    phi_i = (1/k!) sum over orderings of [v(seen + i) - v(seen)].
    Only usable for tiny k; that is the point of a reference.
    """
    k = x.shape[-1]
    cache = {}

    def v(features):
        key = frozenset(features)
        if key not in cache:
            mask = np.zeros(k, dtype=bool)
            mask[list(key)] = True
            z = np.where(mask, x, background)
            cache[key] = float(np.asarray(predict_fn(z)).reshape(-1).mean())
        return cache[key]

    phi = np.zeros(k)
    for order in permutations(range(k)):
        seen = []
        for i in order:
            phi[i] += v(seen + [i]) - v(seen)
            seen.append(i)
    return phi / factorial(k)


def linear_predict(beta, intercept):
    beta = np.asarray(beta, dtype=np.float64)
    return lambda Z: Z.reshape(-1, beta.shape[0]) @ beta + intercept


def test_linear_closed_form_oracle():
    rng = Rng(31)
    k = 5
    beta = rng.uniform(k, -2.0, 2.0)
    background = rng.normal(40 * k, 1.0, 0.7).reshape(40, k)
    x = rng.uniform(k, -1.0, 1.0)
    att = shapley_exact(linear_predict(beta, 0.25), x, background)
    expected = beta * (x - background.mean(axis=0))
    assert np.max(np.abs(att.values - expected)) < 1e-10


def test_matches_permutation_reference_on_nonlinear_model():
    rng = Rng(7)
    k = 4
    background = rng.uniform(k * 12, -1.0, 1.0).reshape(12, k)
    x = rng.uniform(k, -1.0, 1.0)

    def bumpy(Z):
        Z = Z.reshape(-1, k)
        return np.tanh(Z @ np.array([0.9, -1.3, 0.4, 2.0])) + 0.5 * Z[:, 0] * Z[:, 2]

    att = shapley_exact(bumpy, x, background)
    ref = reference_shapley(bumpy, x, background)
    assert np.max(np.abs(att.values - ref)) < 1e-9


def test_efficiency_base_plus_sum_equals_prediction():
    rng = Rng(19)
    k = 6
    background = rng.normal(25 * k, 0.0, 1.0).reshape(25, k)
    xs = rng.uniform(5 * k, -2.0, 2.0).reshape(5, k)

    def net(Z):
        Z = Z.reshape(-1, k)
        h = np.maximum(Z @ rngW, 0.0)
        return h @ rngV

    rngW = Rng(3).uniform(k * 8, -0.7, 0.7).reshape(k, 8)
    rngV = Rng(4).uniform(8, -0.7, 0.7)
    for x in xs:
        att = shapley_exact(net, x, background)
        gap = att.base_value + att.values.sum() - att.prediction
        assert abs(gap) < 1e-9


def test_dummy_feature_gets_exactly_zero():
    rng = Rng(5)
    background = rng.uniform(30 * 3, -1.0, 1.0).reshape(30, 3)
    x = np.array([0.4, -0.9, 1.7])

    def ignores_middle(Z):
        Z = Z.reshape(-1, 3)
        return np.sin(Z[:, 0]) + Z[:, 2] ** 2

    att = shapley_exact(ignores_middle, x, background)
    assert att.values[1] == 0.0


def test_symmetry_for_duplicate_columns():
    rng = Rng(8)
    base_cols = rng.uniform(20 * 2, -1.0, 1.0).reshape(20, 2)
    background = np.column_stack([base_cols[:, 0], base_cols[:, 0], base_cols[:, 1]])
    x = np.array([0.6, 0.6, -0.2])
    predict = linear_predict(np.array([1.0, 1.0, 0.5]), 0.0)
    att = shapley_exact(predict, x, background)
    assert abs(att.values[0] - att.values[1]) < 1e-12


def test_linearity_in_the_model():
    rng = Rng(13)
    k = 4
    background = rng.uniform(15 * k, -1.0, 1.0).reshape(15, k)
    x = rng.uniform(k, -1.0, 1.0)
    f = linear_predict(np.array([1.0, -0.5, 0.0, 2.0]), 0.1)
    g = lambda Z: np.cos(Z.reshape(-1, k) @ np.array([0.3, 0.8, -1.1, 0.2]))
    combo = lambda Z: 2.0 * f(Z) - 3.0 * g(Z)
    att_f = shapley_exact(f, x, background).values
    att_g = shapley_exact(g, x, background).values
    att_c = shapley_exact(combo, x, background).values
    assert np.max(np.abs(att_c - (2.0 * att_f - 3.0 * att_g))) < 1e-10


def test_single_player_game():
    background = np.array([[1.0], [2.0], [3.0]])
    x = np.array([5.0])
    predict = lambda Z: Z.reshape(-1) * 2.0
    att = shapley_exact(predict, x, background)
    assert abs(att.values[0] - (10.0 - 4.0)) < 1e-12
    assert abs(att.base_value - 4.0) < 1e-12


def test_constant_model_all_zero():
    background = np.ones((10, 4))
    x = np.zeros(4)
    att = shapley_exact(lambda Z: np.full(Z.reshape(-1, 4).shape[0], 3.3), x, background)
    assert np.all(att.values == 0.0)
    assert att.base_value == 3.3


def test_windowed_input_aggregates_over_steps():
    # model sums channel 0 over every step, so that channel owns the
    # whole attribution and it equals the column-total displacement
    rng = Rng(21)
    W, k, m = 4, 3, 18
    background = rng.uniform(m * W * k, -1.0, 1.0).reshape(m, W, k)
    x = rng.uniform(W * k, -1.0, 1.0).reshape(W, k)
    predict = lambda Z: Z.reshape(-1, W, k)[:, :, 0].sum(axis=1)
    att = shapley_exact(predict, x, background)
    expected0 = x[:, 0].sum() - background[:, :, 0].sum(axis=1).mean()
    assert abs(att.values[0] - expected0) < 1e-10
    assert att.values[1] == 0.0 and att.values[2] == 0.0
    gap = att.base_value + att.values.sum() - att.prediction
    assert abs(gap) < 1e-9


def test_guard_refuses_more_than_twelve_players():
    x = np.zeros(13)
    background = np.zeros((4, 13))
    with pytest.raises(ConfigError, match="subsample"):
        shapley_exact(lambda Z: Z.reshape(-1, 13).sum(axis=1), x, background)


def test_empty_background_refused():
    with pytest.raises(EmptyDatasetError):
        shapley_exact(lambda Z: Z.sum(axis=-1), np.zeros(3), np.zeros((0, 3)))


def test_shape_mismatch_refused():
    with pytest.raises(ShapeError):
        shapley_exact(lambda Z: Z.sum(axis=-1), np.zeros(3), np.zeros((5, 4)))


def test_background_sample_is_seeded_subset():
    X = np.arange(200.0).reshape(50, 4)
    a = background_sample(X, size=10, seed=3)
    b = background_sample(X, size=10, seed=3)
    c = background_sample(X, size=10, seed=4)
    assert np.array_equal(a, b)
    assert not np.array_equal(a, c)
    assert a.shape == (10, 4)
    rows = {tuple(r) for r in a}
    assert len(rows) == 10 and rows <= {tuple(r) for r in X}
    small = background_sample(X[:6], size=10, seed=0)
    assert small.shape == (6, 4)


# ---------------------------------------------------------------------------
# importance summaries


def fake_attribution(values, names, sid=0):
    values = np.asarray(values, dtype=np.float64)
    return Attribution(
        sample_id=sid,
        feature_names=list(names),
        values=values,
        base_value=0.0,
        prediction=float(values.sum()),
    )


def test_importance_of_single_attribution_is_identity():
    att = fake_attribution([0.04, 0.03, -0.05], ["a", "b", "c"])
    rep = importance([att])
    assert np.allclose(rep.mean_abs, [0.04, 0.03, 0.05])
    assert rep.ranking == ["c", "a", "b"]


def test_importance_averages_magnitudes():
    names = ["x", "y"]
    atts = [
        fake_attribution([0.4, -0.3], names, 0),
        fake_attribution([-0.4, 0.3], names, 1),
    ]
    rep = importance(atts)
    assert np.allclose(rep.mean_abs, [0.4, 0.3])
    assert rep.ranking == ["x", "y"]


def test_importance_all_zero_ranks_alphabetically():
    names = ["c", "a", "b"]
    rep = importance([fake_attribution([0.0, 0.0, 0.0], names)])
    assert rep.ranking == ["a", "b", "c"]


def test_importance_requires_at_least_one():
    with pytest.raises(EmptyDatasetError):
        importance([])


def test_importance_csv_round_trip(tmp_path):
    rep = ImportanceReport(
        feature_names=["TDS", "HUM", "Light"],
        mean_abs=np.array([0.123456789012345, 0.1, 0.0]),
        ranking=["TDS", "HUM", "Light"],
    )
    path = tmp_path / "importance.csv"
    write_importance_csv(rep, path, manifest_hash="abc123")
    back = read_importance_csv(path)
    assert back.ranking == rep.ranking
    assert np.array_equal(back.mean_abs, rep.mean_abs)
    first = path.read_text().splitlines()[0]
    assert first == "# manifest_hash: abc123"


def test_attributions_csv_layout(tmp_path):
    atts = [
        fake_attribution([0.5, -0.25], ["a", "b"], sid=3),
        fake_attribution([1.5, 0.75], ["a", "b"], sid=4),
    ]
    path = tmp_path / "attributions.csv"
    write_attributions_csv(atts, path)
    lines = path.read_text().splitlines()
    assert lines[0] == "sample,a,b,base,prediction"
    assert lines[1].startswith("3,0.5,-0.25,")
    assert len(lines) == 3


# ---------------------------------------------------------------------------
# end to end on synthetic data: the generator's dominant drivers surface


def test_dominant_channels_rank_in_top_three():
    cfg = SimConfig(days=4, seed=3)
    frames, _, _ = generate(cfg)
    dm = design_matrix(frames, include_temporal=False)
    train, test = split(dm, 0.2, mode="shuffled", seed=0)
    scaler = fit_scaler(train.X, train.feature_names)
    params, _ = train_mlp(
        apply_scaler(scaler, train.X),
        train.y,
        (32, 16),
        TrainConfig(epochs=20, batch_size=64, lr=0.003, seed=1),
    )

    def predict(Z):
        return mlp_predict(params, apply_scaler(scaler, Z.reshape(-1, 6)))

    background = background_sample(train.X, size=80, seed=5)
    picks = np.linspace(0, test.X.shape[0] - 1, 25).astype(int)
    atts = [
        shapley_exact(predict, test.X[i], background, feature_names=dm.feature_names, sample_id=int(i))
        for i in picks
    ]
    rep = importance(atts)
    assert {"TDS", "HUM"} <= set(rep.ranking[:3])
