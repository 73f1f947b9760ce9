"""Chart files: valid SVG, deterministic bytes, embedded provenance."""

import numpy as np

from basilgrow.evaluation import evaluate
from basilgrow.explain import ImportanceReport
from basilgrow.numerics import Rng
from basilgrow.plotting import plot_importance, plot_loss_curve, plot_prediction_band


def toy_report():
    rng = Rng(3)
    actual = rng.uniform(60, 3.2, 4.3)
    predicted = actual + rng.normal(60, 0.0, 0.08)
    return evaluate(actual, predicted)


def toy_importance():
    return ImportanceReport(
        feature_names=["Light", "CO2", "TDS"],
        mean_abs=np.array([0.01, 0.002, 0.08]),
        ranking=["TDS", "Light", "CO2"],
    )


def test_prediction_band_chart(tmp_path):
    path = tmp_path / "band.svg"
    plot_prediction_band(toy_report(), path, manifest_hash="f00d")
    text = path.read_text()
    assert text.lstrip().startswith("<?xml")
    assert "<svg" in text
    assert "f00d" in text


def test_charts_are_byte_deterministic(tmp_path):
    rep = toy_report()
    a, b = tmp_path / "a.svg", tmp_path / "b.svg"
    plot_prediction_band(rep, a)
    plot_prediction_band(rep, b)
    assert a.read_bytes() == b.read_bytes()
    assert b"<dc:date>" not in a.read_bytes()


def test_importance_chart(tmp_path):
    path = tmp_path / "imp.svg"
    plot_importance(toy_importance(), path, manifest_hash="beef")
    text = path.read_text()
    assert "<svg" in text and "beef" in text
    again = tmp_path / "imp2.svg"
    plot_importance(toy_importance(), again)
    assert "<svg" in again.read_text()


def test_loss_curve_chart(tmp_path):
    path = tmp_path / "loss.svg"
    plot_loss_curve([1.0, 0.5, 0.25, 0.2], path)
    assert "<svg" in path.read_text()
    twice = tmp_path / "loss2.svg"
    plot_loss_curve([1.0, 0.5, 0.25, 0.2], twice)
    assert path.read_bytes() == twice.read_bytes()
