"""SVG chart rendering for reports.

All charts write headless SVG with a fixed hash salt and no embedded
date, so rerunning a pipeline reproduces the files byte for byte.  The
producing run's manifest hash rides along in the SVG metadata.
"""

from __future__ import annotations

from pathlib import Path
from typing import Sequence

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .evaluation import EvalReport
from .explain import ImportanceReport

_RC = {"svg.hashsalt": "basilgrow", "figure.figsize": (8.0, 4.5), "figure.dpi": 100}


def _save(fig, path: str | Path, title: str, manifest_hash: str | None) -> None:
    meta = {"Date": None, "Title": title}
    if manifest_hash:
        meta["Description"] = f"manifest_hash: {manifest_hash}"
    fig.savefig(path, format="svg", metadata=meta)
    plt.close(fig)


def plot_prediction_band(
    report: EvalReport,
    path: str | Path,
    title: str = "Actual vs predicted growth",
    manifest_hash: str | None = None,
) -> None:
    """Line chart of actual and predicted values with the 95% band."""
    with plt.rc_context(_RC):
        fig, ax = plt.subplots()
        x = np.arange(report.actual.shape[0])
        ax.fill_between(
            x, report.lower95, report.upper95, alpha=0.25, color="tab:blue",
            label="95% interval", linewidth=0,
        )
        ax.plot(x, report.actual, color="tab:green", linewidth=1.0, label="actual")
        ax.plot(x, report.predicted, color="tab:blue", linewidth=1.0, label="predicted")
        ax.set_xlabel("test sample")
        ax.set_ylabel("growth (cm)")
        ax.set_title(title)
        ax.legend(loc="best")
        fig.tight_layout()
        _save(fig, path, title, manifest_hash)


def plot_importance(
    report: ImportanceReport,
    path: str | Path,
    title: str = "Mean |attribution| per feature",
    manifest_hash: str | None = None,
) -> None:
    """Horizontal bars in ranking order, most influential on top."""
    by_name = dict(zip(report.feature_names, report.mean_abs))
    names = list(report.ranking)
    values = [float(by_name[n]) for n in names]
    with plt.rc_context(_RC):
        fig, ax = plt.subplots()
        pos = np.arange(len(names))[::-1]
        ax.barh(pos, values, color="tab:blue")
        ax.set_yticks(pos, labels=names)
        ax.set_xlabel("mean |attribution| (cm)")
        ax.set_title(title)
        fig.tight_layout()
        _save(fig, path, title, manifest_hash)


def plot_loss_curve(
    losses: Sequence[float],
    path: str | Path,
    title: str = "Training loss",
    manifest_hash: str | None = None,
) -> None:
    with plt.rc_context(_RC):
        fig, ax = plt.subplots()
        ax.plot(np.arange(1, len(losses) + 1), np.asarray(losses, dtype=np.float64))
        ax.set_xlabel("epoch")
        ax.set_ylabel("MSE loss")
        ax.set_title(title)
        fig.tight_layout()
        _save(fig, path, title, manifest_hash)
