"""Exact interventional feature attribution.

For a sample ``x`` and a background set ``B``, the value of a feature
coalition ``S`` is the mean prediction over background rows with the
coalition's columns overwritten by ``x``.  Attributions are the exact
Shapley weighting over all ``2^k`` coalitions, so the usual axioms
(efficiency, symmetry, dummy, linearity) hold to float precision and
test oracles need no sampling tolerance.

Inputs may be flat rows ``(k,)`` or step windows ``(width, k)``; in the
windowed case a coalition swaps whole feature columns across every
step, which attributes each feature's total influence over the window.

Full enumeration caps at 12 features (4096 coalitions); callers with
wider inputs must subsample columns first.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from math import factorial
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from .dataset import DesignMatrix, apply_scaler, make_windows
from .errors import ConfigError, EmptyDatasetError, SchemaError, ShapeError
from .numerics import Rng

MAX_PLAYERS = 12
DEFAULT_BACKGROUND_SIZE = 100

# cap on scalars materialized per coalition batch (about 32 MB of float64)
_BATCH_SCALARS = 4_000_000

PredictFn = Callable[[np.ndarray], np.ndarray]


@dataclass
class Attribution:
    """Per-feature contributions, in the target's units (cm of growth)."""

    sample_id: int
    feature_names: list[str]
    values: np.ndarray  # (k,)
    base_value: float  # mean prediction over the background
    prediction: float  # model output at the sample

    def efficiency_gap(self) -> float:
        return float(self.base_value + self.values.sum() - self.prediction)


@dataclass
class ImportanceReport:
    """Mean absolute attribution per feature across explained samples."""

    feature_names: list[str]  # input column order
    mean_abs: np.ndarray  # aligned to feature_names
    ranking: list[str]  # descending magnitude, ties broken by name


def _coalition_values(
    predict_fn: PredictFn, x: np.ndarray, background: np.ndarray, k: int
) -> np.ndarray:
    """Mean prediction per coalition, indexed by feature bitmask."""
    m = background.shape[0]
    n_sub = 1 << k
    bits = ((np.arange(n_sub)[:, None] >> np.arange(k)[None, :]) & 1).astype(bool)
    per_row = int(np.prod(x.shape))
    chunk = max(1, _BATCH_SCALARS // max(1, m * per_row))
    v = np.empty(n_sub, dtype=np.float64)
    mask_shape = (-1, 1) + (1,) * (x.ndim - 1) + (k,)
    for lo in range(0, n_sub, chunk):
        sel = bits[lo : lo + chunk]
        mask = sel.reshape(mask_shape)
        z = np.where(mask, x, background)  # (c, m, *x.shape)
        flat = z.reshape((-1,) + x.shape)
        out = np.asarray(predict_fn(flat), dtype=np.float64).reshape(sel.shape[0], m)
        v[lo : lo + sel.shape[0]] = out.mean(axis=1)
    return v


def shapley_exact(
    predict_fn: PredictFn,
    x: np.ndarray,
    background: np.ndarray,
    feature_names: Sequence[str] | None = None,
    sample_id: int = 0,
) -> Attribution:
    """Exact interventional attribution of ``predict_fn`` at ``x``.

    ``x`` is one sample, ``(k,)`` or ``(width, k)``; ``background`` stacks
    reference samples of the same shape.  ``predict_fn`` must accept a
    batch ``(n, *x.shape)`` and return ``n`` outputs.
    """
    x = np.asarray(x, dtype=np.float64)
    background = np.asarray(background, dtype=np.float64)
    if background.shape[0] == 0:
        raise EmptyDatasetError("background set is empty")
    if background.shape[1:] != x.shape:
        raise ShapeError(
            f"sample shape {x.shape} does not match background rows {background.shape[1:]}"
        )
    k = x.shape[-1]
    if k > MAX_PLAYERS:
        raise ConfigError(
            f"{k} features would need {1 << k} coalitions; exact enumeration "
            f"stops at {MAX_PLAYERS}; subsample features first"
        )
    if feature_names is None:
        feature_names = [f"f{i}" for i in range(k)]
    elif len(feature_names) != k:
        raise ShapeError(f"{len(feature_names)} names for {k} features")

    v = _coalition_values(predict_fn, x, background, k)
    idx = np.arange(1 << k)
    sizes = np.zeros(1 << k, dtype=np.int64)
    for i in range(k):
        sizes += (idx >> i) & 1
    # w[s] = s! (k-1-s)! / k!, the weight of adding a player to a size-s set
    w = np.array([factorial(s) * factorial(k - 1 - s) / factorial(k) for s in range(k)])

    # pairwise gains keep ignored features at exactly zero: equal v values
    # cancel before any weighting touches them
    phi = np.empty(k, dtype=np.float64)
    for i in range(k):
        without = idx[((idx >> i) & 1) == 0]
        gains = v[without | (1 << i)] - v[without]
        phi[i] = float(np.sum(w[sizes[without]] * gains))

    prediction = float(np.asarray(predict_fn(x[None]), dtype=np.float64).reshape(-1)[0])
    return Attribution(
        sample_id=sample_id,
        feature_names=list(feature_names),
        values=phi,
        base_value=float(v[0]),
        prediction=prediction,
    )


def background_sample(X: np.ndarray, size: int = DEFAULT_BACKGROUND_SIZE, seed: int = 0) -> np.ndarray:
    """Seeded subset of rows to stand in for the data distribution."""
    X = np.asarray(X, dtype=np.float64)
    n = X.shape[0]
    if n == 0:
        raise EmptyDatasetError("cannot sample a background from zero rows")
    take = min(size, n)
    return X[Rng(seed).spawn(977).choice(n, take)].copy()


def importance(attributions: Sequence[Attribution]) -> ImportanceReport:
    """Mean |attribution| per feature, ranked for the summary chart."""
    if not attributions:
        raise EmptyDatasetError("need at least one attribution")
    names = attributions[0].feature_names
    for att in attributions:
        if att.feature_names != names:
            raise SchemaError(
                f"attribution features {att.feature_names} do not match {names}"
            )
    stacked = np.stack([att.values for att in attributions])
    mean_abs = np.abs(stacked).mean(axis=0)
    order = sorted(range(len(names)), key=lambda i: (-mean_abs[i], names[i]))
    return ImportanceReport(
        feature_names=list(names),
        mean_abs=mean_abs,
        ranking=[names[i] for i in order],
    )


def explain_checkpoint(
    ckpt,
    train_dm: DesignMatrix,
    eval_dm: DesignMatrix,
    sample_ids: Sequence[int],
    background_size: int = DEFAULT_BACKGROUND_SIZE,
    seed: int = 0,
) -> list[Attribution]:
    """Attribute a checkpointed model on chosen evaluation samples.

    ``sample_ids`` index evaluation rows; for a windowed model they index
    windows (aligned like :func:`~basilgrow.models.checkpoint.predict_design_matrix`
    outputs) and the background holds training windows.
    """
    from .models.checkpoint import MODEL_KINDS  # local import avoids a cycle
    from .models.linear import lr_predict
    from .models.lstm import lstm_predict
    from .models.mlp import mlp_predict

    if ckpt.kind not in MODEL_KINDS:
        raise ConfigError(f"unknown model kind {ckpt.kind!r}")
    if eval_dm.feature_names != ckpt.feature_names:
        raise SchemaError(
            f"evaluation features {eval_dm.feature_names} do not match "
            f"checkpoint features {ckpt.feature_names}"
        )

    if ckpt.kind == "lstm":
        train_windows = make_windows(train_dm, ckpt.window).windows
        eval_windows = make_windows(eval_dm, ckpt.window).windows
        background = background_sample(train_windows, background_size, seed)
        samples = eval_windows

        def predict(Z: np.ndarray) -> np.ndarray:
            return lstm_predict(ckpt.params, apply_scaler(ckpt.scaler, Z))

    else:
        background = background_sample(train_dm.X, background_size, seed)
        samples = eval_dm.X
        model_fn = lr_predict if ckpt.kind == "lr" else mlp_predict

        def predict(Z: np.ndarray) -> np.ndarray:
            return model_fn(ckpt.params, apply_scaler(ckpt.scaler, Z))

    out = []
    for sid in sample_ids:
        i = int(sid)
        if not 0 <= i < samples.shape[0]:
            raise ConfigError(f"sample id {i} outside 0..{samples.shape[0] - 1}")
        out.append(
            shapley_exact(
                predict, samples[i], background, feature_names=ckpt.feature_names, sample_id=i
            )
        )
    return out


# ---------------------------------------------------------------------------
# delimited outputs


def _open_report(path: str | Path, manifest_hash: str | None):
    fh = open(path, "w", encoding="utf-8", newline="")
    if manifest_hash:
        fh.write(f"# manifest_hash: {manifest_hash}\n")
    return fh


def write_importance_csv(
    report: ImportanceReport, path: str | Path, manifest_hash: str | None = None
) -> None:
    """Two-column summary in ranking order; floats keep full precision."""
    by_name = dict(zip(report.feature_names, report.mean_abs))
    with _open_report(path, manifest_hash) as fh:
        writer = csv.writer(fh)
        writer.writerow(["feature", "mean_abs_shap"])
        for name in report.ranking:
            writer.writerow([name, repr(float(by_name[name]))])


def read_importance_csv(path: str | Path) -> ImportanceReport:
    names, values = [], []
    with open(path, encoding="utf-8", newline="") as fh:
        rows = [r for r in csv.reader(fh) if r and not r[0].startswith("#")]
    if not rows or rows[0] != ["feature", "mean_abs_shap"]:
        raise SchemaError(f"{path} is not an importance report")
    for name, value in rows[1:]:
        names.append(name)
        values.append(float(value))
    return ImportanceReport(
        feature_names=list(names), mean_abs=np.array(values), ranking=list(names)
    )


def write_attributions_csv(
    attributions: Sequence[Attribution], path: str | Path, manifest_hash: str | None = None
) -> None:
    """Wide per-sample table: one column per feature plus base and prediction."""
    if not attributions:
        raise EmptyDatasetError("no attributions to write")
    names = attributions[0].feature_names
    with _open_report(path, manifest_hash) as fh:
        writer = csv.writer(fh)
        writer.writerow(["sample", *names, "base", "prediction"])
        for att in attributions:
            writer.writerow(
                [
                    att.sample_id,
                    *(repr(float(v)) for v in att.values),
                    repr(float(att.base_value)),
                    repr(float(att.prediction)),
                ]
            )
