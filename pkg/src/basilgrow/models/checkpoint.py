"""Versioned model checkpoints.

A checkpoint is a single JSON file carrying everything needed to repeat
a model's predictions on fresh data: the kind tag, weights (base64 of
little-endian float64 buffers, so round trips are bit exact), the
fitted scaler, the split recipe, the training configuration, and the
run manifest.  ``format_version`` gates loading: unknown versions fail
with :class:`CheckpointError` rather than misreading bytes.
"""

from __future__ import annotations

import base64
import json
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from ..dataset import DesignMatrix, ScalerStats, apply_scaler, make_windows
from ..errors import CheckpointError, SchemaError
from .linear import LRParams, lr_parameter_count, lr_predict
from .lstm import LSTMLayer, LSTMParams, lstm_parameter_count, lstm_predict
from .mlp import MLPParams, mlp_parameter_count, mlp_predict
from .training import TrainConfig

FORMAT_VERSION = 1
MODEL_KINDS = ("lr", "dnn", "lstm")


@dataclass
class Checkpoint:
    kind: str
    params: LRParams | MLPParams | LSTMParams
    feature_names: list[str]
    include_temporal: bool
    window: int
    scaler: ScalerStats
    split_mode: str
    test_ratio: float
    split_seed: int
    train_config: TrainConfig | None
    manifest: dict
    row_limit: int | None = None  # dataset truncation applied before the split

    @property
    def parameter_count(self) -> int:
        if self.kind == "lr":
            return lr_parameter_count(len(self.params.coefficients))
        if self.kind == "dnn":
            return mlp_parameter_count(self.params)
        return lstm_parameter_count(self.params)


def _encode(a: np.ndarray) -> dict:
    a = np.ascontiguousarray(a, dtype="<f8")
    return {"shape": list(a.shape), "data": base64.b64encode(a.tobytes()).decode("ascii")}


def _decode(d: dict) -> np.ndarray:
    raw = base64.b64decode(d["data"])
    return np.frombuffer(raw, dtype="<f8").reshape(d["shape"]).copy()


def _params_payload(kind: str, params) -> dict:
    if kind == "lr":
        return {
            "coefficients": _encode(params.coefficients),
            "intercept": params.intercept,
        }
    if kind == "dnn":
        return {
            "hidden_activation": params.hidden_activation,
            "weights": [_encode(w) for w in params.weights],
            "biases": [_encode(b) for b in params.biases],
        }
    return {
        "cell_activation": params.cell_activation,
        "layers": [
            {"W": _encode(l.W), "U": _encode(l.U), "b": _encode(l.b)} for l in params.layers
        ],
        "dense_w": _encode(params.dense_w),
        "dense_b": _encode(params.dense_b),
    }


def _params_restore(kind: str, payload: dict, feature_names: list[str]):
    if kind == "lr":
        return LRParams(
            coefficients=_decode(payload["coefficients"]),
            intercept=float(payload["intercept"]),
            feature_names=list(feature_names),
        )
    if kind == "dnn":
        return MLPParams(
            weights=[_decode(w) for w in payload["weights"]],
            biases=[_decode(b) for b in payload["biases"]],
            hidden_activation=payload["hidden_activation"],
        )
    return LSTMParams(
        layers=[
            LSTMLayer(W=_decode(l["W"]), U=_decode(l["U"]), b=_decode(l["b"]))
            for l in payload["layers"]
        ],
        dense_w=_decode(payload["dense_w"]),
        dense_b=_decode(payload["dense_b"]),
        cell_activation=payload["cell_activation"],
    )


def save_checkpoint(ckpt: Checkpoint, path: str | Path) -> None:
    if ckpt.kind not in MODEL_KINDS:
        raise CheckpointError(f"unknown model kind {ckpt.kind!r}")
    doc = {
        "format_version": FORMAT_VERSION,
        "kind": ckpt.kind,
        "feature_names": list(ckpt.feature_names),
        "include_temporal": ckpt.include_temporal,
        "window": ckpt.window,
        "scaler": {
            "feature_names": list(ckpt.scaler.feature_names),
            "mean": _encode(ckpt.scaler.mean),
            "std": _encode(ckpt.scaler.std),
        },
        "split": {
            "mode": ckpt.split_mode,
            "test_ratio": ckpt.test_ratio,
            "seed": ckpt.split_seed,
            "row_limit": ckpt.row_limit,
        },
        "train_config": asdict(ckpt.train_config) if ckpt.train_config else None,
        "params": _params_payload(ckpt.kind, ckpt.params),
        "parameter_count": ckpt.parameter_count,
        "manifest": ckpt.manifest,
    }
    Path(path).write_text(json.dumps(doc, indent=1, sort_keys=True) + "\n", encoding="utf-8")


def load_checkpoint(path: str | Path) -> Checkpoint:
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as err:
        raise CheckpointError(f"cannot read checkpoint {path}: {err}") from err
    version = doc.get("format_version")
    if version != FORMAT_VERSION:
        raise CheckpointError(
            f"checkpoint format version {version!r} not supported (expected {FORMAT_VERSION})"
        )
    kind = doc.get("kind")
    if kind not in MODEL_KINDS:
        raise CheckpointError(f"unknown model kind {kind!r}")
    try:
        params = _params_restore(kind, doc["params"], doc["feature_names"])
        scaler = ScalerStats(
            feature_names=list(doc["scaler"]["feature_names"]),
            mean=_decode(doc["scaler"]["mean"]),
            std=_decode(doc["scaler"]["std"]),
        )
        ckpt = Checkpoint(
            kind=kind,
            params=params,
            feature_names=list(doc["feature_names"]),
            include_temporal=bool(doc["include_temporal"]),
            window=int(doc["window"]),
            scaler=scaler,
            split_mode=doc["split"]["mode"],
            test_ratio=float(doc["split"]["test_ratio"]),
            split_seed=int(doc["split"]["seed"]),
            train_config=TrainConfig(**doc["train_config"]) if doc["train_config"] else None,
            manifest=doc.get("manifest", {}),
            row_limit=doc["split"]["row_limit"],
        )
    except (KeyError, TypeError, ValueError) as err:
        raise CheckpointError(f"checkpoint {path} is missing or corrupt: {err}") from err
    if ckpt.parameter_count != doc["parameter_count"]:
        raise CheckpointError(
            f"stored parameter count {doc['parameter_count']} does not match "
            f"restored weights ({ckpt.parameter_count})"
        )
    return ckpt


def predict_design_matrix(ckpt: Checkpoint, dm: DesignMatrix) -> np.ndarray:
    """Scaled, windowed predictions on a raw design matrix, in cm.

    For windowed models the output has ``n - window + 1`` rows, aligned
    to each window's final step (match actuals with ``y[window-1:]``).
    """
    if dm.feature_names != ckpt.feature_names:
        raise SchemaError(
            f"design matrix features {dm.feature_names} do not match "
            f"checkpoint features {ckpt.feature_names}"
        )
    Xz = apply_scaler(ckpt.scaler, dm.X)
    if ckpt.kind == "lr":
        return lr_predict(ckpt.params, Xz)
    if ckpt.kind == "dnn":
        return mlp_predict(ckpt.params, Xz)
    seq = make_windows(DesignMatrix(Xz, dm.y, list(dm.feature_names)), ckpt.window)
    return lstm_predict(ckpt.params, seq.windows)
