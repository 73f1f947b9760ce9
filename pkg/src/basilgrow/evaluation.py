"""Accuracy metrics, 95% bands, and the model comparison table.

The comparison renders nine rows per model: Parameters, MSE, MAE, R2,
Execution Time, CPU Usage, RAM Usage, Disk Read, Disk Write, with
columns in Linear Regression / LSTM / DNN order.  Metric rows are pure
functions of the data and land in ``report.json``, which is therefore
byte-stable across reruns of the same pipeline; resource rows are
measurements and live in ``report_resources.json``.  The text table
shows both.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ConfigError, EmptyDatasetError, ShapeError
from .profiling import ResourceReport

KIND_ORDER = ("lr", "lstm", "dnn")
COLUMN_LABELS = {"lr": "Linear Regression", "lstm": "LSTM", "dnn": "DNN"}
METRIC_ROWS = ["Parameters", "MSE", "MAE", "R2"]
RESOURCE_ROWS = ["Execution Time", "CPU Usage", "RAM Usage", "Disk Read", "Disk Write"]
ROW_LABELS = METRIC_ROWS + RESOURCE_ROWS

Z95 = 1.96


def metrics(actual, predicted) -> tuple[float, float, float | None]:
    """(mse, mae, r2); r2 is None when the actuals are constant."""
    a = np.asarray(actual, dtype=np.float64).reshape(-1)
    p = np.asarray(predicted, dtype=np.float64).reshape(-1)
    if a.shape != p.shape:
        raise ShapeError(f"actual has {a.shape[0]} values, predicted {p.shape[0]}")
    if a.shape[0] == 0:
        raise ShapeError("cannot score zero predictions")
    err = a - p
    mse = float(np.mean(err**2))
    mae = float(np.mean(np.abs(err)))
    ss_tot = float(np.sum((a - a.mean()) ** 2))
    # exact constancy check: the mean of n identical floats can ring by
    # an ulp, leaving ss_tot tiny but nonzero and r2 absurd
    if ss_tot == 0.0 or a.max() == a.min():
        return mse, mae, None
    return mse, mae, 1.0 - float(np.sum(err**2)) / ss_tot


def interval95(residuals, predictions, method: str = "gaussian"):
    """95% band around each prediction, from held-out residuals.

    ``gaussian`` is prediction ± 1.96 times the residual standard
    deviation; ``quantile`` shifts by the empirical 2.5/97.5 percent
    residual quantiles, anchored so the prediction stays inside even
    for one-sided residuals.
    """
    r = np.asarray(residuals, dtype=np.float64).reshape(-1)
    p = np.asarray(predictions, dtype=np.float64).reshape(-1)
    if r.shape[0] < 10:
        raise ConfigError(f"need at least 10 residuals for a 95% band, got {r.shape[0]}")
    if method == "gaussian":
        half = Z95 * float(np.std(r))
        return p - half, p + half
    if method == "quantile":
        lo, hi = np.quantile(r, [0.025, 0.975])
        return p + min(float(lo), 0.0), p + max(float(hi), 0.0)
    raise ConfigError(f"unknown interval method {method!r} (gaussian or quantile)")


@dataclass
class EvalReport:
    """One model's test-set accuracy with per-sample band, all in cm."""

    mse: float
    mae: float
    r2: float | None
    actual: np.ndarray
    predicted: np.ndarray
    lower95: np.ndarray
    upper95: np.ndarray


def evaluate(actual, predicted, interval_method: str = "gaussian") -> EvalReport:
    a = np.asarray(actual, dtype=np.float64).reshape(-1)
    p = np.asarray(predicted, dtype=np.float64).reshape(-1)
    mse, mae, r2 = metrics(a, p)
    lower, upper = interval95(a - p, p, method=interval_method)
    lower = np.broadcast_to(lower, p.shape).copy()
    upper = np.broadcast_to(upper, p.shape).copy()
    return EvalReport(mse=mse, mae=mae, r2=r2, actual=a, predicted=p, lower95=lower, upper95=upper)


# ---------------------------------------------------------------------------
# side-by-side comparison


@dataclass
class ComparisonTable:
    kinds: list[str]
    cells: dict[str, dict[str, float | int | None]]  # row label -> kind -> value
    notes: dict[str, dict[str, str]]  # display text for None cells
    sampling: dict[str, dict] = field(default_factory=dict)

    def _display(self, label: str, kind: str) -> str:
        value = self.cells[label][kind]
        if value is None:
            return self.notes[label][kind]
        if label == "Parameters":
            return str(int(value))
        if label in ("MSE", "MAE", "R2"):
            return f"{value:.6g}"
        if label == "Execution Time":
            return f"{value:.3f} seconds"
        if label == "CPU Usage":
            return f"{value:.1f}%"
        return f"{value:.2f} MB"

    def render_text(self) -> str:
        header = ["Category", *(COLUMN_LABELS[k] for k in self.kinds)]
        body = [
            [label, *(self._display(label, k) for k in self.kinds)] for label in ROW_LABELS
        ]
        widths = [max(len(row[i]) for row in [header, *body]) for i in range(len(header))]
        lines = [
            "  ".join(cell.ljust(w) for cell, w in zip(row, widths)).rstrip()
            for row in [header, *body]
        ]
        return "\n".join(lines) + "\n"


def compare(
    evals: dict[str, EvalReport],
    resources: dict[str, ResourceReport] | None = None,
    params: dict[str, int] | None = None,
) -> ComparisonTable:
    """Assemble the nine-row table for the models present in ``evals``."""
    resources = resources or {}
    params = params or {}
    if not evals:
        raise EmptyDatasetError("no models to compare")
    for kind in evals:
        if kind not in KIND_ORDER:
            raise ConfigError(f"unknown model kind {kind!r}; expected one of {KIND_ORDER}")
        if kind not in params:
            raise ConfigError(f"missing parameter count for {kind!r}")
    kinds = [k for k in KIND_ORDER if k in evals]

    cells: dict[str, dict] = {label: {} for label in ROW_LABELS}
    notes: dict[str, dict] = {label: {} for label in ROW_LABELS}
    sampling: dict[str, dict] = {}
    resource_fields = {
        "Execution Time": "wall_seconds",
        "CPU Usage": "cpu_percent_avg",
        "RAM Usage": "peak_ram_mb",
        "Disk Read": "disk_read_mb",
        "Disk Write": "disk_write_mb",
    }
    for kind in kinds:
        rep = evals[kind]
        cells["Parameters"][kind] = int(params[kind])
        cells["MSE"][kind] = rep.mse
        cells["MAE"][kind] = rep.mae
        if rep.r2 is None:
            cells["R2"][kind] = None
            notes["R2"][kind] = "undefined (constant actuals)"
        else:
            cells["R2"][kind] = rep.r2

        res = resources.get(kind)
        for label, attr in resource_fields.items():
            if res is None:
                cells[label][kind] = None
                notes[label][kind] = "unavailable (not profiled)"
                continue
            value = getattr(res, attr)
            if value is None:
                reason = res.unavailable.get(attr, "no measurement")
                cells[label][kind] = None
                notes[label][kind] = f"unavailable ({reason})"
            else:
                cells[label][kind] = float(value)
        if res is not None:
            sampling[kind] = {
                "sample_rate_hz": res.sample_rate_hz,
                "n_samples": res.n_samples,
                "cpu_percent_peak": res.cpu_percent_peak,
                "failed": res.failed,
            }
    return ComparisonTable(kinds=kinds, cells=cells, notes=notes, sampling=sampling)


# ---------------------------------------------------------------------------
# artifacts


def _rows_doc(table: ComparisonTable, labels: list[str]) -> dict:
    rows: dict[str, dict] = {}
    note_rows: dict[str, dict] = {}
    for label in labels:
        rows[label] = {COLUMN_LABELS[k]: table.cells[label][k] for k in table.kinds}
        flagged = {
            COLUMN_LABELS[k]: table.notes[label][k]
            for k in table.kinds
            if table.cells[label][k] is None
        }
        if flagged:
            note_rows[label] = flagged
    return {"rows": rows, "notes": note_rows}


def _dump(doc: dict, path: str | Path) -> None:
    Path(path).write_text(json.dumps(doc, indent=1, sort_keys=True) + "\n", encoding="utf-8")


def write_report_json(
    table: ComparisonTable, path: str | Path, manifest_hash: str | None = None
) -> None:
    """Deterministic metric rows only; safe to diff across reruns."""
    doc = {
        "format": "comparison-metrics/1",
        "manifest_hash": manifest_hash,
        "columns": [COLUMN_LABELS[k] for k in table.kinds],
        **_rows_doc(table, METRIC_ROWS),
    }
    _dump(doc, path)


def write_resources_json(
    table: ComparisonTable, path: str | Path, manifest_hash: str | None = None
) -> None:
    """Measured rows; expected to vary run to run."""
    doc = {
        "format": "comparison-resources/1",
        "manifest_hash": manifest_hash,
        "columns": [COLUMN_LABELS[k] for k in table.kinds],
        **_rows_doc(table, RESOURCE_ROWS),
        "sampling": {COLUMN_LABELS[k]: v for k, v in table.sampling.items()},
    }
    _dump(doc, path)


def write_report_text(
    table: ComparisonTable, path: str | Path, manifest_hash: str | None = None
) -> None:
    head = f"# manifest_hash: {manifest_hash}\n" if manifest_hash else ""
    Path(path).write_text(head + table.render_text(), encoding="utf-8")


def write_predictions_csv(
    report: EvalReport, path: str | Path, manifest_hash: str | None = None
) -> None:
    """Per-sample chart data: index, actual, predicted, band edges."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        if manifest_hash:
            fh.write(f"# manifest_hash: {manifest_hash}\n")
        writer = csv.writer(fh)
        writer.writerow(["index", "actual_cm", "predicted_cm", "lower95", "upper95"])
        for i in range(report.actual.shape[0]):
            writer.writerow(
                [
                    i,
                    repr(float(report.actual[i])),
                    repr(float(report.predicted[i])),
                    repr(float(report.lower95[i])),
                    repr(float(report.upper95[i])),
                ]
            )
