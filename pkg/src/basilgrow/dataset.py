"""Sensor-table ingestion and preprocessing.

File format
-----------
Semicolon-delimited CSV with a header row::

    timestamp;Light;CO2;TDS;TEMP;HUM;WaterTemp;P1.2;...;P3.8;GrowthAvg

``timestamp`` is ``YYYY-MM-DD HH:MM:SS``.  The six sensor channels are
required; per-plant height columns (``P<rack>.<slot>``) are optional, and
``GrowthAvg`` may be omitted when heights are present (it is then derived
as their mean).  Numeric cells may use a decimal comma; cleaning rewrites
it to a dot and counts the rewrite.  Cells that are empty, null-like, or
malformed (e.g. ``1.234,5`` mixing separators) drop the whole row, and the
cleaning report records which rows went and why the cell count changed.
"""

from __future__ import annotations

import csv
import io
import math
import re
from dataclasses import dataclass, field
from datetime import datetime
from pathlib import Path

import numpy as np

from .errors import ConfigError, EmptyDatasetError, SchemaError, ShapeError
from .numerics import Rng

SENSOR_CHANNELS = ("Light", "CO2", "TDS", "TEMP", "HUM", "WaterTemp")
TEMPORAL_FEATURES = ("Year", "Month", "Day", "Hour")
TIMESTAMP_COLUMN = "timestamp"
GROWTH_COLUMN = "GrowthAvg"
_POSITION_RE = re.compile(r"^P\d+\.\d+$")
_NULL_TOKENS = {"", "null", "nan", "none", "na"}


@dataclass
class SensorFrame:
    """One minute of telemetry: channel readings plus growth state."""

    timestamp: datetime
    channels: dict[str, float]
    growth_avg: float
    heights: tuple[float, ...] | None = None


@dataclass
class CleaningReport:
    """Outcome of one cleaning pass, serializable as-is to JSON."""

    rows_in: int
    rows_out: int
    dropped_rows: list[int] = field(default_factory=list)
    normalized_cells: int = 0

    def to_dict(self) -> dict:
        return {
            "rows_in": self.rows_in,
            "rows_out": self.rows_out,
            "dropped_rows": list(self.dropped_rows),
            "normalized_cells": self.normalized_cells,
        }


@dataclass
class ScalerStats:
    """Per-column location/scale fitted on training rows only."""

    feature_names: list[str]
    mean: np.ndarray
    std: np.ndarray  # population std; 0.0 marks a constant column


@dataclass
class DesignMatrix:
    X: np.ndarray  # (n, k) float64
    y: np.ndarray  # (n, 1) float64
    feature_names: list[str]


@dataclass
class SequenceSet:
    """Sliding windows over a design matrix, targets aligned to the final step."""

    windows: np.ndarray  # (n_seq, width, k)
    targets: np.ndarray  # (n_seq, 1)
    feature_names: list[str]


# --------------------------------------------------------------------------
# parsing and cleaning


def _clean_cell(raw: str) -> tuple[float | None, bool]:
    """Parse one numeric cell.

    Returns ``(value, comma_normalized)``; ``value`` is None for null-like
    or malformed content (mixed separators, several commas, non-numeric).
    """
    s = raw.strip()
    if s.lower() in _NULL_TOKENS:
        return None, False
    normalized = False
    if "," in s:
        if "." in s or s.count(",") > 1:
            return None, False  # mixed or repeated separators
        s = s.replace(",", ".")
        normalized = True
    try:
        return float(s), normalized
    except ValueError:
        return None, False


def read_frames(source: str | Path | bytes) -> tuple[list[SensorFrame], CleaningReport, list[str]]:
    """Parse and clean a sensor CSV.

    ``source`` is a path or raw bytes.  Returns the surviving frames in
    file order, the cleaning report, and the position column names.
    Dropped-row indices are 0-based over the data rows (header excluded);
    ``normalized_cells`` counts decimal-comma rewrites in surviving rows.
    """
    if isinstance(source, bytes):
        text = source.decode("utf-8")
    else:
        text = Path(source).read_text(encoding="utf-8")
    reader = csv.reader(io.StringIO(text), delimiter=";")
    try:
        header = next(reader)
    except StopIteration:
        raise SchemaError("file is empty: no header row") from None
    header = [h.strip() for h in header]

    positions = [h for h in header if _POSITION_RE.match(h)]
    known = {TIMESTAMP_COLUMN, GROWTH_COLUMN, *SENSOR_CHANNELS, *positions}
    unknown = [h for h in header if h not in known]
    if unknown:
        raise SchemaError(f"unrecognized columns: {unknown}")
    missing = [c for c in (TIMESTAMP_COLUMN, *SENSOR_CHANNELS) if c not in header]
    if missing:
        raise SchemaError(f"missing required columns: {missing}")
    has_growth = GROWTH_COLUMN in header
    if not has_growth and not positions:
        raise SchemaError(
            f"missing required column: {GROWTH_COLUMN} (no height columns to derive it from)"
        )

    col = {name: header.index(name) for name in header}
    frames: list[SensorFrame] = []
    report = CleaningReport(rows_in=0, rows_out=0)
    for i, row in enumerate(reader):
        report.rows_in += 1
        if len(row) != len(header):
            report.dropped_rows.append(i)
            continue
        try:
            ts = datetime.fromisoformat(row[col[TIMESTAMP_COLUMN]].strip())
        except ValueError:
            report.dropped_rows.append(i)
            continue
        values: dict[str, float] = {}
        row_normalized = 0
        bad = False
        for name in (*SENSOR_CHANNELS, *positions, *((GROWTH_COLUMN,) if has_growth else ())):
            value, normalized = _clean_cell(row[col[name]])
            if value is None:
                bad = True
                break
            row_normalized += normalized
            values[name] = value
        if bad:
            report.dropped_rows.append(i)
            continue
        report.normalized_cells += row_normalized
        report.rows_out += 1
        heights = tuple(values[p] for p in positions) if positions else None
        growth = values[GROWTH_COLUMN] if has_growth else float(np.mean(heights))
        frames.append(
            SensorFrame(
                timestamp=ts,
                channels={c: values[c] for c in SENSOR_CHANNELS},
                growth_avg=growth,
                heights=heights,
            )
        )
    if report.rows_out == 0:
        raise EmptyDatasetError(
            f"no rows survived cleaning ({report.rows_in} read, all dropped)"
        )
    return frames, report, positions


def write_frames(path: str | Path, frames: list[SensorFrame], positions: list[str]) -> None:
    """Write frames in the package CSV format (semicolon, dot decimals)."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, delimiter=";")
        writer.writerow([TIMESTAMP_COLUMN, *SENSOR_CHANNELS, *positions, GROWTH_COLUMN])
        for f in frames:
            heights = f.heights if f.heights is not None else ()
            if len(heights) != len(positions):
                raise ShapeError(
                    f"frame has {len(heights)} heights but {len(positions)} position columns"
                )
            writer.writerow(
                [
                    f.timestamp.strftime("%Y-%m-%d %H:%M:%S"),
                    *(repr(f.channels[c]) for c in SENSOR_CHANNELS),
                    *(repr(h) for h in heights),
                    repr(f.growth_avg),
                ]
            )


def temporal_features(ts: datetime) -> tuple[int, int, int, int]:
    """Integer (year, month, day, hour) pulled from one timestamp."""
    return ts.year, ts.month, ts.day, ts.hour


def design_matrix(frames: list[SensorFrame], include_temporal: bool = False) -> DesignMatrix:
    """Stack frames into features/target arrays.

    Features are the six sensor channels; with ``include_temporal`` the
    four integer calendar features are appended after them, in
    ``TEMPORAL_FEATURES`` order.
    """
    if not frames:
        raise EmptyDatasetError("cannot build a design matrix from zero frames")
    names = list(SENSOR_CHANNELS) + (list(TEMPORAL_FEATURES) if include_temporal else [])
    n = len(frames)
    X = np.empty((n, len(names)))
    y = np.empty((n, 1))
    for i, f in enumerate(frames):
        row = [f.channels[c] for c in SENSOR_CHANNELS]
        if include_temporal:
            row.extend(temporal_features(f.timestamp))
        X[i] = row
        y[i, 0] = f.growth_avg
    return DesignMatrix(X=X, y=y, feature_names=names)


# --------------------------------------------------------------------------
# scaling


def fit_scaler(X: np.ndarray, feature_names: list[str]) -> ScalerStats:
    """Column means and population standard deviations.

    Fit this on training rows only; applying it to test rows keeps the
    evaluation leak-free.
    """
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2:
        raise ShapeError(f"expected a 2-D matrix, got shape {X.shape}")
    if X.shape[1] != len(feature_names):
        raise ShapeError(
            f"matrix has {X.shape[1]} columns but {len(feature_names)} feature names"
        )
    return ScalerStats(
        feature_names=list(feature_names),
        mean=X.mean(axis=0),
        std=X.std(axis=0),  # ddof=0: population std
    )


def apply_scaler(stats: ScalerStats, X: np.ndarray) -> np.ndarray:
    """Standardize columns; constant (zero-variance) columns map to zeros."""
    X = np.asarray(X, dtype=np.float64)
    if X.shape[-1] != len(stats.feature_names):
        raise ShapeError(
            f"matrix has {X.shape[-1]} columns but scaler was fitted on "
            f"{len(stats.feature_names)}"
        )
    safe = np.where(stats.std == 0.0, 1.0, stats.std)
    out = (X - stats.mean) / safe
    return np.where(stats.std == 0.0, 0.0, out)


def invert_scaler(stats: ScalerStats, X: np.ndarray) -> np.ndarray:
    """Undo :func:`apply_scaler`; constant columns recover their mean."""
    X = np.asarray(X, dtype=np.float64)
    if X.shape[-1] != len(stats.feature_names):
        raise ShapeError(
            f"matrix has {X.shape[-1]} columns but scaler was fitted on "
            f"{len(stats.feature_names)}"
        )
    return X * stats.std + stats.mean


def scale_target(y: np.ndarray, stats: ScalerStats) -> np.ndarray:
    """Standardize a target column with a single-column scaler."""
    return apply_scaler(stats, y)


# --------------------------------------------------------------------------
# splitting and windowing


def split_indices(
    n: int, test_ratio: float, mode: str = "shuffled", seed: int = 0
) -> tuple[np.ndarray, np.ndarray]:
    """Partition row indices into train/test.

    The test set holds ``ceil(n * test_ratio)`` rows.  ``shuffled`` picks
    membership with a seeded permutation (both halves returned in time
    order); ``chronological`` reserves the final rows for test, which is
    the right choice for sequence models.
    """
    if not 0.0 < test_ratio < 1.0:
        raise ConfigError(f"test_ratio must be in (0, 1), got {test_ratio}")
    n_test = math.ceil(n * test_ratio)
    if n_test >= n:
        raise ConfigError(f"test_ratio {test_ratio} leaves no training rows out of {n}")
    if mode == "shuffled":
        perm = Rng(seed).permutation(n)
        test = np.sort(perm[:n_test])
        train = np.sort(perm[n_test:])
    elif mode == "chronological":
        train = np.arange(n - n_test)
        test = np.arange(n - n_test, n)
    else:
        raise ConfigError(f"unknown split mode {mode!r}; use 'shuffled' or 'chronological'")
    return train, test


def split(
    dm: DesignMatrix, test_ratio: float, mode: str = "shuffled", seed: int = 0
) -> tuple[DesignMatrix, DesignMatrix]:
    """Split a design matrix into train/test copies."""
    train, test = split_indices(dm.X.shape[0], test_ratio, mode, seed)
    return (
        DesignMatrix(dm.X[train].copy(), dm.y[train].copy(), list(dm.feature_names)),
        DesignMatrix(dm.X[test].copy(), dm.y[test].copy(), list(dm.feature_names)),
    )


def make_windows(dm: DesignMatrix, width: int = 1) -> SequenceSet:
    """Contiguous sliding windows with the target aligned to the last step.

    ``n - width + 1`` windows come out of ``n`` rows; ``width=1`` is the
    degenerate case whose flattened windows equal the input matrix.
    """
    n, k = dm.X.shape
    if width < 1:
        raise ConfigError(f"window width must be >= 1, got {width}")
    if width > n:
        raise ConfigError(f"window width {width} exceeds row count {n}")
    n_seq = n - width + 1
    view = np.lib.stride_tricks.sliding_window_view(dm.X, width, axis=0)
    windows = np.ascontiguousarray(view.transpose(0, 2, 1))
    targets = dm.y[width - 1 :].copy()
    assert windows.shape == (n_seq, width, k)
    return SequenceSet(windows=windows, targets=targets, feature_names=list(dm.feature_names))
