"""Pipeline driver: generate, simulate, train, evaluate, explain, report.

Every flag can also come from a ``--config`` file of ``key = value``
lines (``#`` comments allowed); explicit flags win over the file, the
file wins over defaults.  Exit codes: 0 success, 2 bad usage or config,
3 numeric failure (divergence, singular systems, controller violations),
4 artifact mismatch (checkpoints, fingerprints, tampered manifests).
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .dataset import (
    DesignMatrix,
    design_matrix,
    apply_scaler,
    fit_scaler,
    make_windows,
    read_frames,
    split,
    write_frames,
)
from .errors import (
    ArtifactMismatchError,
    BasilgrowError,
    CheckpointError,
    ConfigError,
    EmptyDatasetError,
    SchemaError,
    ShapeError,
    SingularMatrixError,
    TrainingDivergedError,
)
from .evaluation import (
    COLUMN_LABELS,
    EvalReport,
    compare,
    evaluate,
    write_predictions_csv,
    write_report_json,
    write_report_text,
    write_resources_json,
)
from .explain import (
    explain_checkpoint,
    importance,
    read_importance_csv,
    write_attributions_csv,
    write_importance_csv,
)
from .manifest import RunManifest, dataset_fingerprint, save_manifest
from .models.checkpoint import Checkpoint, load_checkpoint, predict_design_matrix, save_checkpoint
from .models.linear import lr_fit, lr_predict
from .models.training import TrainConfig, train_lstm, train_mlp
from .profiling import ResourceReport, profile
from .sensorsim import SimConfig, generate
from .water import WaterSystemState, check_controller, run_to_terminal, with_consistent_actuators

QUICK_EPOCHS = 3
QUICK_ROWS = 500
MODEL_EPOCH_DEFAULTS = {"dnn": 50, "lstm": 300}


def _ints(text: str) -> tuple[int, ...]:
    try:
        return tuple(int(part) for part in str(text).split(","))
    except ValueError as err:
        raise ConfigError(f"expected comma-separated integers, got {text!r}") from err


def _bool(text) -> bool:
    if isinstance(text, bool):
        return text
    lowered = str(text).strip().lower()
    if lowered in ("1", "true", "yes", "on"):
        return True
    if lowered in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"expected a boolean, got {text!r}")


# per-subcommand option spec: dest -> (converter, default, choices)
_SPECS: dict[str, dict[str, tuple]] = {
    "gen": {
        "days": (int, 20, None),
        "rows": (int, None, None),
        "seed": (int, 0, None),
        "positions": (int, 21, None),
        "out": (str, "runs", None),
    },
    "water-sim": {
        "tank": (int, 100, None),
        "containers": (_ints, (0, 0, 0), None),
        "targets": (_ints, (40, 40, 40), None),
        "drain": (_bool, False, None),
        "rate": (int, 5, None),
        "check": (_bool, False, None),
        "levels": (_ints, (0, 25, 50, 75, 100), None),
        "out": (str, "runs", None),
    },
    "train": {
        "model": (str, None, ("lr", "dnn", "lstm")),
        "data": (str, None, None),
        "out": (str, "runs", None),
        "seed": (int, 0, None),
        "epochs": (int, None, None),
        "batch_size": (int, 32, None),
        "learning_rate": (float, 0.001, None),
        "arch": (_ints, None, None),
        "hidden": (_ints, None, None),
        "cell_activation": (str, "tanh", ("tanh", "relu")),
        "dropout": (float, None, None),
        "grad_clip": (float, None, None),
        "window": (int, None, None),
        "split": (str, None, ("shuffled", "chronological")),
        "test_ratio": (float, 0.2, None),
        "profile": (str, "full", ("quick", "full")),
    },
    "eval": {
        "checkpoint": (str, None, None),
        "data": (str, None, None),
        "out": (str, None, None),
        "interval": (str, "gaussian", ("gaussian", "quantile")),
    },
    "explain": {
        "checkpoint": (str, None, None),
        "data": (str, None, None),
        "out": (str, None, None),
        "samples": (int, 20, None),
        "background": (int, 100, None),
        "seed": (int, 0, None),
    },
    "report": {
        "run_dir": (str, None, None),
        "out": (str, None, None),
    },
}

_REQUIRED = {
    "train": ("model", "data"),
    "eval": ("checkpoint", "data"),
    "explain": ("checkpoint", "data"),
    "report": ("run_dir",),
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="basilgrow",
        description="Synthetic hydroponics data, growth models, attribution and reports.",
    )
    parser.add_argument("--version", action="version", version=f"basilgrow {__version__}")
    subs = parser.add_subparsers(dest="command", required=True)
    helps = {
        "gen": "generate a synthetic sensor dataset with its ground truth",
        "water-sim": "trace or exhaustively check the watering controller",
        "train": "fit a model on a dataset and checkpoint it",
        "eval": "score a checkpoint on its held-out split",
        "explain": "attribute predictions to features",
        "report": "combine trained models into the comparison report",
    }
    for command, spec in _SPECS.items():
        sub = subs.add_parser(command, help=helps[command])
        sub.add_argument("--config", default=None, help="key = value file of these flags")
        for dest, (convert, _, _) in spec.items():
            flag = "--" + dest.replace("_", "-")
            if convert is _bool:
                sub.add_argument(flag, action="store_const", const=True, default=None, dest=dest)
            else:
                sub.add_argument(flag, default=None, dest=dest)
    return parser


def _load_config(path: str) -> dict[str, str]:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as err:
        raise ConfigError(f"cannot read config {path}: {err}") from err
    values: dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise ConfigError(f"{path}:{lineno}: expected 'key = value', got {raw!r}")
        values[key.strip().replace("-", "_")] = value.strip().strip("\"'")
    return values


def _resolve(ns: argparse.Namespace, parser: argparse.ArgumentParser) -> argparse.Namespace:
    """Apply config file then defaults; convert and range-check everything."""
    spec = _SPECS[ns.command]
    config = _load_config(ns.config) if ns.config else {}
    unknown = set(config) - set(spec)
    if unknown:
        raise ConfigError(f"config keys not valid for {ns.command}: {sorted(unknown)}")
    for dest, (convert, default, choices) in spec.items():
        value = getattr(ns, dest)
        if value is None and dest in config:
            value = config[dest]
        if value is None:
            value = default
        elif isinstance(value, str):
            value = convert(value)
        if choices and value is not None and value not in choices:
            raise ConfigError(f"--{dest.replace('_', '-')} must be one of {choices}, got {value!r}")
        setattr(ns, dest, value)
    missing = [d for d in _REQUIRED.get(ns.command, ()) if getattr(ns, d) is None]
    if missing:
        flags = ", ".join("--" + d.replace("_", "-") for d in missing)
        parser.error(f"{ns.command} requires {flags} (flag or config)")
    return ns


def _outdir(path: str | Path) -> Path:
    out = Path(path)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _manifest_for(ns, dataset: str, kind: str | None, out: Path, seed: int) -> RunManifest:
    return RunManifest(
        seed=int(seed),
        config_path=ns.config,
        dataset_fingerprint=dataset,
        model_kind=kind,
        output_dir=str(out),
        tool_version=__version__,
    )


def _dump_json(doc: dict, path: Path) -> None:
    path.write_text(json.dumps(doc, indent=1, sort_keys=True) + "\n", encoding="utf-8")


# ---------------------------------------------------------------------------
# subcommands


def cmd_gen(ns) -> int:
    out = _outdir(ns.out)
    config = SimConfig(days=ns.days, seed=ns.seed, rows=ns.rows, n_positions=ns.positions)
    frames, model, positions = generate(config)
    csv_path = out / "dataset.csv"
    write_frames(csv_path, frames, positions)
    manifest = _manifest_for(ns, dataset_fingerprint(csv_path), None, out, ns.seed)
    save_manifest(manifest, out / "manifest.json")
    truth = {
        "format": "truth/1",
        "manifest_hash": manifest.manifest_hash,
        "config": {
            "days": ns.days,
            "rows": ns.rows,
            "seed": ns.seed,
            "n_positions": ns.positions,
        },
        "model": model.to_dict(),
    }
    _dump_json(truth, out / "truth.json")
    print(f"wrote {csv_path} ({len(frames)} rows) and truth.json")
    return 0


def cmd_water(ns) -> int:
    if ns.check:
        result = check_controller(levels=ns.levels, rate=ns.rate)
        print(
            f"states visited: {result.states_visited}, start states: {result.start_states}, "
            f"longest run: {result.longest_run}, "
            f"violations: {'none' if result.ok else len(result.violations)}"
        )
        if not result.ok:
            for line in result.violations[:20]:
                print(f"violation: {line}", file=sys.stderr)
            return 3
        return 0
    if len(ns.containers) != 3 or len(ns.targets) != 3:
        raise ConfigError("--containers and --targets need exactly three values")
    start = with_consistent_actuators(
        WaterSystemState(
            tank=ns.tank,
            containers=tuple(ns.containers),
            targets=tuple(ns.targets),
            drain_requested=ns.drain,
        )
    )
    trace = run_to_terminal(start, rate=ns.rate)
    out = _outdir(ns.out)
    path = out / "water_trace.csv"
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write("tick,tank,container1,container2,container3,pump,valve1,valve2,drain_open\n")
        for tick, st in enumerate(trace):
            fh.write(
                f"{tick},{st.tank},{st.containers[0]},{st.containers[1]},{st.containers[2]},"
                f"{int(st.pump_on)},{int(st.inter_valves[0])},{int(st.inter_valves[1])},"
                f"{int(st.drain_open)}\n"
            )
    print(f"wrote {path} ({len(trace)} states, terminal: {trace[-1].all_at_target()})")
    return 0


def _train_epochs(ns) -> int:
    if ns.epochs is not None:
        return ns.epochs
    if ns.profile == "quick":
        return QUICK_EPOCHS
    return MODEL_EPOCH_DEFAULTS.get(ns.model, 1)


def cmd_train(ns) -> int:
    data = Path(ns.data)
    frames, _, _ = read_frames(data)
    fingerprint = dataset_fingerprint(data)
    row_limit = QUICK_ROWS if ns.profile == "quick" else None
    if row_limit is not None:
        frames = frames[:row_limit]
    include_temporal = ns.model == "lstm"
    dm = design_matrix(frames, include_temporal)
    split_mode = ns.split or ("chronological" if ns.model == "lstm" else "shuffled")
    train_dm, _ = split(dm, ns.test_ratio, split_mode, ns.seed)
    scaler = fit_scaler(train_dm.X, dm.feature_names)
    Xz = apply_scaler(scaler, train_dm.X)

    out = _outdir(Path(ns.out) / ns.model)
    manifest = _manifest_for(ns, fingerprint, ns.model, out, ns.seed)
    window = 1
    train_config = None

    if ns.model == "lr":
        run = profile(lambda: lr_fit(Xz, train_dm.y, dm.feature_names))
        params = run.unwrap()
        residual = lr_predict(params, Xz) - train_dm.y
        curve = [float(np.mean(residual**2))]
    elif ns.model == "dnn":
        hidden = ns.arch or (300, 300, 150)
        train_config = TrainConfig(
            epochs=_train_epochs(ns),
            batch_size=ns.batch_size,
            lr=ns.learning_rate,
            seed=ns.seed,
            dropout=0.0 if ns.dropout is None else ns.dropout,
            grad_clip=ns.grad_clip,
        )
        run = profile(lambda: train_mlp(Xz, train_dm.y, hidden, train_config))
        params, curve = run.unwrap()
    else:
        window = ns.window or 8
        hidden = ns.hidden or (100, 100)
        train_config = TrainConfig(
            epochs=_train_epochs(ns),
            batch_size=ns.batch_size,
            lr=ns.learning_rate,
            seed=ns.seed,
            dropout=0.3 if ns.dropout is None else ns.dropout,
            grad_clip=5.0 if ns.grad_clip is None else ns.grad_clip,
        )
        seq = make_windows(DesignMatrix(Xz, train_dm.y, dm.feature_names), window)
        run = profile(
            lambda: train_lstm(seq.windows, seq.targets, hidden, train_config, ns.cell_activation)
        )
        params, curve = run.unwrap()

    ckpt = Checkpoint(
        kind=ns.model,
        params=params,
        feature_names=dm.feature_names,
        include_temporal=include_temporal,
        window=window,
        scaler=scaler,
        split_mode=split_mode,
        test_ratio=ns.test_ratio,
        split_seed=ns.seed,
        train_config=train_config,
        manifest=manifest.to_dict(),
        row_limit=row_limit,
    )
    save_checkpoint(ckpt, out / "checkpoint.json")
    with open(out / "loss_curve.csv", "w", encoding="utf-8") as fh:
        fh.write(f"# manifest_hash: {manifest.manifest_hash}\n")
        fh.write("epoch,train_mse\n")
        for epoch, loss in enumerate(curve, 1):
            fh.write(f"{epoch},{loss!r}\n")
    _dump_json(
        {
            "format": "resources/1",
            "manifest_hash": manifest.manifest_hash,
            "kind": ns.model,
            "report": run.report.to_dict(),
        },
        out / "resources.json",
    )
    save_manifest(manifest, out / "manifest.json")
    print(
        f"trained {ns.model}: {ckpt.parameter_count} parameters, "
        f"final train mse {curve[-1]:.6g}, wall {run.report.wall_seconds:.2f}s -> {out}"
    )
    return 0


def _load_verified_checkpoint(ns) -> tuple[Checkpoint, str]:
    ckpt = load_checkpoint(ns.checkpoint)
    fingerprint = dataset_fingerprint(ns.data)
    recorded = ckpt.manifest.get("dataset_fingerprint")
    if recorded and recorded != fingerprint:
        raise ArtifactMismatchError(
            f"dataset fingerprint mismatch: checkpoint was trained on {recorded}, "
            f"--data is {fingerprint}"
        )
    return ckpt, fingerprint


def _rebuild_split(ckpt: Checkpoint, data: str):
    frames, _, _ = read_frames(data)
    if ckpt.row_limit is not None:
        frames = frames[: ckpt.row_limit]
    dm = design_matrix(frames, ckpt.include_temporal)
    return split(dm, ckpt.test_ratio, ckpt.split_mode, ckpt.split_seed)


def cmd_eval(ns) -> int:
    ckpt, fingerprint = _load_verified_checkpoint(ns)
    train_dm, test_dm = _rebuild_split(ckpt, ns.data)
    predicted = predict_design_matrix(ckpt, test_dm).reshape(-1)
    actual = test_dm.y.reshape(-1)
    if ckpt.kind == "lstm":
        actual = actual[ckpt.window - 1 :]
    report = evaluate(actual, predicted, interval_method=ns.interval)

    out = _outdir(ns.out) if ns.out else Path(ns.checkpoint).parent
    manifest = _manifest_for(ns, fingerprint, ckpt.kind, out, ckpt.split_seed)
    _dump_json(
        {
            "format": "eval/1",
            "manifest_hash": manifest.manifest_hash,
            "dataset_fingerprint": fingerprint,
            "kind": ckpt.kind,
            "parameter_count": ckpt.parameter_count,
            "n_test": int(report.actual.shape[0]),
            "interval_method": ns.interval,
            "mse": report.mse,
            "mae": report.mae,
            "r2": report.r2,
        },
        out / "eval.json",
    )
    write_predictions_csv(report, out / "predictions.csv", manifest.manifest_hash)
    from .plotting import plot_prediction_band  # deferred: matplotlib is slow to import

    plot_prediction_band(
        report,
        out / "prediction_band.svg",
        title=f"{COLUMN_LABELS[ckpt.kind]}: actual vs predicted growth",
        manifest_hash=manifest.manifest_hash,
    )
    r2_text = "undefined" if report.r2 is None else f"{report.r2:.4f}"
    print(f"eval {ckpt.kind}: mse {report.mse:.6g}, mae {report.mae:.6g}, r2 {r2_text} -> {out}")
    return 0


def cmd_explain(ns) -> int:
    ckpt, fingerprint = _load_verified_checkpoint(ns)
    train_dm, test_dm = _rebuild_split(ckpt, ns.data)
    n_eval = test_dm.X.shape[0] - (ckpt.window - 1 if ckpt.kind == "lstm" else 0)
    if n_eval < 1:
        raise EmptyDatasetError("test split has no samples to explain")
    count = max(1, min(ns.samples, n_eval))
    ids = np.unique(np.linspace(0, n_eval - 1, count).astype(int))
    attributions = explain_checkpoint(
        ckpt, train_dm, test_dm, ids, background_size=ns.background, seed=ns.seed
    )
    summary = importance(attributions)

    out = _outdir(ns.out) if ns.out else Path(ns.checkpoint).parent
    manifest = _manifest_for(ns, fingerprint, ckpt.kind, out, ns.seed)
    write_attributions_csv(attributions, out / "attributions.csv", manifest.manifest_hash)
    write_importance_csv(summary, out / "importance.csv", manifest.manifest_hash)
    from .plotting import plot_importance

    plot_importance(
        summary,
        out / "importance.svg",
        title=f"{COLUMN_LABELS[ckpt.kind]}: mean |attribution| per feature",
        manifest_hash=manifest.manifest_hash,
    )
    top = ", ".join(summary.ranking[:3])
    print(f"explained {len(attributions)} samples for {ckpt.kind}; top features: {top} -> {out}")
    return 0


def _read_predictions_csv(path: Path) -> dict[str, np.ndarray]:
    rows = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if line.startswith("#") or line.startswith("index,"):
                continue
            rows.append([float(cell) for cell in line.strip().split(",")])
    data = np.asarray(rows, dtype=np.float64)
    return {
        "actual": data[:, 1],
        "predicted": data[:, 2],
        "lower95": data[:, 3],
        "upper95": data[:, 4],
    }


def cmd_report(ns) -> int:
    root = Path(ns.run_dir)
    out = _outdir(ns.out) if ns.out else root
    kinds = [k for k in ("lr", "lstm", "dnn") if (root / k / "eval.json").exists()]
    if not kinds:
        raise EmptyDatasetError(f"no evaluated models under {root} (run train and eval first)")

    evals: dict[str, EvalReport] = {}
    resources: dict[str, ResourceReport] = {}
    params: dict[str, int] = {}
    fingerprints: dict[str, str] = {}
    for kind in kinds:
        doc = json.loads((root / kind / "eval.json").read_text(encoding="utf-8"))
        fingerprints[kind] = doc["dataset_fingerprint"]
        params[kind] = int(doc["parameter_count"])
        series = _read_predictions_csv(root / kind / "predictions.csv")
        evals[kind] = EvalReport(
            mse=doc["mse"], mae=doc["mae"], r2=doc["r2"],
            actual=series["actual"], predicted=series["predicted"],
            lower95=series["lower95"], upper95=series["upper95"],
        )
        res_path = root / kind / "resources.json"
        if res_path.exists():
            res_doc = json.loads(res_path.read_text(encoding="utf-8"))
            resources[kind] = ResourceReport(**res_doc["report"])
    if len(set(fingerprints.values())) > 1:
        detail = ", ".join(f"{k}={v[:18]}..." for k, v in fingerprints.items())
        raise ArtifactMismatchError(f"models were built from different dataset fingerprints: {detail}")

    table = compare(evals, resources, params)
    fingerprint = next(iter(fingerprints.values()))
    manifest = _manifest_for(ns, fingerprint, None, out, 0)
    save_manifest(manifest, out / "report_manifest.json")
    write_report_json(table, out / "report.json", manifest.manifest_hash)
    write_resources_json(table, out / "report_resources.json", manifest.manifest_hash)
    write_report_text(table, out / "report.txt", manifest.manifest_hash)

    from .plotting import plot_importance, plot_prediction_band

    for kind in kinds:
        plot_prediction_band(
            evals[kind],
            out / f"{kind}_prediction_band.svg",
            title=f"{COLUMN_LABELS[kind]}: actual vs predicted growth",
            manifest_hash=manifest.manifest_hash,
        )
        importance_csv = root / kind / "importance.csv"
        if importance_csv.exists():
            plot_importance(
                read_importance_csv(importance_csv),
                out / f"{kind}_importance.svg",
                title=f"{COLUMN_LABELS[kind]}: mean |attribution| per feature",
                manifest_hash=manifest.manifest_hash,
            )
    print(f"report over {', '.join(kinds)} -> {out / 'report.txt'}")
    print(table.render_text(), end="")
    return 0


_COMMANDS = {
    "gen": cmd_gen,
    "water-sim": cmd_water,
    "train": cmd_train,
    "eval": cmd_eval,
    "explain": cmd_explain,
    "report": cmd_report,
}


def main(argv=None) -> int:
    parser = build_parser()
    ns = parser.parse_args(argv)
    try:
        ns = _resolve(ns, parser)
        return _COMMANDS[ns.command](ns)
    except (TrainingDivergedError, SingularMatrixError) as err:
        print(f"numeric failure: {err}", file=sys.stderr)
        return 3
    except (CheckpointError, ArtifactMismatchError) as err:
        print(f"artifact mismatch: {err}", file=sys.stderr)
        return 4
    except (ConfigError, SchemaError, EmptyDatasetError, ShapeError) as err:
        print(f"error: {err}", file=sys.stderr)
        return 2
    except BasilgrowError as err:  # any stragglers count as usage problems
        print(f"error: {err}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
