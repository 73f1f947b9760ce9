"""Run provenance records.

Every pipeline command writes a manifest describing the run: seed,
config file, dataset content fingerprint, model kind, output directory,
tool version.  Artifacts name the manifest's 16-hex-digit hash so a
report can refuse to combine outputs built from different datasets.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass
from pathlib import Path

from .errors import ArtifactMismatchError

_FIELDS = (
    "seed",
    "config_path",
    "dataset_fingerprint",
    "model_kind",
    "output_dir",
    "tool_version",
)


@dataclass
class RunManifest:
    seed: int
    config_path: str | None
    dataset_fingerprint: str
    model_kind: str | None
    output_dir: str
    tool_version: str

    @property
    def manifest_hash(self) -> str:
        canon = json.dumps(asdict(self), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canon.encode("utf-8")).hexdigest()[:16]

    def to_dict(self) -> dict:
        doc = asdict(self)
        doc["manifest_hash"] = self.manifest_hash
        return doc


def dataset_fingerprint(path: str | Path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(1 << 20), b""):
            digest.update(block)
    return f"sha256:{digest.hexdigest()}"


def save_manifest(manifest: RunManifest, path: str | Path) -> None:
    Path(path).write_text(
        json.dumps(manifest.to_dict(), indent=1, sort_keys=True) + "\n", encoding="utf-8"
    )


def load_manifest(path: str | Path) -> RunManifest:
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
        manifest = RunManifest(**{k: doc[k] for k in _FIELDS})
        stored = doc["manifest_hash"]
    except (OSError, json.JSONDecodeError, KeyError, TypeError) as err:
        raise ArtifactMismatchError(f"cannot read manifest {path}: {err}") from err
    if manifest.manifest_hash != stored:
        raise ArtifactMismatchError(
            f"manifest {path} does not match its stored hash; file was edited"
        )
    return manifest
