"""Content-addressed run directories: ``<root>/runs/<run_id>/{manifest.json, surface.csv, reports/*.json}``."""

from __future__ import annotations

import hashlib
import json
import os
import shutil
import tempfile
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Optional

from . import __version__
from .reports import dumps, to_jsonable

__all__ = [
    "RunManifest",
    "StoreError",
    "RunNotFoundError",
    "IntegrityError",
    "default_root",
    "compute_run_id",
    "new_manifest",
    "save",
    "load",
    "run_dir",
    "OUT_ENV",
]

OUT_ENV = "OPTVAL_OUT"


class StoreError(OSError):
    pass


class RunNotFoundError(StoreError, FileNotFoundError):
    pass


class IntegrityError(StoreError):
    pass


def default_root() -> Path:
    return Path(os.environ.get(OUT_ENV, "optval-out"))


def _canonical(obj) -> str:
    return json.dumps(to_jsonable(obj), sort_keys=True, separators=(",", ":"), allow_nan=False)


def compute_run_id(inputs: dict, seed: int, version: str = __version__) -> str:
    payload = _canonical({"inputs": inputs, "seed": seed, "version": version})
    return hashlib.sha256(payload.encode()).hexdigest()[:20]


def _checksum(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


@dataclass
class RunManifest:
    run_id: str
    created_at: str
    inputs: dict
    seed: int
    version: str = __version__
    artifact_index: list = field(default_factory=list)  # {kind, path, checksum}

    def to_dict(self) -> dict:
        return {
            "run_id": self.run_id,
            "created_at": self.created_at,
            "inputs": self.inputs,
            "seed": self.seed,
            "version": self.version,
            "artifact_index": self.artifact_index,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "RunManifest":
        return cls(data["run_id"], data["created_at"], data["inputs"], data["seed"], data["version"],
                   list(data["artifact_index"]))


def new_manifest(inputs: dict, seed: int = 0) -> RunManifest:
    inputs = to_jsonable(inputs)
    stamp = datetime.now(timezone.utc).isoformat(timespec="seconds")
    return RunManifest(compute_run_id(inputs, seed), stamp, inputs, seed)


def run_dir(run_id: str, root=None) -> Path:
    return Path(root if root is not None else default_root()) / "runs" / run_id


def _kind(relpath: str) -> str:
    if relpath == "surface.csv":
        return "surface"
    if relpath.startswith("reports/"):
        return "report"
    return "other"


def save(run: RunManifest, artifacts: dict, root=None) -> Path:
    """Write the run atomically; an existing run with the same id is left untouched."""
    target = run_dir(run.run_id, root)
    if (target / "manifest.json").exists():
        return target
    parent = target.parent
    try:
        parent.mkdir(parents=True, exist_ok=True)
        tmp = Path(tempfile.mkdtemp(prefix=f".{run.run_id}.", dir=parent))
    except OSError as exc:
        raise StoreError(f"cannot create run directory under {parent}: {exc}") from exc
    try:
        index = []
        for rel in sorted(artifacts):
            if Path(rel).is_absolute() or ".." in Path(rel).parts:
                raise ValueError(f"artifact path must be relative: {rel}")
            content = artifacts[rel]
            data = content.encode() if isinstance(content, str) else bytes(content)
            dest = tmp / rel
            dest.parent.mkdir(parents=True, exist_ok=True)
            dest.write_bytes(data)
            index.append({"kind": _kind(rel), "path": rel, "checksum": _checksum(data)})
        run.artifact_index = index
        (tmp / "manifest.json").write_text(dumps(run.to_dict()))
        try:
            os.rename(tmp, target)
        except OSError:
            if (target / "manifest.json").exists():  # lost a race with an identical run
                shutil.rmtree(tmp, ignore_errors=True)
                return target
            raise
    except OSError as exc:
        shutil.rmtree(tmp, ignore_errors=True)
        raise StoreError(f"failed writing run {run.run_id} to {target}: {exc}") from exc
    except Exception:
        shutil.rmtree(tmp, ignore_errors=True)
        raise
    return target


def load(run_id: str, root=None) -> tuple:
    """Return ``(manifest, {relpath: text})`` after verifying every checksum."""
    target = run_dir(run_id, root)
    mpath = target / "manifest.json"
    if not mpath.exists():
        raise RunNotFoundError(f"no run {run_id} under {target.parent}")
    try:
        run = RunManifest.from_dict(json.loads(mpath.read_text()))
    except (ValueError, KeyError) as exc:
        raise IntegrityError(f"corrupt manifest {mpath}: {exc}") from exc
    if run.run_id != run_id:
        raise IntegrityError(f"manifest {mpath} names run {run.run_id}")
    artifacts = {}
    for entry in run.artifact_index:
        path = target / entry["path"]
        if not path.exists():
            raise IntegrityError(f"missing artifact {entry['path']} in run {run_id}")
        data = path.read_bytes()
        if _checksum(data) != entry["checksum"]:
            raise IntegrityError(f"checksum mismatch for {entry['path']} in run {run_id}")
        artifacts[entry["path"]] = data.decode()
    return run, artifacts


def list_runs(root=None) -> list:
    base = Path(root if root is not None else default_root()) / "runs"
    if not base.exists():
        return []
    return sorted(p.name for p in base.iterdir() if (p / "manifest.json").exists())
