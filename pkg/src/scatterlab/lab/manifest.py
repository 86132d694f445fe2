"""Run manifest: every output file with its SHA-256 digest, written by one writer."""
from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass, field
from datetime import datetime, timezone
from pathlib import Path

from .. import __version__

MANIFEST_NAME = "manifest.json"


class ManifestError(RuntimeError):
    pass


def digest(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


def _now() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


@dataclass
class RunManifest:
    tool_version: str
    config_hash: str
    seed: int
    created: str
    updated: str
    scenarios: dict[str, dict] = field(default_factory=dict)
    files: dict[str, str] = field(default_factory=dict)

    @classmethod
    def load(cls, run_dir: Path) -> "RunManifest":
        path = Path(run_dir) / MANIFEST_NAME
        if not path.is_file():
            raise ManifestError(f"no manifest in {run_dir}")
        try:
            return cls(**json.loads(path.read_text()))
        except (json.JSONDecodeError, TypeError) as exc:
            raise ManifestError(f"corrupt manifest {path}: {exc}") from exc

    def verify(self, run_dir: Path) -> None:
        for rel, want in sorted(self.files.items()):
            path = Path(run_dir) / rel
            if not path.is_file():
                raise ManifestError(f"listed file missing: {rel}")
            got = digest(path.read_bytes())
            if got != want:
                raise ManifestError(f"digest mismatch for {rel}: manifest {want[:12]}, file {got[:12]}")


class ManifestWriter:
    """Single point through which run outputs are written."""

    def __init__(self, run_dir: Path, config_hash: str, seed: int):
        self.run_dir = Path(run_dir)
        self.run_dir.mkdir(parents=True, exist_ok=True)
        try:
            self.manifest = RunManifest.load(self.run_dir)
        except ManifestError:
            self.manifest = RunManifest(__version__, config_hash, seed, _now(), _now())
        if self.manifest.config_hash != config_hash:
            # a new configuration invalidates previous outputs' provenance
            self.manifest = RunManifest(__version__, config_hash, seed, _now(), _now())
        self.manifest.seed = seed
        self.manifest.tool_version = __version__

    def write(self, rel: str, content: str) -> None:
        data = content.encode()
        path = self.run_dir / rel
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_bytes(data)
        self.manifest.files[rel] = digest(data)

    def set_status(self, scenario_id: str, stage: str, status: str) -> None:
        self.manifest.scenarios.setdefault(scenario_id, {})[stage] = status

    def close(self) -> None:
        self.manifest.updated = _now()
        self.manifest.files = dict(sorted(self.manifest.files.items()))
        (self.run_dir / MANIFEST_NAME).write_text(json.dumps(asdict(self.manifest), indent=2) + "\n")
