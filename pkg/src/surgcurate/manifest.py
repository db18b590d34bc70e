"""Run manifests: the full provenance record of one pipeline invocation.

A run manifest carries the resolved config (defaults materialized), the
root and derived stage seeds, and SHA-256 fingerprints of every input and
output file. Re-running a command with the recorded config and inputs
reproduces byte-identical outputs; the manifest itself is the only file
that carries wall-clock timestamps.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass, field
from datetime import datetime, timezone
from importlib import metadata
from pathlib import Path


def tool_version() -> str:
    try:
        return metadata.version("surgcurate")
    except metadata.PackageNotFoundError:
        return "0.1.0"


def fingerprint_file(path: str | Path) -> str:
    hasher = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            hasher.update(chunk)
    return hasher.hexdigest()


def utc_now() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


@dataclass
class RunManifest:
    command: str
    config: dict
    seeds: dict[str, int] = field(default_factory=dict)
    inputs: dict[str, str] = field(default_factory=dict)
    outputs: dict[str, str] = field(default_factory=dict)
    tool_version: str = field(default_factory=tool_version)
    started_at: str = ""
    finished_at: str = ""

    def add_input(self, path: str | Path) -> None:
        self.inputs[str(path)] = fingerprint_file(path)

    def add_output(self, path: str | Path) -> None:
        self.outputs[str(path)] = fingerprint_file(path)

    def verify_inputs(self) -> list[str]:
        """Paths whose current contents no longer match the recorded hash."""
        stale = []
        for path, digest in self.inputs.items():
            if not Path(path).exists() or fingerprint_file(path) != digest:
                stale.append(path)
        return stale

    def to_json_text(self) -> str:
        return json.dumps(asdict(self), sort_keys=True, indent=2)

    def save(self, path: str | Path) -> Path:
        path = Path(path)
        path.write_text(self.to_json_text() + "\n", encoding="utf-8")
        return path

    @classmethod
    def load(cls, path: str | Path) -> "RunManifest":
        doc = json.loads(Path(path).read_text("utf-8"))
        return cls(**doc)


def manifest_path_for(output: str | Path) -> Path:
    """Conventional sidecar location: <output>.run.json."""
    output = Path(output)
    return output.with_name(output.name + ".run.json")
