"""Run manifests and deterministic CSV/JSON emission.

Every CLI run writes a manifest recording the subcommand, the fully resolved
parameter set, the master seed, the tool version, the input-config hash and
the list (with hashes) of every file produced. Re-running the recorded
command with the same build reproduces the outputs bit for bit; the
determinism contract is floating-point determinism within one build.

CSV output uses '.' decimals, a header row, LF line endings and repr-exact
floats; JSON is UTF-8 with sorted keys.
"""

from __future__ import annotations

import hashlib
import json
import time
from dataclasses import dataclass, field
from importlib import metadata
from pathlib import Path


def tool_version() -> str:
    try:
        return metadata.version("gravdiff")
    except metadata.PackageNotFoundError:
        return "unknown"


def sha256_bytes(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


def sha256_file(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def format_float(x: float) -> str:
    """Shortest round-trip decimal form, '.' separator."""
    return repr(float(x))


def write_csv(path, header, rows, preamble: str | None = None) -> None:
    """Write rows of floats with LF endings and round-trip formatting.

    ``preamble`` adds a leading '#' comment line (used to record unit and
    sign conventions in the file itself).
    """
    lines = []
    if preamble:
        lines.append("# " + preamble)
    lines.append(",".join(header))
    for row in rows:
        lines.append(",".join(format_float(v) for v in row))
    Path(path).write_bytes(("\n".join(lines) + "\n").encode("utf-8"))


def write_json(path, obj) -> None:
    Path(path).write_bytes(
        (json.dumps(obj, sort_keys=True, indent=2) + "\n").encode("utf-8")
    )


def write_json_lines(path, objs) -> None:
    lines = [json.dumps(o, sort_keys=True) for o in objs]
    Path(path).write_bytes(("\n".join(lines) + "\n").encode("utf-8"))


@dataclass
class RunManifest:
    """Reproducibility record for one CLI invocation."""

    command: str
    argv: list[str]
    parameters: dict
    seed: int | None
    config_sha256: str | None
    version: str = field(default_factory=tool_version)
    outputs: list[dict] = field(default_factory=list)
    created_unix: float = field(default_factory=lambda: time.time())

    def add_output(self, path) -> None:
        self.outputs.append({
            "path": str(path),
            "sha256": sha256_file(path),
        })

    def to_dict(self) -> dict:
        return {
            "command": self.command,
            "argv": self.argv,
            "parameters": self.parameters,
            "seed": self.seed,
            "config_sha256": self.config_sha256,
            "version": self.version,
            "outputs": self.outputs,
            "created_unix": self.created_unix,
        }

    def write(self, path) -> None:
        write_json(path, self.to_dict())


def load_manifest(path) -> dict:
    with open(path, "r", encoding="utf-8") as fh:
        return json.load(fh)
