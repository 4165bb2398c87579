"""Line-delimited run manifests: one header record, then one record per frame."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

SCHEMA = "fgbd.run/1"


@dataclass
class RunManifest:
    """What a CLI invocation did: config snapshot plus per-frame reports.

    Replaying the recorded command with the same inputs reproduces the
    outputs byte-for-byte; only the timing fields vary between runs.
    """

    command: str
    inputs: list[str] = field(default_factory=list)
    outputs: list[str] = field(default_factory=list)
    config: dict = field(default_factory=dict)
    frames: list[dict] = field(default_factory=list)

    def to_jsonl(self) -> str:
        header = {
            "schema": SCHEMA,
            "command": self.command,
            "inputs": self.inputs,
            "outputs": self.outputs,
            "config": self.config,
        }
        lines = [json.dumps(header, sort_keys=True)]
        lines += [json.dumps(fr, sort_keys=True) for fr in self.frames]
        return "\n".join(lines) + "\n"

    def write(self, path) -> None:
        Path(path).write_text(self.to_jsonl())

    @classmethod
    def from_jsonl(cls, text: str) -> "RunManifest":
        lines = [ln for ln in text.splitlines() if ln.strip()]
        if not lines:
            raise ValueError("empty manifest")
        header = json.loads(lines[0])
        if header.get("schema") != SCHEMA:
            raise ValueError(f"unsupported manifest schema {header.get('schema')!r}")
        return cls(
            command=header["command"],
            inputs=header.get("inputs", []),
            outputs=header.get("outputs", []),
            config=header.get("config", {}),
            frames=[json.loads(ln) for ln in lines[1:]],
        )

    @classmethod
    def read(cls, path) -> "RunManifest":
        return cls.from_jsonl(Path(path).read_text())
