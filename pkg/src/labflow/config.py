"""Project configuration: a single JSON file at the project root.

Environment variables override remote-backend credentials only
(LABFLOW_ENDPOINT, LABFLOW_MODEL, LABFLOW_API_TOKEN); everything else is
file-driven so runs stay reproducible.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field
from pathlib import Path

from .errors import ConfigError
from .gates import CheckConfig

CONFIG_NAME = "labflow.json"


@dataclass
class RemoteSettings:
    endpoint: str = ""
    model: str = ""
    auth_token: str | None = None
    timeout_s: float = 120.0


@dataclass
class ProjectConfig:
    workflow_doc: str = "workflow.md"
    commands_dir: str = "commands"
    gates: list[CheckConfig] = field(default_factory=list)
    backend: str = "remote"  # remote | scripted
    transcript_path: str | None = None
    remote: RemoteSettings = field(default_factory=RemoteSettings)

    def __post_init__(self):
        if self.backend not in ("remote", "scripted"):
            raise ConfigError(f"backend must be remote or scripted, got {self.backend!r}")
        if self.backend == "scripted" and not self.transcript_path:
            raise ConfigError("scripted backend requires transcript_path")
        for rel in (self.workflow_doc, self.commands_dir, self.transcript_path):
            if rel and (rel.startswith("/") or rel.startswith("..")):
                raise ConfigError(f"config path {rel!r} must stay inside the project")

    def as_dict(self) -> dict:
        return {
            "workflow_doc": self.workflow_doc,
            "commands_dir": self.commands_dir,
            "gates": [g.as_dict() for g in self.gates],
            "backend": self.backend,
            "transcript_path": self.transcript_path,
            "remote": {
                "endpoint": self.remote.endpoint,
                "model": self.remote.model,
                "timeout_s": self.remote.timeout_s,
            },
        }


def save_config(config: ProjectConfig, project_root: Path | str) -> Path:
    path = Path(project_root) / CONFIG_NAME
    path.write_text(json.dumps(config.as_dict(), indent=2) + "\n", encoding="utf-8")
    return path


def load_config(project_root: Path | str) -> ProjectConfig:
    path = Path(project_root) / CONFIG_NAME
    if not path.exists():
        raise ConfigError(f"no {CONFIG_NAME} found in {project_root}")
    try:
        raw = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{CONFIG_NAME} is not valid JSON: {exc}") from None

    remote_raw = raw.get("remote", {})
    remote = RemoteSettings(
        endpoint=os.environ.get("LABFLOW_ENDPOINT", remote_raw.get("endpoint", "")),
        model=os.environ.get("LABFLOW_MODEL", remote_raw.get("model", "")),
        auth_token=os.environ.get("LABFLOW_API_TOKEN"),
        timeout_s=float(remote_raw.get("timeout_s", 120.0)),
    )
    return ProjectConfig(
        workflow_doc=raw.get("workflow_doc", "workflow.md"),
        commands_dir=raw.get("commands_dir", "commands"),
        gates=[CheckConfig.from_dict(g) for g in raw.get("gates", [])],
        backend=raw.get("backend", "remote"),
        transcript_path=raw.get("transcript_path"),
        remote=remote,
    )
