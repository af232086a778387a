"""Quality gates: run configured static-check commands and fold their
output into a uniform diagnostic model.

Tools are external subprocesses declared in project config. Two output
grammars are supported: gcc-style lines

    <file>:<line>[:<col>]: <severity>: <message>

and json-lines (one object per line with file/line/column/severity/
message keys). A tool that exits nonzero without producing any parseable
diagnostic contributes a synthetic blocking finding: silence must not
pass the gate.
"""

from __future__ import annotations

import json
import re
import subprocess
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path

from .errors import ParseFailure, ToolNotFound


class Severity(str, Enum):
    ERROR = "error"
    WARNING = "warning"
    INFO = "info"


_SEVERITY_RANK = {Severity.ERROR: 2, Severity.WARNING: 1, Severity.INFO: 0}

_SEVERITY_ALIASES = {
    "error": Severity.ERROR,
    "fatal": Severity.ERROR,
    "e": Severity.ERROR,
    "warning": Severity.WARNING,
    "warn": Severity.WARNING,
    "w": Severity.WARNING,
    "info": Severity.INFO,
    "note": Severity.INFO,
    "i": Severity.INFO,
}

_GCC_LINE_RE = re.compile(
    r"^(?P<file>[^:\s][^:]*):(?P<line>\d+)(?::(?P<col>\d+))?:\s*"
    r"(?P<severity>[A-Za-z_]+)\s*:\s*(?P<message>.*)$"
)


class DiagnosticFormat(str, Enum):
    GCC_STYLE = "gcc_style"
    JSON_LINES = "json_lines"


@dataclass(frozen=True)
class CheckConfig:
    """One configured external check."""

    name: str
    command: tuple[str, ...]
    diagnostic_format: DiagnosticFormat = DiagnosticFormat.GCC_STYLE
    severity_threshold: Severity = Severity.ERROR

    def __post_init__(self):
        if not self.command:
            raise ValueError(f"check {self.name!r} has an empty command")

    def as_dict(self) -> dict:
        return {
            "name": self.name,
            "command": list(self.command),
            "diagnostic_format": self.diagnostic_format.value,
            "severity_threshold": self.severity_threshold.value,
        }

    @classmethod
    def from_dict(cls, rec: dict) -> "CheckConfig":
        return cls(
            name=rec["name"],
            command=tuple(rec["command"]),
            diagnostic_format=DiagnosticFormat(rec.get("diagnostic_format", "gcc_style")),
            severity_threshold=Severity(rec.get("severity_threshold", "error")),
        )


@dataclass(frozen=True)
class Diagnostic:
    file: str
    line: int
    column: int | None
    severity: Severity
    message: str
    tool: str

    def render(self) -> str:
        col = f":{self.column}" if self.column is not None else ""
        return f"{self.file}:{self.line}{col}: {self.severity.value}: {self.message} [{self.tool}]"

    def as_dict(self) -> dict:
        return {
            "file": self.file,
            "line": self.line,
            "column": self.column,
            "severity": self.severity.value,
            "message": self.message,
            "tool": self.tool,
        }

    @classmethod
    def from_dict(cls, rec: dict) -> "Diagnostic":
        return cls(
            file=rec["file"],
            line=rec["line"],
            column=rec.get("column"),
            severity=Severity(rec["severity"]),
            message=rec["message"],
            tool=rec.get("tool", ""),
        )


@dataclass(frozen=True)
class ParsedOutput:
    diagnostics: tuple[Diagnostic, ...]
    ignored_lines: int


@dataclass
class GateResult:
    passed: bool
    blocking: list[Diagnostic] = field(default_factory=list)
    diagnostics: list[Diagnostic] = field(default_factory=list)

    @property
    def status(self) -> str:
        return "pass" if self.passed else "fail"

    def as_dict(self) -> dict:
        return {
            "passed": self.passed,
            "blocking": [d.as_dict() for d in self.blocking],
            "diagnostics": [d.as_dict() for d in self.diagnostics],
        }

    @classmethod
    def from_dict(cls, rec: dict) -> "GateResult":
        return cls(
            passed=rec["passed"],
            blocking=[Diagnostic.from_dict(d) for d in rec["blocking"]],
            diagnostics=[Diagnostic.from_dict(d) for d in rec["diagnostics"]],
        )


def _map_severity(token: str) -> tuple[Severity, bool]:
    mapped = _SEVERITY_ALIASES.get(token.lower())
    if mapped is None:
        return Severity.WARNING, False
    return mapped, True


def parse_gcc_style(output: str, tool: str) -> ParsedOutput:
    """Total parser for gcc-style diagnostics: never raises, skips and
    counts lines that do not match the grammar."""
    diagnostics: list[Diagnostic] = []
    ignored = 0
    for line in output.splitlines():
        if not line.strip():
            continue
        match = _GCC_LINE_RE.match(line)
        if not match:
            ignored += 1
            continue
        lineno = int(match.group("line"))
        if lineno < 1:
            ignored += 1
            continue
        col_raw = match.group("col")
        column = int(col_raw) if col_raw is not None and int(col_raw) >= 1 else None
        severity, known = _map_severity(match.group("severity"))
        message = match.group("message")
        if not known:
            message = f"{message} (reported severity: {match.group('severity')})"
        diagnostics.append(
            Diagnostic(
                file=match.group("file"),
                line=lineno,
                column=column,
                severity=severity,
                message=message,
                tool=tool,
            )
        )
    return ParsedOutput(diagnostics=tuple(diagnostics), ignored_lines=ignored)


def parse_json_lines(output: str, tool: str) -> ParsedOutput:
    """One JSON object per line; malformed JSON is a ParseFailure carrying
    the raw output."""
    diagnostics: list[Diagnostic] = []
    ignored = 0
    for line in output.splitlines():
        if not line.strip():
            continue
        try:
            rec = json.loads(line)
        except json.JSONDecodeError as exc:
            raise ParseFailure(
                f"{tool}: output line is not valid JSON: {exc}", raw_output=output
            ) from None
        if not isinstance(rec, dict) or "file" not in rec or "line" not in rec:
            ignored += 1
            continue
        severity, known = _map_severity(str(rec.get("severity", "warning")))
        message = str(rec.get("message", ""))
        if not known:
            message = f"{message} (reported severity: {rec.get('severity')})"
        diagnostics.append(
            Diagnostic(
                file=str(rec["file"]),
                line=int(rec["line"]),
                column=rec.get("column"),
                severity=severity,
                message=message,
                tool=tool,
            )
        )
    return ParsedOutput(diagnostics=tuple(diagnostics), ignored_lines=ignored)


_PARSERS = {
    DiagnosticFormat.GCC_STYLE: parse_gcc_style,
    DiagnosticFormat.JSON_LINES: parse_json_lines,
}


def _sort_key(diag: Diagnostic) -> tuple:
    return (diag.file, diag.line, diag.column if diag.column is not None else 0, diag.tool)


def run_checks(configs: list[CheckConfig], target_dir: Path | str) -> list[Diagnostic]:
    """Execute every configured check against the target directory and
    return the merged, sorted diagnostics. The target tree is never
    modified by this call."""
    target = Path(target_dir)
    if not target.exists():
        raise FileNotFoundError(f"target directory {target} does not exist")

    merged: list[Diagnostic] = []
    for config in configs:
        argv = list(config.command) + [str(target)]
        try:
            proc = subprocess.run(
                argv,
                capture_output=True,
                text=True,
                timeout=300,
                check=False,
            )
        except FileNotFoundError:
            raise ToolNotFound(
                f"check {config.name!r}: command {config.command[0]!r} not found"
            ) from None
        except subprocess.TimeoutExpired:
            raise ToolNotFound(
                f"check {config.name!r}: command timed out"
            ) from None

        parser = _PARSERS[config.diagnostic_format]
        combined = proc.stdout + ("\n" + proc.stderr if proc.stderr else "")
        parsed = parser(combined, config.name)
        diagnostics = list(parsed.diagnostics)
        if proc.returncode != 0 and not diagnostics:
            # Silence plus a failing exit must not slip through the gate.
            diagnostics.append(
                Diagnostic(
                    file=".",
                    line=1,
                    column=None,
                    severity=Severity.ERROR,
                    message=(
                        f"tool exited {proc.returncode} without parseable findings"
                    ),
                    tool=config.name,
                )
            )
        merged.extend(diagnostics)
    merged.sort(key=_sort_key)
    return merged


def gate_status(diagnostics: list[Diagnostic], configs: list[CheckConfig]) -> GateResult:
    """Fail iff any diagnostic meets its tool's severity threshold."""
    thresholds = {c.name: c.severity_threshold for c in configs}
    blocking = [
        d
        for d in diagnostics
        if _SEVERITY_RANK[d.severity]
        >= _SEVERITY_RANK[thresholds.get(d.tool, Severity.ERROR)]
    ]
    return GateResult(
        passed=not blocking,
        blocking=sorted(blocking, key=_sort_key),
        diagnostics=sorted(diagnostics, key=_sort_key),
    )
