"""Command artifacts: parse, validate and enumerate the Markdown files
that define each reusable analytical operation.

File format is front-matter plus body:

    ---
    name: raw-data-analysis
    category: academic
    inputs: [data/raw/, docs/01-basic-information.md]
    context_target: docs/02-*.md
    ---
    <prompt body, opaque Markdown>

Keys are ``key: value`` lines; lists are ``key: [a, b]``. Unknown keys are
preserved verbatim so files survive round-trips through newer tooling.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path

from .errors import (
    EmptyBody,
    InvalidName,
    InvalidRef,
    MissingFrontMatter,
    NotAProject,
    UnknownCategory,
)
from .refs import ResourceRef, normalize_pattern, resolve_pattern

COMMANDS_DIR = "commands"

_NAME_RE = re.compile(r"^[a-z0-9]+(-[a-z0-9]+)*$")


class Category(str, Enum):
    ACADEMIC = "academic"
    QUALITY = "quality"
    PROJECT = "project"


@dataclass(frozen=True)
class CommandSpec:
    """A parsed command artifact."""

    name: str
    category: Category
    description: str = ""
    inputs: tuple[ResourceRef, ...] = ()
    outputs: tuple[ResourceRef, ...] = ()
    context_target: str | None = None
    body: str = ""
    extra: tuple[tuple[str, str], ...] = ()
    origin_path: str | None = None

    def __eq__(self, other: object) -> bool:
        # origin_path is bookkeeping, not identity: the same file parsed
        # from two locations is the same command.
        if not isinstance(other, CommandSpec):
            return NotImplemented
        return (
            self.name == other.name
            and self.category == other.category
            and self.description == other.description
            and self.inputs == other.inputs
            and self.outputs == other.outputs
            and self.context_target == other.context_target
            and self.body == other.body
            and self.extra == other.extra
        )

    def __hash__(self) -> int:
        return hash((self.name, self.category, self.body))


@dataclass(frozen=True)
class ParseFailureReport:
    """One unparseable command file, surfaced rather than skipped."""

    path: str
    error: str


@dataclass
class RefResolution:
    """Resolution outcome for a single input reference."""

    ref: ResourceRef
    matches: list[str]

    @property
    def matched(self) -> bool:
        return bool(self.matches)


@dataclass
class ValidationReport:
    """Per-input resolution findings for a command; warnings, not errors,
    since upstream stages may simply not have run yet."""

    command: str
    findings: list[RefResolution] = field(default_factory=list)

    @property
    def unmatched(self) -> list[RefResolution]:
        return [f for f in self.findings if not f.matched]

    @property
    def ok(self) -> bool:
        return not self.unmatched


def _parse_scalar_or_list(value: str) -> str | list[str]:
    value = value.strip()
    if value.startswith("[") and value.endswith("]"):
        inner = value[1:-1].strip()
        if not inner:
            return []
        return [item.strip() for item in inner.split(",") if item.strip()]
    return value


def parse_command_file(source: str, origin_path: str | None = None) -> CommandSpec:
    """Parse a command artifact from its text.

    Pure: touches nothing but ``source``. Raises MissingFrontMatter,
    InvalidName, UnknownCategory, InvalidRef or EmptyBody.
    """
    lines = source.split("\n")
    if not lines or lines[0].strip() != "---":
        raise MissingFrontMatter(
            f"{origin_path or '<string>'}: expected '---' on the first line"
        )
    try:
        closing = next(i for i in range(1, len(lines)) if lines[i].strip() == "---")
    except StopIteration:
        raise MissingFrontMatter(
            f"{origin_path or '<string>'}: front-matter block never closed"
        ) from None

    fields: dict[str, str | list[str]] = {}
    extra: list[tuple[str, str]] = []
    known = {"name", "category", "description", "inputs", "outputs", "context_target"}
    for raw in lines[1:closing]:
        if not raw.strip():
            continue
        key, sep, value = raw.partition(":")
        if not sep:
            raise MissingFrontMatter(
                f"{origin_path or '<string>'}: malformed front-matter line {raw!r}"
            )
        key = key.strip()
        if key in known:
            fields[key] = _parse_scalar_or_list(value)
        else:
            extra.append((key, value.strip()))

    name = fields.get("name")
    if not isinstance(name, str) or not name:
        raise InvalidName(f"{origin_path or '<string>'}: missing 'name'")
    if not _NAME_RE.match(name):
        raise InvalidName(
            f"{origin_path or '<string>'}: name {name!r} must be lowercase and hyphen-separated"
        )

    category_raw = fields.get("category")
    if not isinstance(category_raw, str) or not category_raw:
        raise UnknownCategory(f"{name}: missing 'category'")
    try:
        category = Category(category_raw)
    except ValueError:
        raise UnknownCategory(
            f"{name}: category {category_raw!r} not one of "
            f"{[c.value for c in Category]}"
        ) from None

    def _refs(key: str) -> tuple[ResourceRef, ...]:
        value = fields.get(key, [])
        items = value if isinstance(value, list) else [value]
        return tuple(ResourceRef.from_pattern(item) for item in items if item)

    inputs = _refs("inputs")
    outputs = _refs("outputs")

    context_target = fields.get("context_target")
    if isinstance(context_target, list):
        raise InvalidRef(f"{name}: context_target must be a single pattern")
    if context_target:
        context_target = normalize_pattern(context_target)
        if not context_target.startswith("docs/"):
            raise InvalidRef(f"{name}: context_target must live under docs/")
    else:
        context_target = None

    description = fields.get("description", "")
    if isinstance(description, list):
        description = ", ".join(description)

    body = "\n".join(lines[closing + 1:]).strip("\n")
    if not body.strip():
        raise EmptyBody(f"{name}: command body is empty")

    return CommandSpec(
        name=name,
        category=category,
        description=description,
        inputs=inputs,
        outputs=outputs,
        context_target=context_target,
        body=body,
        extra=tuple(extra),
        origin_path=origin_path,
    )


def serialize_command(spec: CommandSpec) -> str:
    """Emit the canonical file form; parse(serialize(spec)) == spec."""
    out = ["---", f"name: {spec.name}", f"category: {spec.category.value}"]
    if spec.description:
        out.append(f"description: {spec.description}")
    if spec.inputs:
        out.append(f"inputs: [{', '.join(r.pattern for r in spec.inputs)}]")
    if spec.outputs:
        out.append(f"outputs: [{', '.join(r.pattern for r in spec.outputs)}]")
    if spec.context_target:
        out.append(f"context_target: {spec.context_target}")
    for key, value in spec.extra:
        out.append(f"{key}: {value}")
    out.append("---")
    out.append(spec.body)
    return "\n".join(out) + "\n"


def list_commands(
    project_root: Path | str,
) -> tuple[list[CommandSpec], list[ParseFailureReport]]:
    """All parseable command artifacts under commands/, sorted by name,
    plus a report entry for every file that failed to parse."""
    root = Path(project_root)
    commands_dir = root / COMMANDS_DIR
    if not commands_dir.is_dir():
        raise NotAProject(f"no {COMMANDS_DIR}/ directory under {root}")

    specs: list[CommandSpec] = []
    failures: list[ParseFailureReport] = []
    for path in sorted(commands_dir.glob("*.md")):
        rel = path.relative_to(root).as_posix()
        try:
            specs.append(parse_command_file(path.read_text(encoding="utf-8"), rel))
        except Exception as exc:  # noqa: BLE001 - each failure is reported
            failures.append(ParseFailureReport(path=rel, error=str(exc)))
    specs.sort(key=lambda s: s.name)
    return specs, failures


def validate_command(spec: CommandSpec, project_root: Path | str) -> ValidationReport:
    """Resolve each input reference against the project tree. Read-only."""
    root = Path(project_root)
    report = ValidationReport(command=spec.name)
    for ref in spec.inputs:
        matches = resolve_pattern(root, ref.pattern)
        report.findings.append(RefResolution(ref=ref, matches=matches))
    return report
