"""Workflow document parsing.

The orchestration document is plain Markdown; its ``## Workflow`` section
enumerates stages as list items:

    ## Workflow

    - @preprocess.md — design and execute preprocessing
      context: docs/03-preprocess-plan.md
      consumes: [data/raw/, docs/02-raw-data-analysis.md]
      produces: [scripts/preprocess.py, data/processed/]
      optional: false

Indented ``key: value`` lines attach to the stage above them. Document
order is significant: it is the tie-breaker for every otherwise
unconstrained ordering downstream.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field

from .errors import DanglingMetadata, DuplicateStage, NoWorkflowSection
from .refs import ResourceRef, normalize_pattern

_STAGE_RE = re.compile(
    r"^[-*]\s+@(?P<name>[a-z0-9]+(?:-[a-z0-9]+)*)\.md"
    r"(?:\s*(?:—|–|--|-)\s*(?P<desc>.*))?$"
)
_META_RE = re.compile(r"^\s{2,}(?P<key>context|consumes|produces|optional):\s*(?P<value>.*)$")
_HEADING_RE = re.compile(r"^(#{1,6})\s+(.*?)\s*$")

_STAGE_META_KEYS = ("context", "consumes", "produces", "optional")


@dataclass
class StageDecl:
    """One workflow stage: a command plus its declared artifact wiring."""

    command: str
    description: str = ""
    context_artifact: str | None = None
    consumes: tuple[ResourceRef, ...] = ()
    produces: tuple[ResourceRef, ...] = ()
    optional: bool = False
    doc_index: int = 0

    @property
    def name(self) -> str:
        return self.command


@dataclass
class WorkflowSpec:
    """Ordered stage declarations parsed from the orchestration document."""

    stages: list[StageDecl] = field(default_factory=list)
    source_path: str | None = None

    def stage(self, name: str) -> StageDecl | None:
        for decl in self.stages:
            if decl.command == name:
                return decl
        return None

    @property
    def stage_names(self) -> list[str]:
        return [s.command for s in self.stages]


def _parse_ref_list(value: str) -> tuple[ResourceRef, ...]:
    value = value.strip()
    if value.startswith("[") and value.endswith("]"):
        value = value[1:-1]
    items = [item.strip() for item in value.split(",") if item.strip()]
    return tuple(ResourceRef.from_pattern(item) for item in items)


def parse_workflow_doc(source: str, source_path: str | None = None) -> WorkflowSpec:
    """Extract the stage list from the ``## Workflow`` section.

    Raises NoWorkflowSection when the heading is absent, DuplicateStage on
    a repeated command, DanglingMetadata when an indented metadata line
    precedes any stage item.
    """
    lines = source.split("\n")
    in_section = False
    section_seen = False
    stages: list[StageDecl] = []
    current: StageDecl | None = None

    for lineno, raw in enumerate(lines, start=1):
        heading = _HEADING_RE.match(raw)
        if heading:
            if in_section:
                in_section = False
            if heading.group(2).strip().lower() == "workflow":
                in_section = True
                section_seen = True
            continue
        if not in_section:
            continue

        stripped = raw.strip()
        if not stripped:
            continue

        stage_match = _STAGE_RE.match(stripped) if not raw.startswith((" ", "\t")) else None
        if stage_match:
            name = stage_match.group("name")
            if any(s.command == name for s in stages):
                raise DuplicateStage(f"stage @{name}.md declared twice")
            current = StageDecl(
                command=name,
                description=(stage_match.group("desc") or "").strip(),
                doc_index=len(stages),
            )
            stages.append(current)
            continue

        meta = _META_RE.match(raw)
        if meta:
            if current is None:
                raise DanglingMetadata(
                    f"line {lineno}: metadata {meta.group('key')!r} before any stage"
                )
            key, value = meta.group("key"), meta.group("value").strip()
            if key == "context":
                current.context_artifact = normalize_pattern(value)
            elif key == "consumes":
                current.consumes = _parse_ref_list(value)
            elif key == "produces":
                current.produces = _parse_ref_list(value)
            elif key == "optional":
                current.optional = value.lower() in ("true", "yes", "1")
            continue
        # Anything else in the section (prose, nested notes) is ignored.

    if not section_seen:
        raise NoWorkflowSection("document has no '## Workflow' section")
    return WorkflowSpec(stages=stages, source_path=source_path)


def serialize_workflow(spec: WorkflowSpec, title: str = "Project Workflow") -> str:
    """Emit the canonical document form for a workflow spec."""
    out = [f"# {title}", "", "## Workflow", ""]
    for stage in spec.stages:
        desc = f" — {stage.description}" if stage.description else ""
        out.append(f"- @{stage.command}.md{desc}")
        if stage.context_artifact:
            out.append(f"  context: {stage.context_artifact}")
        if stage.consumes:
            out.append(f"  consumes: [{', '.join(r.pattern for r in stage.consumes)}]")
        if stage.produces:
            out.append(f"  produces: [{', '.join(r.pattern for r in stage.produces)}]")
        if stage.optional:
            out.append("  optional: true")
    return "\n".join(out) + "\n"
