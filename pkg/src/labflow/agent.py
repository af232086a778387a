"""Agent gateway: context assembly, backend dispatch, transactional
response application, and the bounded repair loop.

The backend contract is a single request/response exchange. Two backends
ship with the engine: a remote chat-completion client and a deterministic
scripted backend that replays canned responses from a transcript file,
which is what every test and the replay harness use.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Protocol

from .commands import CommandSpec
from .context_store import AuthorKind, Provenance, digest
from .errors import (
    BackendError,
    PathOutsideProject,
    RawTierViolation,
    TranscriptMismatch,
)
from .gates import CheckConfig, GateResult, gate_status, run_checks
from .project import Project
from .refs import RefKind, normalize_pattern, pattern_matches

EventHook = Callable[[str, dict], None]


@dataclass(frozen=True)
class ContextDocRef:
    doc_path: str
    version: int
    content: str


@dataclass(frozen=True)
class DataRefSummary:
    artifact_path: str
    tier: str
    content_hash: str
    produced_by: str | None

    def as_dict(self) -> dict:
        return {
            "artifact_path": self.artifact_path,
            "tier": self.tier,
            "content_hash": self.content_hash,
            "produced_by": self.produced_by,
        }


@dataclass(frozen=True)
class AgentRequest:
    command: CommandSpec
    context_docs: tuple[ContextDocRef, ...]
    data_refs: tuple[DataRefSummary, ...]
    feedback: str | None
    attempt: int

    def serialize(self) -> str:
        """Deterministic wire form; equal session states serialize
        byte-identically."""
        payload = {
            "command": self.command.name,
            "category": self.command.category.value,
            "body": self.command.body,
            "context_docs": [
                {"path": d.doc_path, "version": d.version, "content": d.content}
                for d in self.context_docs
            ],
            "data_refs": [d.as_dict() for d in self.data_refs],
            "feedback": self.feedback,
            "attempt": self.attempt,
        }
        return json.dumps(payload, sort_keys=True, ensure_ascii=False)


@dataclass(frozen=True)
class DataNote:
    """A derived artifact the agent declares for provenance registration."""

    path: str
    sources: tuple[str, ...]
    transformation_ref: str | None = None

    def as_dict(self) -> dict:
        return {
            "path": self.path,
            "sources": list(self.sources),
            "transformation_ref": self.transformation_ref,
        }

    @classmethod
    def from_dict(cls, rec: dict) -> "DataNote":
        return cls(
            path=rec["path"],
            sources=tuple(rec.get("sources", ())),
            transformation_ref=rec.get("transformation_ref"),
        )


@dataclass(frozen=True)
class AgentResponse:
    file_writes: tuple[tuple[str, str], ...] = ()
    doc_writes: tuple[tuple[str, str], ...] = ()
    data_notes: tuple[DataNote, ...] = ()
    narration: str = ""

    def as_dict(self) -> dict:
        return {
            "file_writes": [{"path": p, "content": c} for p, c in self.file_writes],
            "doc_writes": [{"path": p, "content": c} for p, c in self.doc_writes],
            "data_notes": [n.as_dict() for n in self.data_notes],
            "narration": self.narration,
        }

    @classmethod
    def from_dict(cls, rec: dict) -> "AgentResponse":
        return cls(
            file_writes=tuple(
                (w["path"], w["content"]) for w in rec.get("file_writes", ())
            ),
            doc_writes=tuple(
                (w["path"], w["content"]) for w in rec.get("doc_writes", ())
            ),
            data_notes=tuple(DataNote.from_dict(n) for n in rec.get("data_notes", ())),
            narration=rec.get("narration", ""),
        )


@dataclass(frozen=True)
class AppliedChange:
    kind: str  # file | doc | artifact
    path: str
    detail: str = ""

    def as_dict(self) -> dict:
        return {"kind": self.kind, "path": self.path, "detail": self.detail}


@dataclass
class ChangeSet:
    changes: list[AppliedChange] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.changes)

    def as_dict(self) -> dict:
        return {"changes": [c.as_dict() for c in self.changes]}

    @classmethod
    def from_dict(cls, rec: dict) -> "ChangeSet":
        return cls(
            changes=[
                AppliedChange(c["kind"], c["path"], c.get("detail", ""))
                for c in rec.get("changes", ())
            ]
        )


class AgentBackend(Protocol):
    def execute(self, request: AgentRequest) -> AgentResponse:  # pragma: no cover
        ...


# -- transcript-backed scripted backend -------------------------------------


@dataclass(frozen=True)
class TranscriptEntry:
    command: str
    attempt: int
    response: AgentResponse


@dataclass
class Transcript:
    entries: list[TranscriptEntry] = field(default_factory=list)

    def __post_init__(self):
        expected: dict[str, int] = {}
        for entry in self.entries:
            nxt = expected.get(entry.command, 0) + 1
            if entry.attempt != nxt:
                raise ValueError(
                    f"transcript attempts for {entry.command!r} must be "
                    f"contiguous from 1; saw {entry.attempt}, expected {nxt}"
                )
            expected[entry.command] = entry.attempt

    def dumps(self) -> str:
        lines = [
            json.dumps(
                {
                    "command": e.command,
                    "attempt": e.attempt,
                    "response": e.response.as_dict(),
                },
                ensure_ascii=False,
            )
            for e in self.entries
        ]
        return "\n".join(lines) + ("\n" if lines else "")

    @classmethod
    def loads(cls, text: str) -> "Transcript":
        entries = []
        for line in text.splitlines():
            if not line.strip():
                continue
            rec = json.loads(line)
            entries.append(
                TranscriptEntry(
                    command=rec["command"],
                    attempt=rec["attempt"],
                    response=AgentResponse.from_dict(rec["response"]),
                )
            )
        return cls(entries=entries)

    def save(self, path: Path | str) -> None:
        Path(path).write_text(self.dumps(), encoding="utf-8")

    @classmethod
    def load(cls, path: Path | str) -> "Transcript":
        return cls.loads(Path(path).read_text(encoding="utf-8"))


class ScriptedBackend:
    """Replays transcript responses in order; any divergence between the
    incoming request and the next entry is a hard error. Fully
    deterministic."""

    def __init__(self, transcript: Transcript, cursor: int = 0):
        self.transcript = transcript
        self.cursor = cursor

    def execute(self, request: AgentRequest) -> AgentResponse:
        if self.cursor >= len(self.transcript.entries):
            raise TranscriptMismatch(
                f"transcript exhausted; no entry for {request.command.name!r} "
                f"attempt {request.attempt}"
            )
        entry = self.transcript.entries[self.cursor]
        if entry.command != request.command.name or entry.attempt != request.attempt:
            raise TranscriptMismatch(
                f"transcript expects {entry.command!r} attempt {entry.attempt}, "
                f"got {request.command.name!r} attempt {request.attempt}"
            )
        self.cursor += 1
        return entry.response


# -- remote chat-completion backend -------------------------------------------


class RemoteLLMBackend:
    """Minimal text-in/text-out chat client.

    The model must answer with one fenced ```json block whose payload is
    the AgentResponse schema; anything else is a BackendError.
    """

    def __init__(
        self,
        endpoint: str,
        model: str,
        auth_token: str | None = None,
        timeout_s: float = 120.0,
    ):
        if not endpoint:
            raise BackendError("remote backend endpoint is not configured")
        self.endpoint = endpoint
        self.model = model
        self.auth_token = auth_token
        self.timeout_s = timeout_s

    def build_prompt(self, request: AgentRequest) -> str:
        return (
            request.command.body
            + "\n\n--- context bundle ---\n"
            + request.serialize()
            + "\n\nReply with a single fenced ```json block containing "
            '{"file_writes": [{"path", "content"}], "doc_writes": [...], '
            '"data_notes": [...], "narration": "..."}.'
        )

    @staticmethod
    def extract_payload(text: str) -> dict:
        """First well-formed fenced json block wins."""
        marker = "```"
        start = 0
        while True:
            open_idx = text.find(marker, start)
            if open_idx == -1:
                raise BackendError("no fenced response block in model output")
            newline = text.find("\n", open_idx)
            if newline == -1:
                raise BackendError("malformed fence in model output")
            close_idx = text.find(marker, newline)
            if close_idx == -1:
                raise BackendError("unterminated fenced block in model output")
            block = text[newline + 1 : close_idx]
            try:
                payload = json.loads(block)
                if isinstance(payload, dict):
                    return payload
            except json.JSONDecodeError:
                pass
            start = close_idx + len(marker)

    def execute(self, request: AgentRequest) -> AgentResponse:
        import requests

        headers = {"Content-Type": "application/json"}
        if self.auth_token:
            headers["Authorization"] = f"Bearer {self.auth_token}"
        body = {
            "model": self.model,
            "messages": [{"role": "user", "content": self.build_prompt(request)}],
        }
        try:
            resp = requests.post(
                self.endpoint, json=body, headers=headers, timeout=self.timeout_s
            )
        except requests.RequestException as exc:
            raise BackendError(f"remote call failed: {exc}") from exc
        if resp.status_code != 200:
            raise BackendError(f"remote call returned HTTP {resp.status_code}")
        try:
            content = resp.json()["choices"][0]["message"]["content"]
        except (KeyError, IndexError, ValueError) as exc:
            raise BackendError(f"unexpected completion payload: {exc}") from exc
        return AgentResponse.from_dict(self.extract_payload(content))


# -- context assembly -----------------------------------------------------------


def assemble_request(
    command: CommandSpec,
    project: Project,
    feedback: str | None = None,
    attempt: int = 1,
) -> AgentRequest:
    """Gather head documents and registered artifacts for a command.

    Context docs: head versions matched by the command's context-doc
    inputs, plus documents that reference (backlink to) the command's
    context target. Data refs: registered artifacts matched by data
    inputs. Everything ordered by path, so assembly is deterministic.
    """
    doc_paths: set[str] = set()
    store = project.context_store
    for ref in command.inputs:
        if ref.kind is not RefKind.CONTEXT_DOC:
            continue
        for doc_path in store.list_documents():
            if pattern_matches(ref.pattern, doc_path):
                doc_paths.add(doc_path)
    if command.context_target:
        for doc_path, _version in store.backlinks_matching(command.context_target):
            doc_paths.add(doc_path)

    context_docs = []
    for doc_path in sorted(doc_paths):
        head = store.head(doc_path)
        context_docs.append(
            ContextDocRef(
                doc_path=doc_path,
                version=head.version,
                content=store.read_document(doc_path),
            )
        )

    data_refs = []
    records = {r.artifact_path: r for r in project.data_store.records()}
    matched_paths: set[str] = set()
    for ref in command.inputs:
        if ref.kind is not RefKind.DATA_PATH:
            continue
        for artifact_path in records:
            if pattern_matches(ref.pattern, artifact_path):
                matched_paths.add(artifact_path)
    for artifact_path in sorted(matched_paths):
        rec = records[artifact_path]
        data_refs.append(
            DataRefSummary(
                artifact_path=rec.artifact_path,
                tier=rec.tier.value,
                content_hash=rec.content_hash,
                produced_by=rec.produced_by,
            )
        )

    return AgentRequest(
        command=command,
        context_docs=tuple(context_docs),
        data_refs=tuple(data_refs),
        feedback=feedback,
        attempt=attempt,
    )


# -- transactional application ----------------------------------------------------


class _UndoJournal:
    """Records enough to restore tree and stores to the pre-call state."""

    def __init__(self):
        self.file_ops: list[tuple[Path, bytes | None]] = []
        self.created_dirs: list[Path] = []
        self.doc_ops: list[dict] = []
        self.index_snapshot: bytes | None = None
        self.index_snapshot_taken = False

    def rollback(self, project: Project) -> None:
        for op in reversed(self.doc_ops):
            manifest: Path = op["manifest"]
            if op["manifest_bytes"] is None:
                manifest.unlink(missing_ok=True)
            else:
                manifest.write_bytes(op["manifest_bytes"])
            obj: Path = op["object"]
            if op["object_created"]:
                obj.unlink(missing_ok=True)
            head: Path = op["head"]
            if op["head_bytes"] is None:
                head.unlink(missing_ok=True)
            else:
                head.write_bytes(op["head_bytes"])
        for path, old_bytes in reversed(self.file_ops):
            if old_bytes is None:
                path.unlink(missing_ok=True)
            else:
                path.write_bytes(old_bytes)
        for directory in reversed(self.created_dirs):
            try:
                directory.rmdir()
            except OSError:
                pass
        if self.index_snapshot_taken:
            project.data_store.restore_index_bytes(self.index_snapshot)


def _validate_response(response: AgentResponse, project: Project) -> None:
    for path, _content in response.file_writes:
        norm = normalize_pattern(path)
        try:
            project.inside_root(norm)
        except ValueError:
            raise PathOutsideProject(f"file write {path!r} escapes project root") from None
        if norm.startswith("data/raw/"):
            raise RawTierViolation(f"file write {path!r} targets immutable data/raw/")
    for path, _content in response.doc_writes:
        norm = normalize_pattern(path)
        try:
            project.inside_root(norm)
        except ValueError:
            raise PathOutsideProject(f"doc write {path!r} escapes project root") from None
        if not norm.startswith("docs/"):
            raise PathOutsideProject(f"doc write {path!r} must live under docs/")
    for note in response.data_notes:
        norm = normalize_pattern(note.path)
        if norm.startswith("data/raw/"):
            raise RawTierViolation(f"data note {note.path!r} targets immutable data/raw/")


def apply_response(
    response: AgentResponse,
    project: Project,
    stage: str,
) -> ChangeSet:
    """Land an agent response atomically.

    File writes hit the working tree, doc writes are versioned through
    the context store (author: agent), data notes register provenance.
    Any failure restores tree and stores to the pre-call state.
    """
    _validate_response(response, project)
    journal = _UndoJournal()
    change_set = ChangeSet()
    author = Provenance(AuthorKind.AGENT, stage)

    def _write_doc(norm: str, content: str) -> None:
        store = project.context_store
        if store.exists(norm) and store.read_document(norm) == content:
            return  # identical rewrite is a no-op, not an error
        manifest = store._manifest_path(norm)
        obj = store.objects_dir / digest(content)
        head = project.root / norm
        journal.doc_ops.append(
            {
                "manifest": manifest,
                "manifest_bytes": manifest.read_bytes() if manifest.exists() else None,
                "object": obj,
                "object_created": not obj.exists(),
                "head": head,
                "head_bytes": head.read_bytes() if head.exists() else None,
            }
        )
        version = store.write_document(norm, content, author)
        change_set.changes.append(
            AppliedChange(kind="doc", path=norm, detail=f"v{version.version}")
        )

    try:
        for path, content in response.file_writes:
            norm = normalize_pattern(path)
            if norm.startswith("docs/"):
                # Document writes are versioned even when the agent sent
                # them through the plain-file channel.
                _write_doc(norm, content)
                continue
            target = project.root / norm
            parent = target.parent
            missing: list[Path] = []
            while not parent.exists():
                missing.append(parent)
                parent = parent.parent
            target.parent.mkdir(parents=True, exist_ok=True)
            journal.created_dirs.extend(reversed(missing))
            journal.file_ops.append(
                (target, target.read_bytes() if target.exists() else None)
            )
            target.write_bytes(content.encode("utf-8"))
            change_set.changes.append(AppliedChange(kind="file", path=norm))

        for path, content in response.doc_writes:
            _write_doc(normalize_pattern(path), content)

        for note in response.data_notes:
            if not journal.index_snapshot_taken:
                journal.index_snapshot = project.data_store.snapshot_index_bytes()
                journal.index_snapshot_taken = True
            record = project.data_store.register_derived(
                note.path,
                sources=list(note.sources),
                produced_by=stage,
                transformation_ref=note.transformation_ref,
            )
            change_set.changes.append(
                AppliedChange(
                    kind="artifact",
                    path=record.artifact_path,
                    detail=record.content_hash[:12],
                )
            )
    except Exception:
        journal.rollback(project)
        raise
    return change_set


# -- repair loop ----------------------------------------------------------------------


@dataclass
class AttemptRecord:
    attempt: int
    request: AgentRequest
    response: AgentResponse
    change_set: ChangeSet
    gate: GateResult | None = None


@dataclass
class RepairOutcome:
    status: str  # converged | exhausted
    attempts: list[AttemptRecord]

    @property
    def converged(self) -> bool:
        return self.status == "converged"

    @property
    def converged_attempt(self) -> int | None:
        return self.attempts[-1].attempt if self.converged else None

    @property
    def final_gate(self) -> GateResult | None:
        return self.attempts[-1].gate if self.attempts else None


def format_diagnostics(gate: GateResult) -> str:
    return "\n".join(d.render() for d in gate.blocking)


def repair_loop(
    command: CommandSpec,
    backend: AgentBackend,
    gates: list[CheckConfig],
    max_attempts: int = 3,
    *,
    project: Project,
    stage: str | None = None,
    target_dir: Path | str | None = None,
    start_attempt: int = 1,
    initial_feedback: str | None = None,
    on_event: EventHook | None = None,
) -> RepairOutcome:
    """Execute, apply and gate until checks pass or attempts run out.

    Gate diagnostics from a failing attempt are serialized into the next
    request's feedback. Gate runs never exceed max_attempts. A backend
    failure aborts the loop; whatever the prior attempt applied stays in
    place with its gate result recorded.
    """
    if max_attempts < 1:
        raise ValueError("max_attempts must be >= 1")
    stage_name = stage or command.name
    emit = on_event or (lambda _kind, _payload: None)

    attempts: list[AttemptRecord] = []
    feedback = initial_feedback
    for offset in range(max_attempts):
        attempt_no = start_attempt + offset
        request = assemble_request(command, project, feedback=feedback, attempt=attempt_no)
        response = backend.execute(request)
        emit(
            "agent_attempt",
            {
                "stage": stage_name,
                "attempt": attempt_no,
                "request_sha256": hashlib.sha256(
                    request.serialize().encode("utf-8")
                ).hexdigest(),
                "feedback": feedback,
                "narration": response.narration,
            },
        )
        change_set = apply_response(response, project, stage_name)
        record = AttemptRecord(
            attempt=attempt_no,
            request=request,
            response=response,
            change_set=change_set,
        )
        attempts.append(record)

        if not gates:
            return RepairOutcome(status="converged", attempts=attempts)

        diagnostics = run_checks(gates, target_dir or project.root)
        gate = gate_status(diagnostics, gates)
        record.gate = gate
        emit(
            "gate_run",
            {
                "stage": stage_name,
                "attempt": attempt_no,
                "passed": gate.passed,
                "blocking": [d.as_dict() for d in gate.blocking],
            },
        )
        if gate.passed:
            return RepairOutcome(status="converged", attempts=attempts)
        feedback = (
            "Static checks failed; fix every finding below.\n"
            + format_diagnostics(gate)
        )
    return RepairOutcome(status="exhausted", attempts=attempts)
