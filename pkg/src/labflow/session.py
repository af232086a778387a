"""Human-in-the-loop session runtime.

The loop per stage is invoke -> execute -> present -> review -> revise or
advance. Every transition is an event in an append-only log; in-memory
state is always the fold of that log, which is what makes crash-safe
resume and deterministic replay possible. Ordering is advisory: invoking
out of order logs a warning, never blocks.
"""

from __future__ import annotations

import json
import os
import threading
import time
from dataclasses import dataclass, field
from datetime import datetime, timedelta
from enum import Enum
from pathlib import Path
from typing import Callable

from .agent import (
    AgentBackend,
    ChangeSet,
    ScriptedBackend,
    Transcript,
    apply_response,
    assemble_request,
    repair_loop,
)
from .commands import CommandSpec, list_commands
from .config import CONFIG_NAME, ProjectConfig, load_config
from .errors import (
    DecisionUnderflow,
    EmptyFeedback,
    GateBlocksApproval,
    LabflowError,
    NoPendingReview,
    NotAProject,
    ReviewPending,
    UnknownStage,
)
from .gates import GateResult
from .graph import (
    DependencyGraph,
    Freshness,
    Layer,
    compile_graph,
    recommended_order,
    refresh_freshness,
    stale_set,
    stages_to_rerun,
)
from .project import Project
from .refs import RefKind, resolve_pattern
from .workflow import parse_workflow_doc

SESSION_DIR = "session"
EVENTS_NAME = "events.jsonl"
SNAPSHOT_NAME = "snapshot.json"
SNAPSHOT_EVERY = 10
DEFAULT_MAX_ATTEMPTS = 3


class StageState(str, Enum):
    PENDING = "pending"
    RUNNING = "running"
    IN_REVIEW = "in_review"
    APPROVED = "approved"
    REVISION_REQUESTED = "revision_requested"
    STALE = "stale"
    SKIPPED = "skipped"


class Decision(str, Enum):
    APPROVE = "approve"
    REVISE = "revise"
    SKIP = "skip"


@dataclass
class StageStatus:
    state: StageState = StageState.PENDING
    last_attempt: int = 0
    last_gate: GateResult | None = None

    def as_dict(self) -> dict:
        return {
            "state": self.state.value,
            "last_attempt": self.last_attempt,
            "last_gate": self.last_gate.as_dict() if self.last_gate else None,
        }


@dataclass
class ReviewBundle:
    stage: str
    change_set: ChangeSet
    narration: str
    gate_result: GateResult | None = None

    def as_dict(self) -> dict:
        return {
            "stage": self.stage,
            "change_set": self.change_set.as_dict(),
            "narration": self.narration,
            "gate_result": self.gate_result.as_dict() if self.gate_result else None,
        }

    @classmethod
    def from_dict(cls, rec: dict) -> "ReviewBundle":
        return cls(
            stage=rec["stage"],
            change_set=ChangeSet.from_dict(rec["change_set"]),
            narration=rec["narration"],
            gate_result=(
                GateResult.from_dict(rec["gate_result"]) if rec.get("gate_result") else None
            ),
        )


@dataclass(frozen=True)
class SessionEvent:
    seq: int
    kind: str
    payload: dict
    at: str

    def as_dict(self) -> dict:
        return {"seq": self.seq, "kind": self.kind, "payload": self.payload, "at": self.at}


@dataclass(frozen=True)
class ReviewDecision:
    stage: str
    decision: Decision
    feedback: str | None = None


@dataclass
class FoldedState:
    """Everything derivable from the event log."""

    stage_status: dict[str, StageStatus] = field(default_factory=dict)
    pending_review: ReviewBundle | None = None
    pending_feedback: dict[str, str] = field(default_factory=dict)
    transcript_cursor: int = 0
    stale_nodes: set[str] = field(default_factory=set)


def _fold_one(state: FoldedState, event: SessionEvent, stage_outputs: dict[str, tuple[str, ...]]) -> None:
    payload = event.payload
    stage = payload.get("stage")
    status = state.stage_status.get(stage) if stage else None

    if event.kind == "invoked" and status:
        status.state = StageState.RUNNING
    elif event.kind == "agent_attempt" and status:
        status.last_attempt = payload.get("attempt", status.last_attempt)
        state.pending_feedback.pop(stage, None)
        if payload.get("error"):
            status.state = StageState.PENDING
        else:
            state.transcript_cursor += 1
    elif event.kind == "gate_run" and status:
        status.last_gate = GateResult.from_dict(payload["gate"])
    elif event.kind == "presented" and status:
        status.state = StageState.IN_REVIEW
        state.pending_review = ReviewBundle.from_dict(payload["bundle"])
    elif event.kind == "decision" and status:
        decision = Decision(payload["decision"])
        state.pending_review = None
        if decision is Decision.APPROVE:
            status.state = StageState.APPROVED
            for node in stage_outputs.get(stage, ()):
                state.stale_nodes.discard(node)
        elif decision is Decision.REVISE:
            status.state = StageState.REVISION_REQUESTED
            state.pending_feedback[stage] = payload.get("feedback") or ""
        else:
            status.state = StageState.SKIPPED
    elif event.kind == "staleness_marked":
        state.stale_nodes.update(payload.get("stale_nodes", ()))
        for name in payload.get("stages", ()):
            flagged = state.stage_status.get(name)
            if flagged and flagged.state is StageState.APPROVED:
                flagged.state = StageState.STALE
    # "advanced" is informational only.


def fold_events(
    stage_names: list[str],
    events: list[SessionEvent],
    stage_outputs: dict[str, tuple[str, ...]] | None = None,
) -> FoldedState:
    """Reconstruct session state purely from the event log."""
    state = FoldedState(
        stage_status={name: StageStatus() for name in stage_names}
    )
    outputs = stage_outputs or {}
    for event in events:
        _fold_one(state, event, outputs)
    return state


class CounterClock:
    """Deterministic clock for replay: fixed epoch plus one second per
    tick."""

    def __init__(self, start: str = "2000-01-01T00:00:00+00:00"):
        self._base = datetime.fromisoformat(start)
        self._ticks = 0

    def __call__(self) -> str:
        stamp = self._base + timedelta(seconds=self._ticks)
        self._ticks += 1
        return stamp.isoformat()


class Session:
    """Single-writer pipeline session over one project root."""

    def __init__(
        self,
        project: Project,
        config: ProjectConfig,
        graph: DependencyGraph,
        commands: dict[str, CommandSpec],
        max_attempts: int = DEFAULT_MAX_ATTEMPTS,
    ):
        self.project = project
        self.config = config
        self.graph = graph
        self.commands = commands
        self.max_attempts = max_attempts
        self._mutex = threading.RLock()
        self.events: list[SessionEvent] = []
        self.state = FoldedState(
            stage_status={name: StageStatus() for name in graph.stage_names}
        )
        self._load_events()

    # -- construction --------------------------------------------------------

    @classmethod
    def open(
        cls,
        project_root: Path | str,
        clock: Callable[[], str] | None = None,
        max_attempts: int = DEFAULT_MAX_ATTEMPTS,
    ) -> "Session":
        root = Path(project_root)
        if not (root / CONFIG_NAME).exists():
            raise NotAProject(f"no {CONFIG_NAME} in {root}")
        config = load_config(root)
        project = Project(root, clock=clock)
        commands, _failures = list_commands(root)
        by_name = {c.name: c for c in commands}
        workflow_path = root / config.workflow_doc
        if not workflow_path.exists():
            raise NotAProject(f"workflow document {config.workflow_doc} missing")
        spec = parse_workflow_doc(
            workflow_path.read_text(encoding="utf-8"), config.workflow_doc
        )
        graph = compile_graph(spec, list(by_name.values()), project_root=root)
        return cls(project, config, graph, by_name, max_attempts=max_attempts)

    # -- persistence -----------------------------------------------------------

    @property
    def _session_dir(self) -> Path:
        return self.project.state_dir / SESSION_DIR

    @property
    def _events_path(self) -> Path:
        return self._session_dir / EVENTS_NAME

    def _stage_outputs(self) -> dict[str, tuple[str, ...]]:
        return {w.name: w.outputs for w in self.graph.stages}

    def _load_events(self) -> None:
        self.events = []
        path = self._events_path
        if path.exists():
            for line in path.read_text(encoding="utf-8").splitlines():
                if not line.strip():
                    continue
                rec = json.loads(line)
                self.events.append(
                    SessionEvent(rec["seq"], rec["kind"], rec["payload"], rec["at"])
                )
        self.state = fold_events(
            self.graph.stage_names, self.events, self._stage_outputs()
        )

    def refresh(self) -> None:
        """Fold any events appended by another process since last load."""
        path = self._events_path
        on_disk = 0
        if path.exists():
            on_disk = sum(1 for line in path.read_text(encoding="utf-8").splitlines() if line.strip())
        if on_disk != len(self.events):
            self._load_events()

    def _emit(self, kind: str, payload: dict) -> SessionEvent:
        event = SessionEvent(
            seq=len(self.events) + 1,
            kind=kind,
            payload=payload,
            at=self.project.clock(),
        )
        self._session_dir.mkdir(parents=True, exist_ok=True)
        with self._events_path.open("a", encoding="utf-8") as fh:
            fh.write(json.dumps(event.as_dict(), ensure_ascii=False) + "\n")
        self.events.append(event)
        _fold_one(self.state, event, self._stage_outputs())
        if event.seq % SNAPSHOT_EVERY == 0:
            self._write_snapshot()
        return event

    def _write_snapshot(self) -> None:
        snapshot = {
            "seq": len(self.events),
            "stage_status": {
                name: status.as_dict() for name, status in self.state.stage_status.items()
            },
            "pending_review": (
                self.state.pending_review.as_dict() if self.state.pending_review else None
            ),
            "transcript_cursor": self.state.transcript_cursor,
            "stale_nodes": sorted(self.state.stale_nodes),
        }
        path = self._session_dir / SNAPSHOT_NAME
        path.write_text(json.dumps(snapshot, indent=2) + "\n", encoding="utf-8")

    class _FileLock:
        """Cross-process mutation lock via atomic lockfile creation."""

        def __init__(self, path: Path, timeout_s: float = 10.0):
            self.path = path
            self.timeout_s = timeout_s

        def __enter__(self):
            deadline = time.monotonic() + self.timeout_s
            self.path.parent.mkdir(parents=True, exist_ok=True)
            while True:
                try:
                    fd = os.open(self.path, os.O_CREAT | os.O_EXCL | os.O_WRONLY)
                    os.close(fd)
                    return self
                except FileExistsError:
                    if time.monotonic() > deadline:
                        raise TimeoutError(f"could not acquire {self.path}") from None
                    time.sleep(0.01)

        def __exit__(self, *exc):
            self.path.unlink(missing_ok=True)

    def _mutation(self):
        return self._FileLock(self._session_dir / "lock")

    # -- introspection ------------------------------------------------------------

    @property
    def stage_status(self) -> dict[str, StageStatus]:
        return self.state.stage_status

    @property
    def pending_review(self) -> ReviewBundle | None:
        return self.state.pending_review

    @property
    def transcript_cursor(self) -> int:
        return self.state.transcript_cursor

    def graph_view(self) -> DependencyGraph:
        """Current graph with disk freshness plus logical stale marks."""
        graph = refresh_freshness(self.graph, self.project.root)
        stale = {
            node_id: Freshness.STALE
            for node_id in self.state.stale_nodes
            if node_id in graph.nodes
        }
        return graph.with_freshness(stale)

    def stage_freshness(self, stage: str) -> str:
        wiring = self.graph.stage(stage)
        if wiring is None:
            raise UnknownStage(stage)
        view = self.graph_view()
        freshness = [view.nodes[n].freshness for n in wiring.outputs if n in view.nodes]
        if any(f is Freshness.STALE for f in freshness):
            return Freshness.STALE.value
        if any(f is Freshness.MISSING for f in freshness):
            return Freshness.MISSING.value
        return Freshness.FRESH.value

    def recommended(self) -> list[str]:
        return recommended_order(self.graph)

    def next_stage(self) -> str | None:
        resolved = (StageState.APPROVED, StageState.SKIPPED)
        for name in self.recommended():
            if self.state.stage_status[name].state not in resolved:
                return name
        return None

    def status_rows(self) -> list[dict]:
        rows = []
        for name in self.recommended():
            status = self.state.stage_status[name]
            rows.append(
                {
                    "stage": name,
                    "state": status.state.value,
                    "freshness": self.stage_freshness(name),
                    "last_attempt": status.last_attempt,
                    "optional": bool(self.graph.stage(name) and self.graph.stage(name).optional),
                }
            )
        return rows

    def default_backend(self) -> AgentBackend:
        if self.config.backend == "scripted":
            transcript_path = self.project.root / self.config.transcript_path
            if not transcript_path.exists():
                from .errors import ConfigError

                raise ConfigError(f"transcript file {self.config.transcript_path} missing")
            transcript = Transcript.load(transcript_path)
            return ScriptedBackend(transcript, cursor=self.state.transcript_cursor)
        from .agent import RemoteLLMBackend

        return RemoteLLMBackend(
            endpoint=self.config.remote.endpoint,
            model=self.config.remote.model,
            auth_token=self.config.remote.auth_token,
            timeout_s=self.config.remote.timeout_s,
        )

    # -- operations ------------------------------------------------------------------

    def _auto_ingest(self, command: CommandSpec) -> list[str]:
        """Register raw files matched by the command's data inputs so they
        enter provenance before the agent sees them."""
        ingested = []
        for ref in command.inputs:
            if ref.kind is not RefKind.DATA_PATH:
                continue
            for rel in resolve_pattern(self.project.root, ref.pattern):
                if not rel.startswith("data/raw/") or rel.endswith("/"):
                    continue
                if not self.project.data_store.is_registered(rel):
                    self.project.data_store.ingest_raw(rel)
                    ingested.append(rel)
        return ingested

    def _advisory_upstream(self, stage: str) -> list[str]:
        wiring = self.graph.stage(stage)
        consumed = set(wiring.consumes)
        resolved = (StageState.APPROVED, StageState.SKIPPED)
        return [
            w.name
            for w in sorted(self.graph.stages, key=lambda w: w.doc_index)
            if w.name != stage
            and consumed.intersection(w.outputs)
            and self.state.stage_status[w.name].state not in resolved
        ]

    def _stage_is_gated(self, stage: str) -> bool:
        if not self.config.gates:
            return False
        wiring = self.graph.stage(stage)
        return any(
            self.graph.nodes[n].layer is Layer.CODE for n in wiring.produces
        )

    def _is_terminal_report_stage(self, stage: str) -> bool:
        """Non-optional stage none of whose outputs feed another stage:
        the pipeline's final report."""
        wiring = self.graph.stage(stage)
        if wiring is None or wiring.optional:
            return False
        outputs = set(wiring.outputs)
        return not any(
            outputs.intersection(other.consumes)
            for other in self.graph.stages
            if other.name != stage
        )

    def _skipped_stage_note(self, stage: str, feedback: str | None) -> str | None:
        skipped = sorted(
            name
            for name, status in self.state.stage_status.items()
            if status.state is StageState.SKIPPED
        )
        if not skipped or not self._is_terminal_report_stage(stage):
            return feedback
        note = (
            "Stages skipped earlier in this run: "
            + ", ".join(skipped)
            + ". Record them in the report."
        )
        return f"{feedback}\n{note}" if feedback else note

    def invoke(self, stage: str, backend: AgentBackend | None = None) -> ReviewBundle:
        """Run one stage through the agent and park the result for review."""
        with self._mutex, self._mutation():
            self.refresh()
            if self.state.pending_review is not None:
                raise ReviewPending(
                    f"stage {self.state.pending_review.stage!r} is awaiting review"
                )
            if stage not in self.state.stage_status:
                raise UnknownStage(f"unknown stage {stage!r}")
            command = self.commands.get(stage)
            if command is None:
                raise UnknownStage(f"stage {stage!r} has no command artifact")
            backend = backend or self.default_backend()

            advisory = self._advisory_upstream(stage)
            ingested = self._auto_ingest(command)
            self._emit(
                "invoked",
                {"stage": stage, "advisory_unapproved_upstream": advisory, "ingested": ingested},
            )

            feedback = self._skipped_stage_note(
                stage, self.state.pending_feedback.get(stage)
            )
            start_attempt = self.state.stage_status[stage].last_attempt + 1
            try:
                if self._stage_is_gated(stage):
                    outcome = repair_loop(
                        command,
                        backend,
                        self.config.gates,
                        max_attempts=self.max_attempts,
                        project=self.project,
                        stage=stage,
                        start_attempt=start_attempt,
                        initial_feedback=feedback,
                        on_event=self._emit_repair_event,
                    )
                    last = outcome.attempts[-1]
                    bundle = ReviewBundle(
                        stage=stage,
                        change_set=last.change_set,
                        narration=last.response.narration,
                        gate_result=last.gate,
                    )
                else:
                    request = assemble_request(
                        command, self.project, feedback=feedback, attempt=start_attempt
                    )
                    response = backend.execute(request)
                    self._emit_repair_event(
                        "agent_attempt",
                        {
                            "stage": stage,
                            "attempt": start_attempt,
                            "feedback": feedback,
                            "narration": response.narration,
                        },
                    )
                    change_set = apply_response(response, self.project, stage)
                    bundle = ReviewBundle(
                        stage=stage,
                        change_set=change_set,
                        narration=response.narration,
                        gate_result=None,
                    )
            except LabflowError as exc:
                # Backend failures and rolled-back applications both land
                # here; the stage returns to pending with the attempt on
                # record.
                failed_attempt = max(
                    self.state.stage_status[stage].last_attempt, start_attempt
                )
                self._emit(
                    "agent_attempt",
                    {"stage": stage, "attempt": failed_attempt, "error": str(exc)},
                )
                raise

            self._emit("presented", {"stage": stage, "bundle": bundle.as_dict()})
            return bundle

    def _emit_repair_event(self, kind: str, payload: dict) -> None:
        if kind == "gate_run":
            payload = {
                "stage": payload["stage"],
                "attempt": payload["attempt"],
                "gate": {
                    "passed": payload["passed"],
                    "blocking": payload["blocking"],
                    "diagnostics": payload.get("diagnostics", payload["blocking"]),
                },
            }
        self._emit(kind, payload)

    def submit_review(
        self, decision: Decision | str, feedback: str | None = None
    ) -> str | None:
        """Resolve the pending review; returns the next recommended stage."""
        with self._mutex, self._mutation():
            self.refresh()
            decision = Decision(decision)
            bundle = self.state.pending_review
            if bundle is None:
                raise NoPendingReview("no review is pending")
            if decision is Decision.REVISE and not (feedback or "").strip():
                raise EmptyFeedback("revision requires feedback text")
            if (
                decision is Decision.APPROVE
                and bundle.gate_result is not None
                and not bundle.gate_result.passed
            ):
                raise GateBlocksApproval(
                    f"stage {bundle.stage!r} failed its quality gate; revise or skip"
                )
            payload = {
                "stage": bundle.stage,
                "decision": decision.value,
                "feedback": feedback,
            }
            wiring = self.graph.stage(bundle.stage)
            if decision is Decision.SKIP and wiring is not None and not wiring.optional:
                payload["warning"] = "skipped a non-optional stage"
            self._emit("decision", payload)
            next_stage = self.next_stage()
            self._emit("advanced", {"stage": bundle.stage, "next": next_stage})
            return next_stage

    def mark_changed(self, node_id: str) -> set[str]:
        """Propagate staleness from a changed artifact; approved stages
        downstream flip to stale."""
        with self._mutex, self._mutation():
            self.refresh()
            stale_nodes = stale_set(self.graph, node_id)
            artifact_nodes = {
                n for n in stale_nodes if self.graph.nodes[n].layer is not Layer.COMMAND
            }
            flagged = stages_to_rerun(self.graph, artifact_nodes)
            self._emit(
                "staleness_marked",
                {
                    "stage": None,
                    "changed": node_id,
                    "stale_nodes": sorted(artifact_nodes),
                    "stages": flagged,
                },
            )
            return set(flagged)

    def verify_consistency(self) -> bool:
        """Event-sourcing check: folded log equals live state."""
        folded = fold_events(self.graph.stage_names, self.events, self._stage_outputs())
        same_status = {
            name: status.as_dict() for name, status in folded.stage_status.items()
        } == {name: status.as_dict() for name, status in self.state.stage_status.items()}
        same_pending = (folded.pending_review is None) == (self.state.pending_review is None)
        if folded.pending_review and self.state.pending_review:
            same_pending = folded.pending_review.as_dict() == self.state.pending_review.as_dict()
        return same_status and same_pending


def replay(
    project_root: Path | str,
    transcript: Transcript,
    decisions: list[ReviewDecision],
    clock: Callable[[], str] | None = None,
    max_attempts: int = DEFAULT_MAX_ATTEMPTS,
) -> Session:
    """Drive the full loop non-interactively over a fresh scaffold.

    The result is a deterministic function of (scaffold, transcript,
    decisions); the default clock is a deterministic counter so repeated
    replays produce byte-identical state.
    """
    session = Session.open(
        project_root, clock=clock or CounterClock(), max_attempts=max_attempts
    )
    backend = ScriptedBackend(transcript, cursor=session.transcript_cursor)
    for decision in decisions:
        session.invoke(decision.stage, backend)
        session.submit_review(decision.decision, decision.feedback)
    if backend.cursor < len(transcript.entries):
        raise DecisionUnderflow(
            f"{len(transcript.entries) - backend.cursor} transcript entries "
            "left after all decisions were applied"
        )
    return session
