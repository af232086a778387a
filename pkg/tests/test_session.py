"""Session runtime: the review loop, staleness, replay, event sourcing."""

from __future__ import annotations

import random
from pathlib import Path

import pytest

from labflow import (
    AgentResponse,
    CounterClock,
    Decision,
    ScriptedBackend,
    Session,
    StageState,
    Transcript,
    TranscriptEntry,
    fold_events,
    replay,
    scaffold,
    stale_set,
    stages_to_rerun,
)
from labflow.canonical import (
    canonical_decisions,
    canonical_transcript,
    seed_raw_data,
)
from labflow.errors import (
    EmptyFeedback,
    GateBlocksApproval,
    NoPendingReview,
    ReviewPending,
    TranscriptMismatch,
    UnknownNode,
    UnknownStage,
)
from labflow.scaffold import CANONICAL_STAGES
from conftest import configure_scripted, tree_hash

CONTEXT_BY_STAGE = {s["name"]: s["context"] for s in CANONICAL_STAGES}


class RecordingBackend:
    """Wraps another backend and keeps every request it saw."""

    def __init__(self, inner):
        self.inner = inner
        self.requests = []

    def execute(self, request):
        self.requests.append(request)
        return self.inner.execute(request)


class ContextWriterBackend:
    """Deterministic minimal backend: writes the stage's context document."""

    def execute(self, request):
        doc = CONTEXT_BY_STAGE[request.command.name]
        return AgentResponse(
            doc_writes=((doc, f"# {request.command.name}\n\nattempt {request.attempt}\n"),),
            narration=f"ran {request.command.name} attempt {request.attempt}",
        )


def one_stage_transcript(stage: str, attempts: int = 1) -> Transcript:
    entries = [
        TranscriptEntry(
            stage,
            i,
            AgentResponse(
                doc_writes=(
                    (CONTEXT_BY_STAGE[stage], f"# {stage}\n\nrevision {i}\n"),
                ),
                narration=f"{stage} attempt {i}",
            ),
        )
        for i in range(1, attempts + 1)
    ]
    return Transcript(entries=entries)


class TestInvoke:
    def test_invoke_creates_context_doc_and_enters_review(self, session: Session):
        backend = ScriptedBackend(one_stage_transcript("raw-data-analysis"))
        bundle = session.invoke("raw-data-analysis", backend)
        assert session.stage_status["raw-data-analysis"].state is StageState.IN_REVIEW
        assert session.pending_review is not None
        assert session.project.context_store.exists("docs/02-raw-data-analysis.md")
        assert bundle.narration == "raw-data-analysis attempt 1"

    def test_second_invoke_blocked_while_review_pending(self, session: Session):
        session.invoke(
            "raw-data-analysis", ScriptedBackend(one_stage_transcript("raw-data-analysis"))
        )
        with pytest.raises(ReviewPending):
            session.invoke(
                "preprocess", ScriptedBackend(one_stage_transcript("preprocess"))
            )

    def test_unknown_stage(self, session: Session):
        with pytest.raises(UnknownStage):
            session.invoke("mystery", ContextWriterBackend())

    def test_out_of_order_invoke_succeeds_with_advisory(self, session: Session):
        session.invoke("run-experiments", ContextWriterBackend())
        invoked = [e for e in session.events if e.kind == "invoked"][-1]
        advisory = invoked.payload["advisory_unapproved_upstream"]
        assert "preprocess" in advisory and "code-implementation" in advisory

    def test_in_order_invoke_has_no_advisory(self, session: Session):
        session.invoke("raw-data-analysis", ContextWriterBackend())
        invoked = [e for e in session.events if e.kind == "invoked"][-1]
        assert invoked.payload["advisory_unapproved_upstream"] == []

    def test_backend_error_returns_stage_to_pending(self, session: Session):
        with pytest.raises(TranscriptMismatch):
            session.invoke("raw-data-analysis", ScriptedBackend(Transcript(entries=[])))
        assert session.stage_status["raw-data-analysis"].state is StageState.PENDING
        assert session.pending_review is None
        attempts = [e for e in session.events if e.kind == "agent_attempt"]
        assert attempts and attempts[-1].payload.get("error")

    def test_invoke_auto_ingests_raw_inputs(self, session: Session):
        session.invoke("raw-data-analysis", ContextWriterBackend())
        assert session.project.data_store.is_registered("data/raw/boston.csv")

    def test_event_order_per_invoke(self, session: Session):
        session.invoke("raw-data-analysis", ContextWriterBackend())
        session.submit_review(Decision.APPROVE)
        kinds = [e.kind for e in session.events]
        assert kinds[:4] == ["invoked", "agent_attempt", "presented", "decision"]


class TestSubmitReview:
    def test_approve_reports_next_stage(self, session: Session):
        session.invoke("raw-data-analysis", ContextWriterBackend())
        next_stage = session.submit_review(Decision.APPROVE)
        assert session.stage_status["raw-data-analysis"].state is StageState.APPROVED
        assert next_stage == "preprocess"
        assert session.pending_review is None

    def test_no_pending_review(self, session: Session):
        with pytest.raises(NoPendingReview):
            session.submit_review(Decision.APPROVE)

    def test_revise_requires_feedback(self, session: Session):
        session.invoke("raw-data-analysis", ContextWriterBackend())
        with pytest.raises(EmptyFeedback):
            session.submit_review(Decision.REVISE, feedback="   ")

    def test_revise_threads_feedback_into_next_request(self, session: Session):
        transcript = one_stage_transcript("raw-data-analysis", attempts=2)
        backend = RecordingBackend(ScriptedBackend(transcript))
        session.invoke("raw-data-analysis", backend)
        session.submit_review(Decision.REVISE, feedback="use median imputation")
        assert (
            session.stage_status["raw-data-analysis"].state
            is StageState.REVISION_REQUESTED
        )
        session.invoke("raw-data-analysis", backend)
        assert backend.requests[-1].attempt == 2
        assert backend.requests[-1].feedback == "use median imputation"
        assert "use median imputation" in backend.requests[-1].serialize()

    def test_feedback_consumed_after_one_reinvoke(self, session: Session):
        transcript = one_stage_transcript("raw-data-analysis", attempts=3)
        backend = RecordingBackend(ScriptedBackend(transcript))
        session.invoke("raw-data-analysis", backend)
        session.submit_review(Decision.REVISE, feedback="tighten the summary")
        session.invoke("raw-data-analysis", backend)
        session.submit_review(Decision.REVISE, feedback="shorter")
        session.invoke("raw-data-analysis", backend)
        assert backend.requests[1].feedback == "tighten the summary"
        assert backend.requests[2].feedback == "shorter"

    def test_skip_optional_stage(self, session: Session):
        session.invoke("gradio-app", ContextWriterBackend())
        session.submit_review(Decision.SKIP)
        assert session.stage_status["gradio-app"].state is StageState.SKIPPED
        decision = [e for e in session.events if e.kind == "decision"][-1]
        assert "warning" not in decision.payload

    def test_skip_non_optional_stage_warns(self, session: Session):
        session.invoke("preprocess", ContextWriterBackend())
        session.submit_review(Decision.SKIP)
        assert session.stage_status["preprocess"].state is StageState.SKIPPED
        decision = [e for e in session.events if e.kind == "decision"][-1]
        assert "non-optional" in decision.payload["warning"]

    def test_final_report_request_records_skipped_stages(self, session: Session):
        backend = RecordingBackend(ContextWriterBackend())
        session.invoke("preprocess", backend)
        session.submit_review(Decision.SKIP)
        session.invoke("research-report", backend)
        feedback = backend.requests[-1].feedback or ""
        assert "preprocess" in feedback and "skipped" in feedback.lower()

    def test_non_terminal_requests_omit_skip_note(self, session: Session):
        backend = RecordingBackend(ContextWriterBackend())
        session.invoke("preprocess", backend)
        session.submit_review(Decision.SKIP)
        session.invoke("research-plan", backend)
        assert backend.requests[-1].feedback is None


class TestMarkChanged:
    def _full_run(self, root: Path) -> Session:
        configure_scripted(root, canonical_transcript())
        return replay(root, canonical_transcript(), canonical_decisions())

    def test_docs03_staleness_matches_oracle(self, project_root: Path):
        session = self._full_run(project_root)
        affected = session.mark_changed("docs/03-preprocess-plan.md")
        stale_nodes = stale_set(session.graph, "docs/03-preprocess-plan.md")
        assert affected == set(stages_to_rerun(session.graph, stale_nodes))
        for name in affected:
            state = session.stage_status[name].state
            if name == "gradio-app":
                assert state is StageState.PENDING  # never approved
            else:
                assert state is StageState.STALE

    def test_sink_document_changes_nothing(self, project_root: Path):
        session = self._full_run(project_root)
        assert session.mark_changed("docs/10-research-report.md") == set()

    def test_marking_is_idempotent(self, project_root: Path):
        session = self._full_run(project_root)
        session.mark_changed("docs/03-preprocess-plan.md")
        snapshot = {k: v.state for k, v in session.stage_status.items()}
        session.mark_changed("docs/03-preprocess-plan.md")
        assert {k: v.state for k, v in session.stage_status.items()} == snapshot

    def test_unknown_node(self, session: Session):
        with pytest.raises(UnknownNode):
            session.mark_changed("docs/99-none.md")

    def test_stale_stage_can_rerun_and_reapprove(self, project_root: Path):
        session = self._full_run(project_root)
        session.mark_changed("docs/05-research-plan.md")
        assert session.stage_status["experiment-analysis"].state is StageState.STALE
        # Continuation transcript: full history plus the re-run entry, with
        # the cursor positioned past everything already consumed.
        extended = Transcript(
            entries=canonical_transcript().entries
            + [
                TranscriptEntry(
                    "experiment-analysis",
                    2,
                    AgentResponse(
                        doc_writes=(("docs/09-experiment-report.md", "# Updated\n"),)
                    ),
                )
            ]
        )
        backend = ScriptedBackend(extended, cursor=session.transcript_cursor)
        session.invoke("experiment-analysis", backend)
        session.submit_review(Decision.APPROVE)
        assert session.stage_status["experiment-analysis"].state is StageState.APPROVED


class TestGatedInvoke:
    def test_failing_gate_blocks_approval(self, project_root: Path, bug_marker_tool):
        transcript = Transcript(
            entries=[
                TranscriptEntry(
                    "code-implementation",
                    i,
                    AgentResponse(file_writes=(("src/models.py", f"v{i}  # BUG\n"),)),
                )
                for i in (1, 2, 3)
            ]
        )
        configure_scripted(project_root, transcript, gates=[bug_marker_tool])
        session = Session.open(project_root, clock=CounterClock())
        bundle = session.invoke("code-implementation")
        assert bundle.gate_result is not None and not bundle.gate_result.passed
        with pytest.raises(GateBlocksApproval):
            session.submit_review(Decision.APPROVE)
        session.submit_review(Decision.SKIP)

    def test_gate_runs_logged(self, project_root: Path, bug_marker_tool):
        transcript = Transcript(
            entries=[
                TranscriptEntry(
                    "code-implementation",
                    1,
                    AgentResponse(file_writes=(("src/models.py", "clean = 1\n"),)),
                )
            ]
        )
        configure_scripted(project_root, transcript, gates=[bug_marker_tool])
        session = Session.open(project_root, clock=CounterClock())
        bundle = session.invoke("code-implementation")
        assert bundle.gate_result is not None and bundle.gate_result.passed
        assert [e.kind for e in session.events].count("gate_run") == 1


class TestReplay:
    def test_canonical_replay_produces_file_layout(self, project_root: Path):
        configure_scripted(project_root, canonical_transcript())
        session = replay(project_root, canonical_transcript(), canonical_decisions())
        for doc in (
            "docs/02-raw-data-analysis.md",
            "docs/03-preprocess-plan.md",
            "docs/05-research-plan.md",
            "docs/06-code-implementation.md",
            "docs/08-experiment-log.md",
            "docs/09-experiment-report.md",
            "docs/10-research-report.md",
        ):
            assert (project_root / doc).is_file(), doc
        assert (project_root / "data/processed/train.csv").is_file()
        assert (project_root / "data/output/results/metrics.json").is_file()
        assert session.verify_consistency()

    def test_empty_replay_leaves_scaffold_unchanged(self, project_root: Path):
        configure_scripted(project_root, Transcript(entries=[]))
        before = tree_hash(project_root)
        replay(project_root, Transcript(entries=[]), [])
        assert tree_hash(project_root) == before

    def test_replay_twice_is_byte_identical(self, tmp_path: Path):
        def run(base: Path) -> str:
            scaffold(base, clock=CounterClock())
            seed_raw_data(base)
            configure_scripted(base, canonical_transcript())
            replay(base, canonical_transcript(), canonical_decisions())
            return tree_hash(base)

        assert run(tmp_path / "a") == run(tmp_path / "b")

    def test_decision_underflow(self, project_root: Path):
        configure_scripted(project_root, canonical_transcript())
        from labflow.errors import DecisionUnderflow

        with pytest.raises(DecisionUnderflow):
            replay(project_root, canonical_transcript(), canonical_decisions()[:3])


class TestEventSourcing:
    def test_fold_matches_live_state_through_canonical_run(self, project_root: Path):
        configure_scripted(project_root, canonical_transcript())
        session = replay(project_root, canonical_transcript(), canonical_decisions())
        folded = fold_events(
            session.graph.stage_names,
            session.events,
            {w.name: w.outputs for w in session.graph.stages},
        )
        assert {k: v.as_dict() for k, v in folded.stage_status.items()} == {
            k: v.as_dict() for k, v in session.stage_status.items()
        }

    def test_resume_from_disk_mid_pipeline(self, project_root: Path):
        configure_scripted(project_root, canonical_transcript())
        first = Session.open(project_root, clock=CounterClock())
        first.invoke("raw-data-analysis")
        first.submit_review(Decision.APPROVE)

        resumed = Session.open(project_root, clock=CounterClock("2000-01-03T00:00:00+00:00"))
        assert resumed.stage_status["raw-data-analysis"].state is StageState.APPROVED
        assert resumed.transcript_cursor == 1
        resumed.invoke("preprocess")
        resumed.submit_review(Decision.APPROVE)
        assert resumed.stage_status["preprocess"].state is StageState.APPROVED

    def test_randomized_operations_keep_invariants(self, project_root: Path):
        rng = random.Random(29)
        session = Session.open(project_root, clock=CounterClock())
        backend = ContextWriterBackend()
        stages = session.graph.stage_names
        nodes = sorted(session.graph.nodes)

        for _ in range(120):
            op = rng.choice(["invoke", "review", "mark"])
            try:
                if op == "invoke":
                    session.invoke(rng.choice(stages), backend)
                elif op == "review":
                    decision = rng.choice(list(Decision))
                    session.submit_review(decision, feedback="because")
                else:
                    session.mark_changed(rng.choice(nodes))
            except (ReviewPending, NoPendingReview, UnknownStage, UnknownNode):
                pass
            # Single pending review, always.
            in_review = [
                s for s, st in session.stage_status.items() if st.state is StageState.IN_REVIEW
            ]
            assert len(in_review) <= 1
            assert (session.pending_review is not None) == bool(in_review)
            assert session.verify_consistency()

        # Approve only via in_review; stale only from approved.
        state = {name: StageState.PENDING for name in stages}
        for event in session.events:
            if event.kind == "presented":
                state[event.payload["stage"]] = StageState.IN_REVIEW
            elif event.kind == "decision":
                stage = event.payload["stage"]
                if event.payload["decision"] == "approve":
                    assert state[stage] is StageState.IN_REVIEW
                    state[stage] = StageState.APPROVED
                elif event.payload["decision"] == "revise":
                    state[stage] = StageState.REVISION_REQUESTED
                else:
                    state[stage] = StageState.SKIPPED
            elif event.kind == "staleness_marked":
                for stage in event.payload["stages"]:
                    if state[stage] is StageState.APPROVED:
                        state[stage] = StageState.STALE
            elif event.kind == "invoked":
                state[event.payload["stage"]] = StageState.RUNNING
            elif event.kind == "agent_attempt" and event.payload.get("error"):
                state[event.payload["stage"]] = StageState.PENDING
