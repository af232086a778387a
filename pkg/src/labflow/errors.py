"""Exception hierarchy for the labflow engine.

Every failure mode the engine reports has a distinct class here so callers
(CLI exit codes, HTTP status mapping, tests) can dispatch on type rather
than parsing messages.
"""

from __future__ import annotations


class LabflowError(Exception):
    """Base class for all engine errors."""


# -- command parsing -------------------------------------------------------

class CommandError(LabflowError):
    """Base for command-artifact parsing and validation failures."""


class MissingFrontMatter(CommandError):
    """Command file has no leading ``---`` front-matter block."""


class UnknownCategory(CommandError):
    """Front-matter ``category`` is not one of academic/quality/project."""


class InvalidRef(CommandError):
    """A resource reference is absolute, escapes the project root, or has
    an unrecognized top-level directory."""


class EmptyBody(CommandError):
    """Command file has front-matter but no prompt body."""


class InvalidName(CommandError):
    """Command name missing or not lowercase-hyphenated."""


class NotAProject(LabflowError):
    """Expected project structure (commands directory, config) is absent."""


# -- workflow document ------------------------------------------------------

class WorkflowError(LabflowError):
    """Base for workflow-document parsing failures."""


class NoWorkflowSection(WorkflowError):
    """Document lacks a ``## Workflow`` section."""


class DuplicateStage(WorkflowError):
    """Two workflow list items name the same command."""


class DanglingMetadata(WorkflowError):
    """An indented metadata line appears before any stage item."""


# -- dependency graph -------------------------------------------------------

class GraphError(LabflowError):
    """Base for graph compilation and query failures."""


class UnknownCommand(GraphError):
    """A stage names a command with no parsed CommandSpec."""


class CycleDetected(GraphError):
    """Artifact or stage dependencies contain a cycle."""

    def __init__(self, message: str, cycle: list[str] | None = None):
        super().__init__(message)
        self.cycle = cycle or []


class UnknownNode(GraphError):
    """Node id not present in the graph."""


class UnknownLayer(GraphError):
    """Path has a top-level directory outside the layer conventions."""


# -- context store ----------------------------------------------------------

class ContextStoreError(LabflowError):
    """Base for document-store failures."""


class PathOutsideDocs(ContextStoreError):
    """Document path is not under the docs/ directory."""


class IdenticalContent(ContextStoreError):
    """New version is byte-identical to the current head."""


class DocumentNotFound(ContextStoreError):
    """No such document in the store."""


class NoSuchVersion(ContextStoreError):
    """Document exists but the requested version does not."""


class EmptyQuery(ContextStoreError):
    """Search query is empty."""


# -- data store ---------------------------------------------------------------

class DataStoreError(LabflowError):
    """Base for artifact-store failures."""


class WrongTierPath(DataStoreError):
    """Artifact path does not match the expected data tier prefix."""


class AlreadyRegistered(DataStoreError):
    """Raw artifact re-ingested with different bytes."""


class UnknownSource(DataStoreError):
    """A provenance source is not a registered artifact."""


class RawTierWrite(DataStoreError):
    """Attempt to register a derived artifact under data/raw/."""


class NotRegistered(DataStoreError):
    """Artifact path has no record in the store."""


class ProvenanceError(DataStoreError):
    """Registration would corrupt provenance (cycle or self-reference)."""


# -- quality gates -------------------------------------------------------------

class GateError(LabflowError):
    """Base for quality-gate execution failures."""


class ToolNotFound(GateError):
    """Configured check command is not executable."""


class ParseFailure(GateError):
    """Tool output did not match the declared diagnostic format."""

    def __init__(self, message: str, raw_output: str = ""):
        super().__init__(message)
        self.raw_output = raw_output


# -- agent gateway --------------------------------------------------------------

class AgentError(LabflowError):
    """Base for agent-gateway failures."""


class PathOutsideProject(AgentError):
    """Agent response writes outside the project root."""


class RawTierViolation(AgentError):
    """Agent response targets the immutable data/raw/ tier."""


class BackendError(AgentError):
    """Agent backend failed (network, timeout, malformed reply, transcript
    mismatch)."""


class TranscriptMismatch(BackendError):
    """Scripted backend request does not match the next transcript entry."""


# -- session runtime --------------------------------------------------------------

class SessionError(LabflowError):
    """Base for session state-machine violations."""


class ReviewPending(SessionError):
    """An earlier stage is still awaiting review."""


class UnknownStage(SessionError):
    """Stage name is not part of the compiled workflow."""


class NoPendingReview(SessionError):
    """Review decision submitted with nothing to review."""


class EmptyFeedback(SessionError):
    """Revision requested without feedback text."""


class GateBlocksApproval(SessionError):
    """Approve submitted while the stage's last gate run is failing."""


class DecisionUnderflow(SessionError):
    """Replay ran out of review decisions before the transcript ended."""


# -- scaffolding / config ------------------------------------------------------------

class NonEmptyTarget(LabflowError):
    """Scaffold target directory already contains files."""


class ConfigError(LabflowError):
    """Project configuration missing or invalid."""
