"""labflow: spec-driven, human-in-the-loop orchestration for data research.

Markdown command artifacts and a workflow document compile into a typed
dependency graph; stages execute through a pluggable agent backend under
review checkpoints; every document and data artifact is versioned with
full provenance; the whole loop is event-sourced and replayable.
"""

from .agent import (
    AgentBackend,
    AgentRequest,
    AgentResponse,
    ChangeSet,
    DataNote,
    RemoteLLMBackend,
    RepairOutcome,
    ScriptedBackend,
    Transcript,
    TranscriptEntry,
    apply_response,
    assemble_request,
    repair_loop,
)
from .commands import (
    Category,
    CommandSpec,
    ValidationReport,
    list_commands,
    parse_command_file,
    serialize_command,
    validate_command,
)
from .config import CONFIG_NAME, ProjectConfig, load_config, save_config
from .context_store import (
    AuthorKind,
    ContextStore,
    CrossRef,
    DocVersion,
    Provenance,
    extract_refs,
)
from .data_store import (
    ArtifactRecord,
    DataStore,
    IntegrityReport,
    LineageTrace,
    Tier,
)
from .gates import (
    CheckConfig,
    Diagnostic,
    DiagnosticFormat,
    GateResult,
    Severity,
    gate_status,
    parse_gcc_style,
    parse_json_lines,
    run_checks,
)
from .graph import (
    DependencyGraph,
    EdgeKind,
    Freshness,
    GraphEdge,
    GraphNode,
    compile_graph,
    export_graph,
    load_graph_json,
    recommended_order,
    stale_set,
    stages_to_rerun,
)
from .project import Project
from .refs import Layer, RefKind, ResourceRef
from .scaffold import scaffold
from .session import (
    CounterClock,
    Decision,
    ReviewBundle,
    ReviewDecision,
    Session,
    SessionEvent,
    StageState,
    StageStatus,
    fold_events,
    replay,
)
from .workflow import StageDecl, WorkflowSpec, parse_workflow_doc, serialize_workflow

__version__ = "0.1.0"

__all__ = [
    "AgentBackend",
    "AgentRequest",
    "AgentResponse",
    "ArtifactRecord",
    "AuthorKind",
    "CONFIG_NAME",
    "Category",
    "ChangeSet",
    "CheckConfig",
    "CommandSpec",
    "ContextStore",
    "CounterClock",
    "CrossRef",
    "DataNote",
    "DataStore",
    "Decision",
    "DependencyGraph",
    "Diagnostic",
    "DiagnosticFormat",
    "DocVersion",
    "EdgeKind",
    "Freshness",
    "GateResult",
    "GraphEdge",
    "GraphNode",
    "IntegrityReport",
    "Layer",
    "LineageTrace",
    "Project",
    "ProjectConfig",
    "Provenance",
    "RefKind",
    "RemoteLLMBackend",
    "RepairOutcome",
    "ResourceRef",
    "ReviewBundle",
    "ReviewDecision",
    "ScriptedBackend",
    "Session",
    "SessionEvent",
    "Severity",
    "StageDecl",
    "StageState",
    "StageStatus",
    "Tier",
    "Transcript",
    "TranscriptEntry",
    "ValidationReport",
    "WorkflowSpec",
    "apply_response",
    "assemble_request",
    "compile_graph",
    "export_graph",
    "extract_refs",
    "fold_events",
    "gate_status",
    "list_commands",
    "load_config",
    "load_graph_json",
    "parse_command_file",
    "parse_gcc_style",
    "parse_json_lines",
    "parse_workflow_doc",
    "recommended_order",
    "repair_loop",
    "replay",
    "run_checks",
    "save_config",
    "scaffold",
    "serialize_command",
    "serialize_workflow",
    "stages_to_rerun",
    "stale_set",
    "validate_command",
]
