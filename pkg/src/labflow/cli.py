"""Command-line entry points.

Every subcommand is a thin wrapper over the session runtime and stores;
no business logic lives here. Errors exit with distinct codes:

\b
  2   usage error
  3   not a project / bad config
  4   scaffold target not empty
  5   unknown stage, node or artifact
  6   a review is already pending
  7   review decision rejected (nothing pending, empty feedback, failing gate)
  8   agent backend failure (network, transcript mismatch)
  9   dependency cycle
  10  store integrity / provenance error
  11  artifact parse error
  1   anything else
"""

from __future__ import annotations

import sys
from pathlib import Path

import click

from . import errors as E
from .commands import list_commands
from .config import load_config
from .data_store import DataStore
from .graph import export_graph
from .project import Project
from .scaffold import scaffold as scaffold_project
from .session import Decision, Session

EXIT_CODES: list[tuple[type[Exception], int]] = [
    (E.NonEmptyTarget, 4),
    (E.ReviewPending, 6),
    (E.NoPendingReview, 7),
    (E.EmptyFeedback, 7),
    (E.GateBlocksApproval, 7),
    (E.BackendError, 8),
    (E.CycleDetected, 9),
    (E.UnknownStage, 5),
    (E.UnknownNode, 5),
    (E.UnknownCommand, 5),
    (E.NotRegistered, 5),
    (E.NotAProject, 3),
    (E.ConfigError, 3),
    (E.DataStoreError, 10),
    (E.CommandError, 11),
    (E.WorkflowError, 11),
    (E.LabflowError, 1),
]


def exit_code_for(exc: Exception) -> int:
    for exc_type, code in EXIT_CODES:
        if isinstance(exc, exc_type):
            return code
    return 1


def _fail(exc: Exception) -> None:
    click.echo(f"error: {exc}", err=True)
    sys.exit(exit_code_for(exc))


@click.group(help=__doc__)
@click.option(
    "--root",
    "-C",
    type=click.Path(path_type=Path),
    default=Path("."),
    help="Project root (default: current directory).",
)
@click.pass_context
def main(ctx: click.Context, root: Path):
    ctx.obj = root


def _session(root: Path) -> Session:
    return Session.open(root)


@main.command()
@click.pass_obj
def init(root: Path):
    """Scaffold a new project in ROOT (must be empty)."""
    try:
        created = scaffold_project(root)
    except E.LabflowError as exc:
        _fail(exc)
    for rel in created:
        click.echo(f"created {rel}")


@main.command()
@click.argument("stage")
@click.pass_obj
def run(root: Path, stage: str):
    """Invoke STAGE through the configured agent backend."""
    try:
        session = _session(root)
        bundle = session.invoke(stage)
    except E.LabflowError as exc:
        _fail(exc)
    click.echo(f"stage {stage} is in review ({len(bundle.change_set)} changes)")
    if bundle.gate_result is not None:
        click.echo(f"gate: {bundle.gate_result.status}")
    if bundle.narration:
        click.echo(bundle.narration)


@main.command()
@click.argument("decision", type=click.Choice(["approve", "revise", "skip"]))
@click.option("--message", "-m", default=None, help="Feedback for a revision.")
@click.pass_obj
def review(root: Path, decision: str, message: str | None):
    """Resolve the pending review: approve, revise or skip."""
    try:
        session = _session(root)
        next_stage = session.submit_review(Decision(decision), feedback=message)
    except E.LabflowError as exc:
        _fail(exc)
    click.echo(f"review: {decision}")
    click.echo(f"next recommended stage: {next_stage or '(none, workflow complete)'}")


@main.command()
@click.pass_obj
def status(root: Path):
    """One line per stage: name, state, freshness."""
    try:
        session = _session(root)
        rows = session.status_rows()
    except E.LabflowError as exc:
        _fail(exc)
    for row in rows:
        optional = " (optional)" if row["optional"] else ""
        click.echo(
            f"{row['stage']:<24} {row['state']:<20} {row['freshness']}{optional}"
        )


@main.command()
@click.option("--format", "fmt", type=click.Choice(["dot", "json"]), default="json")
@click.pass_obj
def graph(root: Path, fmt: str):
    """Export the compiled dependency graph."""
    try:
        session = _session(root)
        click.echo(export_graph(session.graph_view(), fmt), nl=False)
    except E.LabflowError as exc:
        _fail(exc)


@main.command()
@click.argument("artifact")
@click.pass_obj
def lineage(root: Path, artifact: str):
    """Provenance chain of a registered data artifact."""
    try:
        store = DataStore(root)
        trace = store.lineage(artifact)
    except E.LabflowError as exc:
        _fail(exc)
    if not trace.edges:
        click.echo(f"{trace.root} is a raw input (no upstream provenance)")
        return
    for child, parent, ref in trace.edges:
        via = f" via {ref}" if ref else ""
        click.echo(f"{child} <- {parent}{via}")


@main.command()
@click.pass_obj
def verify(root: Path):
    """Check every registered artifact against its recorded hash."""
    try:
        store = DataStore(root)
        report = store.verify_integrity()
    except E.LabflowError as exc:
        _fail(exc)
    for finding in report.findings:
        line = f"{finding.status:<14} {finding.artifact_path}"
        if finding.detail:
            line += f"  ({finding.detail})"
        if finding.severity == "critical":
            line += "  [CRITICAL]"
        click.echo(line)
    if not report.findings:
        click.echo("no registered artifacts")
    if not report.ok:
        sys.exit(10)


@main.command()
@click.pass_obj
def check(root: Path):
    """Run the configured quality gates by hand (gates also run
    automatically for agent code writes)."""
    try:
        config = load_config(root)
        if not config.gates:
            click.echo("no gates configured")
            return
        from .gates import gate_status, run_checks

        diagnostics = run_checks(config.gates, root)
        result = gate_status(diagnostics, config.gates)
    except E.LabflowError as exc:
        _fail(exc)
    for diag in diagnostics:
        click.echo(diag.render())
    click.echo(f"gate: {result.status}")
    if not result.passed:
        sys.exit(10)


@main.command()
@click.argument("query")
@click.pass_obj
def search(root: Path, query: str):
    """Keyword search over head versions of the context documents."""
    try:
        project = Project(root)
        results = project.context_store.search(query)
    except E.LabflowError as exc:
        _fail(exc)
    for doc_path, version, spans in results:
        for lineno, line in spans:
            click.echo(f"{doc_path}:v{version}:{lineno}: {line.strip()}")
    if not results:
        click.echo("no matches")


@main.command()
@click.option("--port", default=8787, type=int, help="Port to bind.")
@click.option("--host", default="127.0.0.1", help="Host to bind.")
@click.option(
    "--ui",
    "ui_dir",
    type=click.Path(path_type=Path),
    default=None,
    help="Directory of built dashboard assets to serve at /ui.",
)
@click.pass_obj
def serve(root: Path, port: int, host: str, ui_dir: Path | None):
    """Serve the review API (and optionally the dashboard) over HTTP."""
    try:
        session = _session(root)
    except E.LabflowError as exc:
        _fail(exc)
    import uvicorn

    from .api import create_app

    app = create_app(session, ui_dir=ui_dir)
    uvicorn.run(app, host=host, port=port, log_level="warning")


@main.command("commands")
@click.pass_obj
def show_commands(root: Path):
    """List parseable command artifacts and report failures."""
    try:
        specs, failures = list_commands(root)
    except E.LabflowError as exc:
        _fail(exc)
    for spec in specs:
        click.echo(f"{spec.name:<24} {spec.category.value:<10} {spec.description}")
    for failure in failures:
        click.echo(f"unparseable: {failure.path}: {failure.error}", err=True)
    if failures:
        sys.exit(11)


if __name__ == "__main__":
    main()
