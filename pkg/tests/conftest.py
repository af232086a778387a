"""Shared fixtures: scaffolded projects, stub gate tools, scripted runs."""

from __future__ import annotations

import hashlib
import sys
import textwrap
from pathlib import Path

import pytest

from labflow import (
    CheckConfig,
    CounterClock,
    DiagnosticFormat,
    ProjectConfig,
    Session,
    Severity,
    save_config,
    scaffold,
)
from labflow.canonical import canonical_decisions, canonical_transcript, seed_raw_data


@pytest.fixture
def project_root(tmp_path: Path) -> Path:
    """A fresh scaffolded project with the sample raw file."""
    root = tmp_path / "proj"
    scaffold(root, clock=CounterClock())
    seed_raw_data(root)
    return root


@pytest.fixture
def session(project_root: Path) -> Session:
    return Session.open(project_root, clock=CounterClock("2000-01-02T00:00:00+00:00"))


@pytest.fixture
def canonical_run(project_root: Path):
    """Transcript and decisions for the full seven-stage scripted run."""
    return canonical_transcript(), canonical_decisions()


def make_stub_tool(directory: Path, name: str, body: str) -> CheckConfig:
    """Write a python stub check; run_checks appends the target dir as
    argv[1]."""
    directory.mkdir(parents=True, exist_ok=True)
    script = directory / f"{name}.py"
    script.write_text(textwrap.dedent(body), encoding="utf-8")
    return CheckConfig(
        name=name,
        command=(sys.executable, str(script)),
        diagnostic_format=DiagnosticFormat.GCC_STYLE,
        severity_threshold=Severity.ERROR,
    )


@pytest.fixture
def silent_pass_tool(tmp_path: Path) -> CheckConfig:
    return make_stub_tool(
        tmp_path / "tools-pass", "quiet", "import sys\nsys.exit(0)\n"
    )


@pytest.fixture
def bug_marker_tool(tmp_path: Path) -> CheckConfig:
    """Reports an error for every file under src/ containing 'BUG'."""
    return make_stub_tool(
        tmp_path / "tools-marker",
        "marker",
        """
        import sys
        from pathlib import Path

        target = Path(sys.argv[1])
        found = 0
        for path in sorted((target / "src").rglob("*.py")):
            for lineno, line in enumerate(path.read_text().splitlines(), 1):
                if "BUG" in line:
                    rel = path.relative_to(target)
                    print(f"{rel}:{lineno}:1: error: bug marker present")
                    found += 1
        sys.exit(1 if found else 0)
        """,
    )


def configure_scripted(root: Path, transcript, gates: list[CheckConfig] | None = None):
    """Point the project config at a saved transcript file."""
    transcript.save(root / "transcript.jsonl")
    config = ProjectConfig(
        backend="scripted",
        transcript_path="transcript.jsonl",
        gates=list(gates or []),
    )
    save_config(config, root)
    return config


def force_write(path: Path, content: str) -> None:
    """Tamper with a file even if the store write-protected it."""
    import stat

    if path.exists():
        path.chmod(path.stat().st_mode | stat.S_IWUSR)
    path.write_text(content)


def tree_hash(root: Path, exclude: tuple[str, ...] = ()) -> str:
    """Order-independent digest of every file under root."""
    h = hashlib.sha256()
    for path in sorted(root.rglob("*")):
        if not path.is_file():
            continue
        rel = path.relative_to(root).as_posix()
        if any(rel == e or rel.startswith(e + "/") for e in exclude):
            continue
        h.update(rel.encode("utf-8"))
        h.update(b"\0")
        h.update(path.read_bytes())
        h.update(b"\0")
    return h.hexdigest()


def session_fingerprint(root: Path) -> dict:
    """Semantic session state, timestamps excluded: stage states, doc
    versions and hashes, artifact records, working-tree digest."""
    session = Session.open(root)
    store = session.project.context_store
    docs = {}
    for doc_path in store.list_documents():
        head = store.head(doc_path)
        docs[doc_path] = (head.version, head.content_hash)
    artifacts = {
        r.artifact_path: (r.tier.value, r.content_hash, r.produced_by, r.sources, r.transformation_ref)
        for r in session.project.data_store.records()
    }
    return {
        "stages": {k: v.as_dict() for k, v in session.stage_status.items()},
        "docs": docs,
        "artifacts": artifacts,
        "tree": tree_hash(root, exclude=(".labflow", "transcript.jsonl", "labflow.json")),
    }
