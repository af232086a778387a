"""Append-only versioned document store: the project's research memory.

Head versions live as plain Markdown under ``docs/`` so the project stays
browsable; full history is content-addressed inside the engine state
directory and survives restarts. Cross-references are extracted from
Markdown links into docs/, data/, src/ or scripts/ targets and from bare
``@name.md`` command mentions.
"""

from __future__ import annotations

import hashlib
import json
import re
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Callable

from .errors import (
    DocumentNotFound,
    EmptyQuery,
    IdenticalContent,
    NoSuchVersion,
    PathOutsideDocs,
)
from .refs import normalize_pattern, pattern_matches

STATE_DIR = ".labflow"

_LINK_RE = re.compile(r"\[[^\]]*\]\(([^)\s]+)\)")
_MENTION_RE = re.compile(r"(?<![\w(/@.])@([a-z0-9]+(?:-[a-z0-9]+)*\.md)")
_REF_PREFIXES = ("docs/", "data/", "src/", "scripts/")


def digest(content: str | bytes) -> str:
    data = content.encode("utf-8") if isinstance(content, str) else content
    return hashlib.sha256(data).hexdigest()


def utc_now_iso() -> str:
    from datetime import datetime, timezone

    return datetime.now(timezone.utc).isoformat()


class AuthorKind(str, Enum):
    HUMAN = "human"
    AGENT = "agent"


@dataclass(frozen=True)
class Provenance:
    kind: AuthorKind
    stage: str = ""

    def as_dict(self) -> dict[str, str]:
        return {"kind": self.kind.value, "stage": self.stage}


@dataclass(frozen=True)
class CrossRef:
    """A reference from one document to another artifact or command."""

    target: str
    anchor: str | None = None

    def as_dict(self) -> dict[str, str | None]:
        return {"target": self.target, "anchor": self.anchor}


@dataclass(frozen=True)
class DocVersion:
    doc_path: str
    version: int
    content_hash: str
    created_at: str
    created_by: Provenance
    refs: tuple[CrossRef, ...]


def extract_refs(content: str) -> tuple[CrossRef, ...]:
    """Deterministic cross-reference extraction from Markdown text."""
    refs: list[CrossRef] = []
    seen: set[tuple[str, str | None]] = set()
    for match in _LINK_RE.finditer(content):
        raw = match.group(1)
        target, _, anchor = raw.partition("#")
        if not target.startswith(_REF_PREFIXES):
            continue
        key = (target, anchor or None)
        if key not in seen:
            seen.add(key)
            refs.append(CrossRef(target=target, anchor=anchor or None))
    for match in _MENTION_RE.finditer(content):
        key = (f"@{match.group(1)}", None)
        if key not in seen:
            seen.add(key)
            refs.append(CrossRef(target=f"@{match.group(1)}"))
    return tuple(refs)


class ContextStore:
    """Versioned Markdown documents under one project root.

    Concurrency: reads are safe anywhere; writes are serialized per
    document by the caller (the session runtime is single-writer).
    """

    def __init__(self, project_root: Path | str, clock: Callable[[], str] | None = None):
        self.root = Path(project_root)
        self.docs_dir = self.root / "docs"
        self.state_dir = self.root / STATE_DIR / "context"
        self.objects_dir = self.state_dir / "objects"
        self.manifest_dir = self.state_dir / "manifests"
        self._clock = clock or utc_now_iso

    # -- path helpers ---------------------------------------------------

    def _check_doc_path(self, doc_path: str) -> str:
        norm = normalize_pattern(doc_path)
        if not norm.startswith("docs/") or norm.endswith("/"):
            raise PathOutsideDocs(f"{doc_path!r} is not a document under docs/")
        return norm

    def _manifest_path(self, norm: str) -> Path:
        # docs/02-x.md -> manifests/02-x.md.jsonl (docs/ is implied; nested
        # dirs keep their structure)
        rel = norm[len("docs/"):]
        return self.manifest_dir / (rel + ".jsonl")

    def _load_manifest(self, norm: str) -> list[DocVersion]:
        path = self._manifest_path(norm)
        if not path.exists():
            return []
        versions: list[DocVersion] = []
        for line in path.read_text(encoding="utf-8").splitlines():
            if not line.strip():
                continue
            rec = json.loads(line)
            versions.append(
                DocVersion(
                    doc_path=norm,
                    version=rec["version"],
                    content_hash=rec["content_hash"],
                    created_at=rec["created_at"],
                    created_by=Provenance(
                        AuthorKind(rec["created_by"]["kind"]),
                        rec["created_by"]["stage"],
                    ),
                    refs=tuple(
                        CrossRef(r["target"], r.get("anchor")) for r in rec["refs"]
                    ),
                )
            )
        return versions

    # -- operations ------------------------------------------------------

    def write_document(
        self, doc_path: str, content: str, author: Provenance
    ) -> DocVersion:
        """Append a new version; history is never rewritten. Rejects a
        write byte-identical to the current head."""
        norm = self._check_doc_path(doc_path)
        versions = self._load_manifest(norm)
        content_hash = digest(content)
        if versions and versions[-1].content_hash == content_hash:
            raise IdenticalContent(
                f"{norm}: content identical to head version {versions[-1].version}"
            )

        version = DocVersion(
            doc_path=norm,
            version=len(versions) + 1,
            content_hash=content_hash,
            created_at=self._clock(),
            created_by=author,
            refs=extract_refs(content),
        )

        self.objects_dir.mkdir(parents=True, exist_ok=True)
        obj = self.objects_dir / content_hash
        if not obj.exists():
            obj.write_bytes(content.encode("utf-8"))

        manifest = self._manifest_path(norm)
        manifest.parent.mkdir(parents=True, exist_ok=True)
        record = {
            "version": version.version,
            "content_hash": version.content_hash,
            "created_at": version.created_at,
            "created_by": version.created_by.as_dict(),
            "refs": [r.as_dict() for r in version.refs],
        }
        with manifest.open("a", encoding="utf-8") as fh:
            fh.write(json.dumps(record, sort_keys=True) + "\n")

        head_file = self.root / norm
        head_file.parent.mkdir(parents=True, exist_ok=True)
        head_file.write_bytes(content.encode("utf-8"))
        return version

    def _read_object(self, content_hash: str) -> str:
        # Bytes round-trip exactly; no newline translation.
        return (self.objects_dir / content_hash).read_bytes().decode("utf-8")

    def read_document(self, doc_path: str, version: int | None = None) -> str:
        """Exact bytes of the requested version (head when omitted)."""
        norm = self._check_doc_path(doc_path)
        versions = self._load_manifest(norm)
        if not versions:
            raise DocumentNotFound(norm)
        if version is None:
            target = versions[-1]
        else:
            by_num = {v.version: v for v in versions}
            if version not in by_num:
                raise NoSuchVersion(f"{norm} has no version {version}")
            target = by_num[version]
        return self._read_object(target.content_hash)

    def head(self, doc_path: str) -> DocVersion:
        norm = self._check_doc_path(doc_path)
        versions = self._load_manifest(norm)
        if not versions:
            raise DocumentNotFound(norm)
        return versions[-1]

    def history(self, doc_path: str) -> list[DocVersion]:
        norm = self._check_doc_path(doc_path)
        versions = self._load_manifest(norm)
        if not versions:
            raise DocumentNotFound(norm)
        return versions

    def list_documents(self) -> list[str]:
        if not self.manifest_dir.exists():
            return []
        paths = [
            "docs/" + p.relative_to(self.manifest_dir).as_posix()[: -len(".jsonl")]
            for p in self.manifest_dir.rglob("*.jsonl")
        ]
        return sorted(paths)

    def exists(self, doc_path: str) -> bool:
        try:
            norm = self._check_doc_path(doc_path)
        except PathOutsideDocs:
            return False
        return bool(self._load_manifest(norm))

    def backlinks(self, target: str) -> list[tuple[str, int]]:
        """Head-version documents whose refs include the target, by path."""
        hits: list[tuple[str, int]] = []
        for doc_path in self.list_documents():
            head = self.head(doc_path)
            if any(ref.target == target for ref in head.refs):
                hits.append((doc_path, head.version))
        return hits

    def backlinks_matching(self, pattern: str) -> list[tuple[str, int]]:
        """Backlinks where targets may be matched by a glob pattern."""
        hits: list[tuple[str, int]] = []
        for doc_path in self.list_documents():
            head = self.head(doc_path)
            for ref in head.refs:
                if ref.target.startswith("@"):
                    matched = ref.target == pattern
                else:
                    matched = pattern_matches(pattern, ref.target)
                if matched:
                    hits.append((doc_path, head.version))
                    break
        return hits

    def search(self, query: str) -> list[tuple[str, int, list[tuple[int, str]]]]:
        """Case-insensitive keyword search over head versions only."""
        if not query.strip():
            raise EmptyQuery("search query is empty")
        needle = query.lower()
        results: list[tuple[str, int, list[tuple[int, str]]]] = []
        for doc_path in self.list_documents():
            head = self.head(doc_path)
            content = self._read_object(head.content_hash)
            spans = [
                (lineno, line)
                for lineno, line in enumerate(content.splitlines(), start=1)
                if needle in line.lower()
            ]
            if spans:
                results.append((doc_path, head.version, spans))
        return results
