"""Three-tier artifact store: immutable raw inputs, derived intermediates,
and outputs, with content hashing and provenance.

The index is a line-delimited JSON file with one record per artifact and a
stable field order, so registrations show up as reviewable diffs. Data
directories themselves stay byte-identical to whatever the stages wrote;
all metadata lives in the engine state directory.
"""

from __future__ import annotations

import hashlib
import json
import threading
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Callable

from .context_store import utc_now_iso
from .errors import (
    AlreadyRegistered,
    NotRegistered,
    ProvenanceError,
    RawTierWrite,
    UnknownSource,
    WrongTierPath,
)
from .refs import normalize_pattern

STATE_DIR = ".labflow"
INDEX_NAME = "artifacts.jsonl"

_RECORD_FIELDS = (
    "artifact_path",
    "tier",
    "content_hash",
    "registered_at",
    "produced_by",
    "sources",
    "transformation_ref",
)


class Tier(str, Enum):
    RAW = "raw"
    PROCESSED = "processed"
    OUTPUT = "output"


_TIER_PREFIX = {
    Tier.RAW: "data/raw/",
    Tier.PROCESSED: "data/processed/",
    Tier.OUTPUT: "data/output/",
}


def tier_of(path: str) -> Tier:
    for tier, prefix in _TIER_PREFIX.items():
        if path.startswith(prefix):
            return tier
    raise WrongTierPath(
        f"{path!r} is not under data/raw/, data/processed/ or data/output/"
    )


def file_digest(path: Path) -> str:
    h = hashlib.sha256()
    with path.open("rb") as fh:
        for chunk in iter(lambda: fh.read(65536), b""):
            h.update(chunk)
    return h.hexdigest()


@dataclass(frozen=True)
class ArtifactRecord:
    artifact_path: str
    tier: Tier
    content_hash: str
    registered_at: str
    produced_by: str | None = None
    sources: tuple[str, ...] = ()
    transformation_ref: str | None = None

    def as_dict(self) -> dict:
        return {
            "artifact_path": self.artifact_path,
            "tier": self.tier.value,
            "content_hash": self.content_hash,
            "registered_at": self.registered_at,
            "produced_by": self.produced_by,
            "sources": list(self.sources),
            "transformation_ref": self.transformation_ref,
        }

    @classmethod
    def from_dict(cls, rec: dict) -> "ArtifactRecord":
        return cls(
            artifact_path=rec["artifact_path"],
            tier=Tier(rec["tier"]),
            content_hash=rec["content_hash"],
            registered_at=rec["registered_at"],
            produced_by=rec.get("produced_by"),
            sources=tuple(rec.get("sources", ())),
            transformation_ref=rec.get("transformation_ref"),
        )


@dataclass(frozen=True)
class LineageTrace:
    """Transitive provenance of one artifact back to raw-tier roots.

    Edges are (child, parent, transformation_ref), sorted by child then
    parent; nodes lists every artifact on the trace exactly once."""

    root: str
    edges: tuple[tuple[str, str, str | None], ...]

    @property
    def nodes(self) -> list[str]:
        names = {self.root}
        for child, parent, _ in self.edges:
            names.add(child)
            names.add(parent)
        return sorted(names)


@dataclass
class IntegrityFinding:
    artifact_path: str
    status: str  # ok | hash-mismatch | missing-file
    severity: str  # info | warning | critical
    detail: str = ""


@dataclass
class IntegrityReport:
    findings: list[IntegrityFinding] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return all(f.status == "ok" for f in self.findings)

    def for_path(self, artifact_path: str) -> IntegrityFinding | None:
        for finding in self.findings:
            if finding.artifact_path == artifact_path:
                return finding
        return None


class DataStore:
    """Artifact index over one project root.

    Registrations are serialized by a store-wide lock; reads take a
    snapshot of the index.
    """

    def __init__(self, project_root: Path | str, clock: Callable[[], str] | None = None):
        self.root = Path(project_root)
        self.index_path = self.root / STATE_DIR / INDEX_NAME
        self._clock = clock or utc_now_iso
        self._write_lock = threading.Lock()

    # -- index io ----------------------------------------------------------

    def _load(self) -> dict[str, ArtifactRecord]:
        if not self.index_path.exists():
            return {}
        records: dict[str, ArtifactRecord] = {}
        for line in self.index_path.read_text(encoding="utf-8").splitlines():
            if not line.strip():
                continue
            rec = ArtifactRecord.from_dict(json.loads(line))
            records[rec.artifact_path] = rec
        return records

    def _save(self, records: dict[str, ArtifactRecord]) -> None:
        self.index_path.parent.mkdir(parents=True, exist_ok=True)
        lines = []
        for path in sorted(records):
            rec = records[path].as_dict()
            ordered = {k: rec[k] for k in _RECORD_FIELDS}
            lines.append(json.dumps(ordered, sort_keys=False))
        tmp = self.index_path.with_suffix(".tmp")
        tmp.write_text("\n".join(lines) + ("\n" if lines else ""), encoding="utf-8")
        tmp.replace(self.index_path)

    def snapshot_index_bytes(self) -> bytes | None:
        """Raw index bytes, for transactional rollback by the caller."""
        if not self.index_path.exists():
            return None
        return self.index_path.read_bytes()

    def restore_index_bytes(self, data: bytes | None) -> None:
        if data is None:
            if self.index_path.exists():
                self.index_path.unlink()
            return
        self.index_path.parent.mkdir(parents=True, exist_ok=True)
        self.index_path.write_bytes(data)

    # -- helpers ---------------------------------------------------------

    def _norm(self, artifact_path: str) -> str:
        norm = normalize_pattern(str(artifact_path))
        if not norm.startswith("data/"):
            raise WrongTierPath(f"{artifact_path!r} is not under data/")
        return norm

    def records(self) -> list[ArtifactRecord]:
        loaded = self._load()
        return [loaded[k] for k in sorted(loaded)]

    def get(self, artifact_path: str) -> ArtifactRecord | None:
        return self._load().get(self._norm(artifact_path))

    def is_registered(self, artifact_path: str) -> bool:
        return self.get(artifact_path) is not None

    # -- operations ---------------------------------------------------------

    def ingest_raw(self, artifact_path: str) -> ArtifactRecord:
        """Register an immutable raw input. Idempotent for identical
        bytes; changed bytes are a hard error, never an update."""
        norm = self._norm(artifact_path)
        if tier_of(norm) is not Tier.RAW:
            raise WrongTierPath(f"{norm!r} is not under data/raw/")
        file_path = self.root / norm
        if not file_path.is_file():
            raise WrongTierPath(f"{norm!r} does not exist as a file")
        content_hash = file_digest(file_path)

        with self._write_lock:
            records = self._load()
            existing = records.get(norm)
            if existing is not None:
                if existing.content_hash == content_hash:
                    return existing
                raise AlreadyRegistered(
                    f"{norm} already registered with hash "
                    f"{existing.content_hash[:12]}..., file now hashes "
                    f"{content_hash[:12]}... (raw inputs are immutable)"
                )
            record = ArtifactRecord(
                artifact_path=norm,
                tier=Tier.RAW,
                content_hash=content_hash,
                registered_at=self._clock(),
            )
            records[norm] = record
            self._save(records)
            try:
                # Best-effort OS-level write protection; hashing is the
                # real guarantee.
                file_path.chmod(file_path.stat().st_mode & ~0o222)
            except OSError:
                pass
            return record

    def register_derived(
        self,
        artifact_path: str,
        sources: list[str],
        produced_by: str,
        transformation_ref: str | None = None,
    ) -> ArtifactRecord:
        """Register a processed or output artifact with full provenance."""
        norm = self._norm(artifact_path)
        tier = tier_of(norm)
        if tier is Tier.RAW:
            raise RawTierWrite(
                f"{norm}: derived artifacts cannot land under data/raw/"
            )
        file_path = self.root / norm
        if not file_path.is_file():
            raise WrongTierPath(f"{norm!r} does not exist as a file")

        with self._write_lock:
            records = self._load()
            normalized_sources = []
            for source in sources:
                src_norm = self._norm(source)
                if src_norm == norm:
                    raise ProvenanceError(f"{norm} cannot be its own source")
                if src_norm not in records:
                    raise UnknownSource(f"{norm}: source {src_norm!r} not registered")
                normalized_sources.append(src_norm)
            self._check_acyclic(records, norm, normalized_sources)

            record = ArtifactRecord(
                artifact_path=norm,
                tier=tier,
                content_hash=file_digest(file_path),
                registered_at=self._clock(),
                produced_by=produced_by,
                sources=tuple(normalized_sources),
                transformation_ref=transformation_ref,
            )
            records[norm] = record
            self._save(records)
            return record

    @staticmethod
    def _check_acyclic(
        records: dict[str, ArtifactRecord], target: str, sources: list[str]
    ) -> None:
        # Walking ancestors of the proposed sources must never reach the
        # artifact being registered.
        stack = list(sources)
        seen: set[str] = set()
        while stack:
            current = stack.pop()
            if current == target:
                raise ProvenanceError(
                    f"registering {target} with these sources would create a cycle"
                )
            if current in seen:
                continue
            seen.add(current)
            rec = records.get(current)
            if rec is not None:
                stack.extend(rec.sources)

    def lineage(self, artifact_path: str) -> LineageTrace:
        """Full transitive trace to raw roots; deterministic edge order."""
        norm = self._norm(artifact_path)
        records = self._load()
        if norm not in records:
            raise NotRegistered(f"{norm} is not a registered artifact")

        edges: set[tuple[str, str, str | None]] = set()
        stack = [norm]
        visited: set[str] = set()
        while stack:
            current = stack.pop()
            if current in visited:
                continue
            visited.add(current)
            rec = records[current]
            for parent in rec.sources:
                edges.add((current, parent, rec.transformation_ref))
                stack.append(parent)
        return LineageTrace(root=norm, edges=tuple(sorted(edges, key=lambda e: (e[0], e[1]))))

    def verify_integrity(self, project_root: Path | str | None = None) -> IntegrityReport:
        """Hash every registered artifact against disk. Read-only."""
        root = Path(project_root) if project_root else self.root
        report = IntegrityReport()
        records = self._load()
        for path in sorted(records):
            rec = records[path]
            file_path = root / path
            if not file_path.is_file():
                severity = "critical" if rec.tier is Tier.RAW else "warning"
                report.findings.append(
                    IntegrityFinding(path, "missing-file", severity, "file not found")
                )
                continue
            actual = file_digest(file_path)
            if actual != rec.content_hash:
                severity = "critical" if rec.tier is Tier.RAW else "warning"
                report.findings.append(
                    IntegrityFinding(
                        path,
                        "hash-mismatch",
                        severity,
                        f"expected {rec.content_hash[:12]}..., found {actual[:12]}...",
                    )
                )
                continue
            report.findings.append(IntegrityFinding(path, "ok", "info"))
        return report
