"""Resource references: the typed path patterns every layer shares.

A reference is a relative path or glob confined to the project root. Its
kind (and the graph layer of the node it becomes) is decided by the
top-level directory: docs/ is context, src/ and scripts/ are code, data/
is data, commands/ is the command layer. Unknown prefixes are rejected
rather than guessed.
"""

from __future__ import annotations

import glob as globlib
import posixpath
import re
from dataclasses import dataclass
from enum import Enum
from pathlib import Path

from .errors import InvalidRef


class RefKind(str, Enum):
    DATA_PATH = "data_path"
    CONTEXT_DOC = "context_doc"
    CODE_PATH = "code_path"


class Layer(str, Enum):
    COMMAND = "command"
    CONTEXT = "context"
    CODE = "code"
    DATA = "data"


_LAYER_BY_PREFIX = {
    "docs": Layer.CONTEXT,
    "src": Layer.CODE,
    "scripts": Layer.CODE,
    "data": Layer.DATA,
    "commands": Layer.COMMAND,
}

_KIND_BY_LAYER = {
    Layer.DATA: RefKind.DATA_PATH,
    Layer.CONTEXT: RefKind.CONTEXT_DOC,
    Layer.CODE: RefKind.CODE_PATH,
}


def normalize_pattern(pattern: str) -> str:
    """Collapse a relative pattern to canonical posix form.

    Trailing slashes are preserved: ``data/processed/`` names a directory
    node and must stay distinct from a file path spelling.
    """
    raw = pattern.strip()
    if not raw:
        raise InvalidRef("empty resource reference")
    had_slash = raw.endswith("/")
    norm = posixpath.normpath(raw.replace("\\", "/"))
    if norm.startswith("/") or raw.startswith("/"):
        raise InvalidRef(f"absolute path not allowed: {pattern!r}")
    if norm == ".." or norm.startswith("../") or norm == ".":
        raise InvalidRef(f"path escapes project root: {pattern!r}")
    return norm + "/" if had_slash else norm


def layer_for_path(pattern: str) -> Layer:
    """Classify a normalized pattern by its top-level directory."""
    norm = normalize_pattern(pattern)
    top = norm.split("/", 1)[0]
    layer = _LAYER_BY_PREFIX.get(top)
    if layer is None:
        raise InvalidRef(
            f"unrecognized top-level directory {top!r} in {pattern!r} "
            "(expected docs/, src/, scripts/, data/ or commands/)"
        )
    return layer


@dataclass(frozen=True)
class ResourceRef:
    """A validated relative path or glob plus its layer kind."""

    kind: RefKind
    pattern: str

    @classmethod
    def from_pattern(cls, pattern: str) -> "ResourceRef":
        norm = normalize_pattern(pattern)
        layer = layer_for_path(norm)
        kind = _KIND_BY_LAYER.get(layer)
        if kind is None:
            raise InvalidRef(
                f"{pattern!r} points at the commands directory; "
                "command references use the @name.md form"
            )
        return cls(kind=kind, pattern=norm)

    @property
    def layer(self) -> Layer:
        return layer_for_path(self.pattern)

    def __str__(self) -> str:  # pragma: no cover - repr convenience
        return self.pattern


def is_glob(pattern: str) -> bool:
    return any(ch in pattern for ch in "*?[")


def resolve_pattern(project_root: Path, pattern: str) -> list[str]:
    """List existing project files matched by a reference pattern.

    Directory references resolve to the files beneath them (or to the
    directory itself when it exists but is empty); globs expand with
    ``**`` support. Results are project-relative posix paths, sorted.
    """
    norm = normalize_pattern(pattern)
    root = project_root.resolve()
    bare = norm.rstrip("/")
    target = root / bare

    def _rel(p: Path) -> str:
        return p.relative_to(root).as_posix()

    if not is_glob(bare):
        if target.is_dir():
            files = sorted(_rel(f) for f in target.rglob("*") if f.is_file())
            return files if files else [norm]
        if target.is_file():
            return [bare]
        return []

    matches: list[str] = []
    for hit in globlib.glob(str(root / bare), recursive=True):
        p = Path(hit)
        if p.is_file():
            matches.append(_rel(p))
    return sorted(matches)


def _translate_glob(norm: str) -> "re.Pattern[str]":
    """Compile a normalized glob into a regex. ``*`` and ``?`` stay within
    one path segment; a bare ``**`` segment crosses separators."""
    parts: list[str] = []
    for segment in norm.split("/"):
        if segment == "**":
            parts.append(".*")
            continue
        piece = []
        for ch in segment:
            if ch == "*":
                piece.append("[^/]*")
            elif ch == "?":
                piece.append("[^/]")
            else:
                piece.append(re.escape(ch))
        parts.append("".join(piece))
    return re.compile("/".join(parts) + r"\Z")


def pattern_matches(pattern: str, path: str) -> bool:
    """Glob-match a stored path against a reference pattern (no disk IO).

    Directory patterns match any path beneath them; ``**`` crosses
    directory boundaries the way shell recursion does.
    """
    norm = normalize_pattern(pattern)
    candidate = normalize_pattern(path)
    if norm.endswith("/"):
        return candidate == norm or candidate.startswith(norm)
    if not is_glob(norm):
        return candidate.rstrip("/") == norm.rstrip("/")
    return bool(_translate_glob(norm).match(candidate.rstrip("/")))
