"""Project handle: one root directory plus its stores.

Everything the engine persists lives either in the visible project tree
(docs/, data/, src/, scripts/, commands/) or under the engine state
directory ``.labflow/``.
"""

from __future__ import annotations

from pathlib import Path
from typing import Callable

from .context_store import ContextStore, utc_now_iso
from .data_store import DataStore

STATE_DIR = ".labflow"


class Project:
    def __init__(self, root: Path | str, clock: Callable[[], str] | None = None):
        self.root = Path(root).resolve()
        self.clock = clock or utc_now_iso
        self.context_store = ContextStore(self.root, clock=self.clock)
        self.data_store = DataStore(self.root, clock=self.clock)

    @property
    def state_dir(self) -> Path:
        return self.root / STATE_DIR

    def inside_root(self, rel_path: str) -> Path:
        """Resolve a relative path and refuse anything escaping the root."""
        candidate = (self.root / rel_path).resolve()
        if candidate != self.root and self.root not in candidate.parents:
            raise ValueError(f"{rel_path!r} escapes the project root")
        return candidate
