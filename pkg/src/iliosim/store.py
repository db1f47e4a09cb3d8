"""Directory-backed document store: one canonical JSON file per session."""

from __future__ import annotations

import json
import re
from pathlib import Path

from .documents import canonical_json, parse_session_document
from .errors import CorruptDocument, NotFound

_ID_RE = re.compile(r"^s-(\d{6})$")


class SessionStore:
    """Stores canonical-serialized session documents under sequential ids."""

    def __init__(self, root: str | Path):
        self.root = Path(root)
        self.root.mkdir(parents=True, exist_ok=True)

    def _path(self, doc_id: str) -> Path:
        return self.root / f"{doc_id}.json"

    def list_ids(self) -> list[str]:
        ids = []
        for path in self.root.glob("s-*.json"):
            if _ID_RE.match(path.stem):
                ids.append(path.stem)
        return sorted(ids)

    def next_id(self) -> str:
        ids = self.list_ids()
        last = int(_ID_RE.match(ids[-1]).group(1)) if ids else 0
        return f"s-{last + 1:06d}"

    def save(self, doc: dict) -> str:
        """Store a new document under the next sequential id."""
        doc = parse_session_document(doc)
        doc_id = self.next_id()
        self.save_as(doc_id, doc)
        return doc_id

    def save_as(self, doc_id: str, doc: dict) -> None:
        doc = parse_session_document(doc)
        self._path(doc_id).write_text(canonical_json(doc), encoding="utf-8")

    def load(self, doc_id: str) -> dict:
        path = self._path(doc_id)
        if not path.exists():
            raise NotFound(f"no session stored under {doc_id!r}")
        try:
            raw = json.loads(path.read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise CorruptDocument(f"cannot read {doc_id!r}: {exc}") from exc
        return parse_session_document(raw)

    def load_bytes(self, doc_id: str) -> bytes:
        """Canonical bytes as stored (for round-trip checks)."""
        path = self._path(doc_id)
        if not path.exists():
            raise NotFound(f"no session stored under {doc_id!r}")
        return path.read_bytes()
