"""Per-caller search contexts.

A session tracks what one caller uploaded and last saw. Ephemeral
uploads (persist off) live only in the session's overlay: the shared
corpus never sees them, and the session's searches run against a
snapshot extended with them on the fly.
"""

from __future__ import annotations

import logging
import threading
from dataclasses import dataclass, field

from ..results import SearchResult
from ..store import CorpusSnapshot, DocumentEmbedding, MetadataRecord

log = logging.getLogger(__name__)


@dataclass
class SessionContext:
    session_id: str
    uploaded_doc_ids: set[str] = field(default_factory=set)
    last_results: list[SearchResult] = field(default_factory=list)
    overlay_docs: list[DocumentEmbedding] = field(default_factory=list)
    overlay_meta: dict[str, MetadataRecord] = field(default_factory=dict)
    _view: CorpusSnapshot | None = field(default=None, repr=False)
    _view_key: tuple | None = field(default=None, repr=False)

    def view(self, base: CorpusSnapshot) -> CorpusSnapshot:
        """The corpus as this session sees it: ``base`` plus the overlay.

        Rebuilt only when the base epoch or the overlay changes; the
        extension shares the base snapshot's scan segments, so keeping a
        few private documents costs almost nothing per query.
        """
        if not self.overlay_docs:
            return base
        key = (base.epoch, len(self.overlay_docs))
        if self._view is None or self._view_key != key:
            docs = [d for d in self.overlay_docs if d.doc_id not in base]
            if len(docs) < len(self.overlay_docs):
                shadowed = [d.doc_id for d in self.overlay_docs if d.doc_id in base]
                log.warning(
                    "session %s: overlay doc(s) %s now exist in the shared corpus; the shared copy wins",
                    self.session_id, ", ".join(shadowed),
                )
                self.overlay_docs = docs
            meta = [self.overlay_meta[d.doc_id] for d in docs if d.doc_id in self.overlay_meta]
            self._view = base.extended(docs, meta, epoch=base.epoch)
            self._view_key = key
        return self._view

    def add_overlay(self, docs, meta) -> None:
        self.overlay_docs.extend(docs)
        for rec in meta:
            self.overlay_meta[rec.doc_id] = rec
        self.uploaded_doc_ids.update(d.doc_id for d in docs)
        self._view = None


class SessionStore:
    """Thread-safe map of live sessions, created on first use."""

    def __init__(self):
        self._lock = threading.Lock()
        self._sessions: dict[str, SessionContext] = {}

    def get(self, session_id: str) -> SessionContext | None:
        with self._lock:
            return self._sessions.get(session_id)

    def ensure(self, session_id: str) -> SessionContext:
        with self._lock:
            session = self._sessions.get(session_id)
            if session is None:
                session = self._sessions[session_id] = SessionContext(session_id)
            return session

    def __len__(self) -> int:
        with self._lock:
            return len(self._sessions)
