"""The HTTP search service.

Endpoints:

* ``POST /search``: text query, top-k ranked results
* ``POST /search/image``: multipart image query, same pipeline
* ``POST /corpus/documents``: add images or import a shard, optionally persisted
* ``POST /analyze``: LLM read on a set of results
* ``GET /corpus/stats``: corpus size, shard count, dim, epoch, memory
* ``GET /health``: readiness of corpus, embedder, and LLM

Every search response is computed against one immutable snapshot and
reports its epoch, so concurrent corpus growth can never produce a
mixed view. Errors use one envelope: ``{"error": {"code", "message"}}``.
"""

from __future__ import annotations

import hashlib
import logging
import os
import tempfile
import threading
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse

from ..errors import (
    ConfigError,
    DimensionError,
    DuplicateDocument,
    IntegrityError,
    InvalidArgument,
    InvalidEmbedding,
    InvalidImage,
    NotFound,
    RasError,
    UpstreamTimeout,
    UpstreamUnavailable,
)
from ..gateway import EmbedderClient
from ..iiif import DEFAULT_IIIF_BASE
from ..results import build_results
from ..scoring import DEFAULT_K, RankedHit, top_k
from ..store import (
    CorpusRegistry,
    CorpusSnapshot,
    DocumentEmbedding,
    MetadataRecord,
    Source,
    read_metadata_csv,
    read_shard,
)
from ..summarize import LlmClient, analyze
from .sessions import SessionStore

log = logging.getLogger(__name__)

MAX_K = 1000


@dataclass
class ServiceConfig:
    """Everything the service needs, resolved by the caller (CLI or tests)."""

    corpus_dir: str | os.PathLike
    embedder: EmbedderClient
    llm: LlmClient | None = None
    iiif_base: str = DEFAULT_IIIF_BASE
    cors_origins: Sequence[str] = field(default_factory=tuple)
    auth_token: str = ""
    scan_workers: int | None = None
    skip_corrupt: bool = False
    background_load: bool = False


class EngineState:
    """Mutable service state: the corpus registry, sessions, load status."""

    def __init__(self, config: ServiceConfig):
        self.config = config
        self.sessions = SessionStore()
        self.registry: CorpusRegistry | None = None
        self.load_error: str | None = None

    @property
    def ready(self) -> bool:
        return self.registry is not None

    def load(self) -> None:
        registry = CorpusRegistry(self.config.corpus_dir, skip_corrupt=self.config.skip_corrupt)
        snap = registry.snapshot()
        log.info(
            "corpus loaded: %d document(s), dim=%s, epoch=%d",
            snap.size, snap.dim, snap.epoch,
        )
        self.registry = registry

    def load_in_background(self) -> None:
        def _run():
            try:
                self.load()
            except Exception as exc:
                self.load_error = f"{type(exc).__name__}: {exc}"
                log.error("corpus load failed: %s", self.load_error)

        threading.Thread(target=_run, name="corpus-load", daemon=True).start()

    def view_for(self, session_id: str) -> CorpusSnapshot:
        base = self.registry.snapshot()
        if not session_id:
            return base
        session = self.sessions.get(session_id)
        return base if session is None else session.view(base)


def execute_search(state: EngineState, query_matrix, k: int, snapshot: CorpusSnapshot):
    """Every search modality funnels through here: one scan, one ranking rule."""
    scores = snapshot.scores(query_matrix, workers=state.config.scan_workers)
    pairs = zip((d.doc_id for d in snapshot.docs), scores.tolist())
    hits = top_k(pairs, k)
    return build_results(hits, snapshot.meta, iiif_base=state.config.iiif_base)


def _error(status: int, code: str, message: str) -> JSONResponse:
    return JSONResponse({"error": {"code": code, "message": message}}, status_code=status)


_STATUS_MAP = (
    (UpstreamTimeout, 503, "upstream_timeout"),
    (UpstreamUnavailable, 503, "upstream_unavailable"),
    (DuplicateDocument, 409, "duplicate_document"),
    (DimensionError, 422, "dimension_mismatch"),
    (IntegrityError, 422, "integrity_error"),
    (NotFound, 404, "not_found"),
    (InvalidImage, 400, "invalid_image"),
    (InvalidEmbedding, 400, "invalid_argument"),
    (InvalidArgument, 400, "invalid_argument"),
    (ConfigError, 500, "config_error"),
)


def _map_ras_error(exc: RasError) -> JSONResponse:
    for cls, status, code in _STATUS_MAP:
        if isinstance(exc, cls):
            return _error(status, code, str(exc))
    return _error(500, "internal", str(exc))


def _parse_k(raw) -> int:
    """k from JSON (int) or form field (string); anything else is a 400."""
    if raw is None:
        return DEFAULT_K
    if isinstance(raw, bool):
        raise InvalidArgument("k must be an integer")
    if isinstance(raw, str):
        try:
            raw = int(raw.strip())
        except ValueError:
            raise InvalidArgument(f"k must be an integer, got {raw!r}")
    if not isinstance(raw, int):
        raise InvalidArgument("k must be an integer")
    if not 1 <= raw <= MAX_K:
        raise InvalidArgument(f"k must be between 1 and {MAX_K}, got {raw}")
    return raw


def _parse_bool(raw) -> bool:
    if raw is None:
        return False
    text = str(raw).strip().lower()
    if text in ("", "0", "false", "no", "off"):
        return False
    if text in ("1", "true", "yes", "on"):
        return True
    raise InvalidArgument(f"expected a boolean, got {raw!r}")


def _upload_doc_id(filename: str, data: bytes) -> str:
    if filename:
        return filename
    return "upload-" + hashlib.sha256(data).hexdigest()[:12]


def create_app(config: ServiceConfig) -> FastAPI:
    """Build the service around ``config``; loads the corpus before returning
    unless ``background_load`` is set (then ``/health`` reports progress and
    every other endpoint answers 503 until the load lands).
    """
    state = EngineState(config)
    if config.background_load:
        state.load_in_background()
    else:
        state.load()

    app = FastAPI(title="ras-engine", docs_url=None, redoc_url=None, openapi_url=None)
    app.state.engine = state

    if config.cors_origins:
        from fastapi.middleware.cors import CORSMiddleware

        app.add_middleware(
            CORSMiddleware,
            allow_origins=list(config.cors_origins),
            allow_methods=["*"],
            allow_headers=["*"],
        )

    @app.exception_handler(RasError)
    async def _ras_error_handler(request: Request, exc: RasError):
        return _map_ras_error(exc)

    def _not_ready() -> JSONResponse | None:
        if state.ready:
            return None
        if state.load_error:
            return _error(503, "not_ready", f"corpus failed to load: {state.load_error}")
        return _error(503, "not_ready", "corpus is still loading")

    async def _json_body(request: Request) -> dict:
        try:
            body = await request.json()
        except Exception:
            raise InvalidArgument("request body must be a JSON object")
        if not isinstance(body, dict):
            raise InvalidArgument("request body must be a JSON object")
        return body

    def _search_response(query_matrix, k: int, session_id: str, started: float) -> JSONResponse:
        if session_id:
            session = state.sessions.ensure(session_id)
            snapshot = session.view(state.registry.snapshot())
        else:
            session = None
            snapshot = state.registry.snapshot()
        results = execute_search(state, query_matrix, k, snapshot)
        if session is not None:
            session.last_results = results
        latency_ms = int(round((time.perf_counter() - started) * 1000))
        log.info(
            "search: results=%d k=%d corpus_epoch=%d latency_ms=%d",
            len(results), k, snapshot.epoch, latency_ms,
        )
        return JSONResponse(
            {
                "results": [r.to_dict() for r in results],
                "corpus_epoch": snapshot.epoch,
                "latency_ms": latency_ms,
            }
        )

    @app.post("/search")
    async def search(request: Request):
        refusal = _not_ready()
        if refusal:
            return refusal
        started = time.perf_counter()
        body = await _json_body(request)
        query = body.get("query")
        if not isinstance(query, str) or not query.strip():
            raise InvalidArgument("query must be a non-empty string")
        k = _parse_k(body.get("k"))
        session_id = str(body.get("session_id") or "")
        matrix = config.embedder.embed_text(query)
        return _search_response(matrix, k, session_id, started)

    @app.post("/search/image")
    async def search_image(request: Request):
        refusal = _not_ready()
        if refusal:
            return refusal
        started = time.perf_counter()
        form = await request.form()
        upload = form.get("image")
        if upload is None or isinstance(upload, str):
            raise InvalidArgument("expected an image file in field 'image'")
        data = await upload.read()
        if not data:
            raise InvalidImage("uploaded image is empty")
        k = _parse_k(form.get("k"))
        session_id = str(form.get("session_id") or "")
        matrix = config.embedder.embed_image(data)
        return _search_response(matrix, k, session_id, started)

    @app.post("/corpus/documents")
    async def add_documents(request: Request):
        if config.auth_token:
            expected = f"Bearer {config.auth_token}"
            if request.headers.get("authorization") != expected:
                return _error(401, "unauthorized", "missing or wrong bearer token")
        refusal = _not_ready()
        if refusal:
            return refusal
        form = await request.form()
        persist = _parse_bool(form.get("persist"))
        session_id = str(form.get("session_id") or "")
        images = [f for f in form.getlist("images") if not isinstance(f, str)]
        shard_upload = form.get("shard")
        if isinstance(shard_upload, str):
            shard_upload = None
        if images and shard_upload is not None:
            raise InvalidArgument("send image files or a shard file, not both")
        if not images and shard_upload is None:
            raise InvalidArgument("nothing to add: field 'images' or 'shard' required")

        if shard_upload is not None:
            docs, meta = await _read_shard_upload(form, shard_upload)
        else:
            docs, meta = await _embed_image_uploads(images)

        normalized = bool(config.embedder.health().get("normalized", False))
        if session_id and not persist:
            session = state.sessions.ensure(session_id)
            base = state.registry.snapshot()
            # dry extension validates duplicate ids and dims before we commit
            session.view(base).extended(docs, meta, epoch=base.epoch)
            session.add_overlay(docs, meta)
            epoch = base.epoch
        else:
            snapshot = state.registry.add_documents(docs, meta, persist=persist, normalized=normalized)
            if session_id:
                state.sessions.ensure(session_id).uploaded_doc_ids.update(d.doc_id for d in docs)
            epoch = snapshot.epoch
        added = [d.doc_id for d in docs]
        log.info(
            "corpus add: %d document(s) persist=%s session=%s corpus_epoch=%d",
            len(added), persist, session_id or "-", epoch,
        )
        return JSONResponse({"added": added, "corpus_epoch": epoch})

    async def _read_shard_upload(form, shard_upload):
        data = await shard_upload.read()
        if not data:
            raise InvalidArgument("uploaded shard file is empty")
        with tempfile.TemporaryDirectory(prefix="ras-import-") as tmp:
            shard_path = Path(tmp) / "import.ras1"
            shard_path.write_bytes(data)
            loaded = read_shard(shard_path, source=Source.FEDERATED_IMPORT)
            meta_upload = form.get("metadata")
            meta: list[MetadataRecord] = []
            if meta_upload is not None and not isinstance(meta_upload, str):
                meta_path = Path(tmp) / "metadata.csv"
                meta_path.write_bytes(await meta_upload.read())
                ids = {e.doc_id for e in loaded.entries}
                meta = [rec for doc_id, rec in read_metadata_csv(meta_path).items() if doc_id in ids]
        return list(loaded.entries), meta

    async def _embed_image_uploads(images):
        docs: list[DocumentEmbedding] = []
        meta: list[MetadataRecord] = []
        for upload in images:
            data = await upload.read()
            if not data:
                raise InvalidImage(f"uploaded image {upload.filename!r} is empty")
            try:
                matrix = config.embedder.embed_image(data)
            except InvalidImage as exc:
                raise InvalidImage(f"{upload.filename or 'upload'}: {exc}")
            doc_id = _upload_doc_id(upload.filename or "", data)
            docs.append(DocumentEmbedding(doc_id, matrix, source=Source.USER_UPLOAD))
            meta.append(
                MetadataRecord(
                    doc_id=doc_id,
                    title=upload.filename or doc_id,
                    resource_url="",
                    doc_type="upload",
                    collection="uploads",
                )
            )
        return docs, meta

    @app.post("/analyze")
    async def analyze_results(request: Request):
        refusal = _not_ready()
        if refusal:
            return refusal
        if config.llm is None:
            return _error(503, "upstream_unavailable", "no analysis model configured")
        body = await _json_body(request)
        doc_ids = body.get("doc_ids")
        session_id = str(body.get("session_id") or "")
        if doc_ids is not None:
            if (
                not isinstance(doc_ids, list)
                or not doc_ids
                or not all(isinstance(i, str) and i for i in doc_ids)
            ):
                raise InvalidArgument("doc_ids must be a non-empty list of strings")
            snapshot = state.view_for(session_id)
            missing = sorted(i for i in doc_ids if i not in snapshot)
            if missing:
                raise NotFound(f"unknown doc_id(s): {', '.join(missing)}")
            hits = [RankedHit(doc_ref=i, doc_id=doc_id, score=0.0) for i, doc_id in enumerate(doc_ids)]
            results = build_results(hits, snapshot.meta, iiif_base=config.iiif_base)
        elif session_id:
            session = state.sessions.get(session_id)
            if session is None:
                raise NotFound(f"unknown session {session_id!r}")
            if not session.last_results:
                raise NotFound(f"session {session_id!r} has no results to analyze")
            results = session.last_results
        else:
            raise InvalidArgument("provide doc_ids or session_id")
        outcome = analyze(results, config.llm)
        log.info("analyze: results=%d model=%s latency_ms=%d", len(results), outcome.model_id, outcome.latency_ms)
        return JSONResponse(
            {"text": outcome.text, "model_id": outcome.model_id, "latency_ms": outcome.latency_ms}
        )

    @app.get("/corpus/stats")
    async def corpus_stats():
        refusal = _not_ready()
        if refusal:
            return refusal
        snap = state.registry.snapshot()
        shards_dir = state.registry.shards_dir
        shard_count = len(list(shards_dir.glob("*.ras1"))) if shards_dir.is_dir() else 0
        memory = sum(d.matrix.nbytes for d in snap.docs)
        return JSONResponse(
            {
                "documents": snap.size,
                "shards": shard_count,
                "dim": snap.dim,
                "epoch": snap.epoch,
                "memory_bytes": memory,
            }
        )

    @app.get("/health")
    async def health():
        if state.ready:
            snap = state.registry.snapshot()
            corpus = {"ready": True, "documents": snap.size, "epoch": snap.epoch}
        elif state.load_error:
            corpus = {"ready": False, "error": state.load_error}
        else:
            corpus = {"ready": False, "state": "loading"}

        embedder_health = config.embedder.health()
        embedder = {
            "ready": bool(embedder_health.get("ready", False)),
            "model_id": embedder_health.get("model_id", ""),
        }

        if config.llm is None:
            llm = {"configured": False, "ready": False}
        else:
            probe = getattr(config.llm, "health", None)
            if callable(probe):
                result = probe()
                llm = {
                    "configured": True,
                    "ready": bool(result.get("ready", False)),
                    "model_id": result.get("model_id", ""),
                }
            else:
                llm = {
                    "configured": True,
                    "ready": True,
                    "model_id": getattr(config.llm, "model_id", ""),
                }

        search_available = corpus["ready"] and embedder["ready"]
        analyze_available = corpus["ready"] and llm["configured"] and llm["ready"]
        if not state.ready:
            status = "error" if state.load_error else "loading"
        elif search_available and (not llm["configured"] or llm["ready"]):
            status = "ok"
        else:
            status = "degraded"
        return JSONResponse(
            {
                "status": status,
                "corpus": corpus,
                "embedder": embedder,
                "llm": llm,
                "search_available": search_available,
                "analyze_available": analyze_available,
            }
        )

    return app
