"""Reference HTTP implementation of the embedding wire protocol.

Wraps :class:`MockEmbedder` behind the same endpoints a real model
sidecar exposes, so the HTTP client and any alternative sidecar can be
validated against one concrete, deterministic server.
"""

from __future__ import annotations

import base64
import binascii

from fastapi import Body, FastAPI
from fastapi.responses import JSONResponse

from ..errors import InvalidArgument, InvalidImage
from .client import encode_values
from .mock import MockEmbedder


def _error(status: int, code: str, message: str) -> JSONResponse:
    return JSONResponse(status_code=status, content={"error": {"code": code, "message": message}})


def create_mock_embedder_app(embedder: MockEmbedder | None = None) -> FastAPI:
    emb = embedder or MockEmbedder()
    app = FastAPI(title="mock embedder", docs_url=None, redoc_url=None)

    @app.get("/health")
    def health():
        return emb.health()

    @app.post("/embed")
    def embed(body: dict = Body(...)):
        kind = body.get("kind")
        request_id = str(body.get("request_id", ""))
        if kind == "text":
            text = body.get("text")
            if not isinstance(text, str):
                return _error(422, "invalid_argument", "text field is required for kind=text")
            try:
                matrix = emb.embed_text(text)
            except InvalidArgument as exc:
                return _error(422, "invalid_argument", str(exc))
        elif kind == "image":
            payload = body.get("payload_base64")
            if not isinstance(payload, str):
                return _error(422, "invalid_argument", "payload_base64 is required for kind=image")
            try:
                raw = base64.b64decode(payload, validate=True)
            except binascii.Error:
                return _error(422, "invalid_argument", "payload_base64 is not valid base64")
            try:
                matrix = emb.embed_image(raw)
            except InvalidArgument as exc:
                return _error(422, "invalid_argument", str(exc))
            except InvalidImage as exc:
                return _error(422, "invalid_image", str(exc))
        else:
            return _error(422, "invalid_argument", f"kind must be 'text' or 'image', got {kind!r}")
        return {
            "request_id": request_id,
            "rows": int(matrix.shape[0]),
            "dim": int(matrix.shape[1]),
            "normalized": True,
            "model_id": emb.model_id,
            "values_base64": encode_values(matrix),
        }

    return app
