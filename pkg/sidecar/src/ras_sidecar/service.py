"""HTTP face of the sidecar: the embed wire protocol over one model.

Endpoints and payloads match the engine's mock embedder service exactly,
so the two are interchangeable behind the engine's HTTP client. On top of
that the sidecar adds what a real model needs: background loading with an
honest /health, a FIFO queue in front of the single model instance, and a
hard guarantee that image responses are 768x128 (a violation is a 500,
never a silently wrong matrix).
"""

from __future__ import annotations

import base64
import binascii
import functools
import io
import logging
import threading
import time

import numpy as np
from fastapi import Body, FastAPI
from fastapi.responses import JSONResponse
from PIL import Image

from .backend import ModelBackend
from .fifo import FifoWorker, QueueOverflow

log = logging.getLogger(__name__)

IMAGE_ROWS = 768
DIM = 128
DEFAULT_QUEUE_DEPTH = 32

# Row norms within this of 1.0 count as normalized when the startup probe
# decides what the /health flag should say.
_NORM_TOLERANCE = 1e-3


def _error(status: int, code: str, message: str) -> JSONResponse:
    return JSONResponse(status_code=status, content={"error": {"code": code, "message": message}})


def _probe_png() -> bytes:
    buf = io.BytesIO()
    Image.new("RGB", (64, 64), (90, 120, 200)).save(buf, format="PNG")
    return buf.getvalue()


def _shape_problem(matrix: np.ndarray, what: str) -> str | None:
    if matrix.ndim != 2 or matrix.shape[1] != DIM:
        return f"{what} embedding has shape {tuple(matrix.shape)}, dim must be {DIM}"
    if what == "image" and matrix.shape[0] != IMAGE_ROWS:
        return f"image embedding has {matrix.shape[0]} rows, the contract is {IMAGE_ROWS}"
    if matrix.shape[0] < 1:
        return f"{what} embedding has no rows"
    return None


class SidecarState:
    """Load phase, measured normalized flag, and the model's work queue."""

    def __init__(self, backend: ModelBackend, queue_depth: int):
        self.backend = backend
        self.worker = FifoWorker(queue_depth)
        self.phase = "loading"  # loading | ready | error
        self.normalized = False
        self.load_error: str | None = None

    def load(self) -> None:
        try:
            started = time.perf_counter()
            self.backend.load()
            sample = np.asarray(self.backend.embed_image(_probe_png()))
            problem = _shape_problem(sample, "image")
            if problem:
                raise RuntimeError(f"startup probe: {problem}")
            norms = np.linalg.norm(sample.astype(np.float64), axis=1)
            self.normalized = bool(np.abs(norms - 1.0).max() < _NORM_TOLERANCE)
            self.phase = "ready"
            log.info(
                "model %s ready on %s in %.1f s (normalized=%s)",
                self.backend.model_id, self.backend.device,
                time.perf_counter() - started, self.normalized,
            )
        except Exception as exc:
            self.load_error = str(exc)
            self.phase = "error"
            log.exception("model load failed")


def create_sidecar_app(
    backend: ModelBackend,
    *,
    queue_depth: int = DEFAULT_QUEUE_DEPTH,
    block_until_ready: bool = False,
) -> FastAPI:
    """Build the ASGI app; loading happens in the background unless blocked."""
    state = SidecarState(backend, queue_depth)
    if block_until_ready:
        state.load()
    else:
        threading.Thread(target=state.load, name="sidecar-load", daemon=True).start()

    app = FastAPI(title="embedder sidecar", docs_url=None, redoc_url=None)
    app.state.sidecar = state

    @app.get("/health")
    def health():
        return {
            "model_id": backend.model_id,
            "device": backend.device,
            "dim": DIM,
            "patch_rows": IMAGE_ROWS,
            "normalized": state.normalized,
            "ready": state.phase == "ready",
            "queue_depth": queue_depth,
        }

    @app.post("/embed")
    def embed(body: dict = Body(...)):
        if state.phase == "loading":
            return _error(503, "loading", "model is still loading")
        if state.phase == "error":
            return _error(503, "model_error", f"model failed to load: {state.load_error}")

        kind = body.get("kind")
        request_id = str(body.get("request_id", ""))
        if kind == "text":
            text = body.get("text")
            if not isinstance(text, str):
                return _error(422, "invalid_argument", "text field is required for kind=text")
            if not text.strip():
                return _error(422, "invalid_argument", "text must not be blank")
            job = functools.partial(backend.embed_text, text)
            what = "text"
        elif kind == "image":
            payload = body.get("payload_base64")
            if not isinstance(payload, str):
                return _error(422, "invalid_argument", "payload_base64 is required for kind=image")
            try:
                raw = base64.b64decode(payload, validate=True)
            except binascii.Error:
                return _error(422, "invalid_argument", "payload_base64 is not valid base64")
            try:
                with Image.open(io.BytesIO(raw)) as probe:
                    probe.verify()
            except Exception:
                return _error(422, "invalid_image", "payload does not decode as an image")
            job = functools.partial(backend.embed_image, raw)
            what = "image"
        else:
            return _error(422, "invalid_argument", f"kind must be 'text' or 'image', got {kind!r}")

        started = time.perf_counter()
        try:
            matrix = np.asarray(state.worker.run(job))
        except QueueOverflow as exc:
            return _error(503, "overloaded", str(exc))
        except Exception as exc:
            log.exception("model call failed")
            return _error(500, "model_error", f"model call failed: {exc}")
        elapsed = time.perf_counter() - started

        problem = _shape_problem(matrix, what)
        if problem:
            log.error("shape violation from %s: %s", backend.model_id, problem)
            return _error(500, "shape_violation", problem)
        log.info("embedded %s (%d rows) in %.2f s", what, matrix.shape[0], elapsed)
        return {
            "request_id": request_id,
            "rows": int(matrix.shape[0]),
            "dim": int(matrix.shape[1]),
            "normalized": state.normalized,
            "model_id": backend.model_id,
            "values_base64": base64.b64encode(
                np.ascontiguousarray(matrix, dtype="<f4").tobytes()
            ).decode("ascii"),
        }

    return app
