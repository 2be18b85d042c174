"""HTTP client for the embedding wire protocol.

The protocol is one POST endpoint plus a health probe::

    POST /embed   {"kind": "text"|"image", "text" | "payload_base64", "request_id"}
              ->  {"request_id", "rows", "dim", "normalized", "model_id",
                   "values_base64"}   (little-endian float32, row-major)
    GET /health   {"model_id", "dim", "normalized", "ready"}

Semantic failures come back as 4xx with ``{"error": {"code", "message"}}``.
The client never fabricates an embedding: anything it cannot verify is
raised as a typed error.
"""

from __future__ import annotations

import base64
import binascii
import logging
import time
import uuid
from typing import Protocol, Sequence, runtime_checkable

import numpy as np
import requests

from ..errors import (
    ConfigError,
    InvalidArgument,
    InvalidImage,
    UpstreamTimeout,
    UpstreamUnavailable,
)
from ..scoring import ensure_matrix

log = logging.getLogger(__name__)

DEFAULT_TIMEOUT = 120.0
HEALTH_TTL = 30.0
_RESPONSE_KEYS = ("request_id", "rows", "dim", "normalized", "model_id", "values_base64")
_ERROR_MAP = {"invalid_image": InvalidImage, "invalid_argument": InvalidArgument}


@runtime_checkable
class EmbedderClient(Protocol):
    """What the engine needs from any embedder, local or remote."""

    def embed_text(self, text: str) -> np.ndarray: ...

    def embed_image(self, data: bytes) -> np.ndarray: ...

    def embed_image_batch(self, items: Sequence[bytes]) -> list[np.ndarray]: ...

    def health(self) -> dict: ...


def encode_values(matrix: np.ndarray) -> str:
    """Matrix to the wire encoding (base64 of little-endian f32, row-major)."""
    return base64.b64encode(np.ascontiguousarray(matrix, dtype="<f4").tobytes()).decode("ascii")


class HttpEmbedderClient:
    """Engine-side gateway to a remote embedder.

    ``expected_dim`` pins the corpus dimension; a response with any other
    dim is a configuration error, not a scoring-time surprise. Health
    results are cached for ``health_ttl`` seconds and a probe failure is
    reported as not-ready rather than raised.
    """

    def __init__(
        self,
        base_url: str,
        *,
        expected_dim: int | None = None,
        timeout: float = DEFAULT_TIMEOUT,
        health_ttl: float = HEALTH_TTL,
        session=None,
        time_fn=time.monotonic,
    ):
        self._base = base_url.rstrip("/")
        self._expected_dim = expected_dim
        self._timeout = timeout
        self._health_ttl = health_ttl
        self._session = session if session is not None else requests.Session()
        self._time = time_fn
        self._health_cache: tuple[float, dict] | None = None

    @property
    def base_url(self) -> str:
        return self._base

    def embed_text(self, text: str) -> np.ndarray:
        if not isinstance(text, str) or not text.strip():
            raise InvalidArgument("text payload must be non-empty after trimming")
        body = {"kind": "text", "text": text, "request_id": uuid.uuid4().hex}
        return self._round_trip(body)

    def embed_image(self, data: bytes) -> np.ndarray:
        if not data:
            raise InvalidArgument("image payload is empty")
        body = {
            "kind": "image",
            "payload_base64": base64.b64encode(bytes(data)).decode("ascii"),
            "request_id": uuid.uuid4().hex,
        }
        return self._round_trip(body)

    def embed_image_batch(self, items: Sequence[bytes]) -> list[np.ndarray]:
        """Embed several images; the protocol is per-item, so this just loops."""
        return [self.embed_image(data) for data in items]

    def _round_trip(self, body: dict) -> np.ndarray:
        url = self._base + "/embed"
        attempts = 0
        while True:
            try:
                resp = self._session.post(url, json=body, timeout=self._timeout)
                break
            except requests.Timeout as exc:
                attempts += 1
                if attempts > 1:
                    raise UpstreamTimeout(f"embedder at {url} timed out twice ({self._timeout}s)") from exc
                log.warning("embed call timed out, retrying once: %s", url)
            except requests.RequestException as exc:
                raise UpstreamUnavailable(f"embedder at {url} unreachable: {exc}") from exc
        if resp.status_code != 200:
            raise self._error_from(resp)
        return self._parse(resp, body["request_id"])

    def _error_from(self, resp) -> Exception:
        code, message = "", f"HTTP {resp.status_code}"
        try:
            err = resp.json().get("error", {})
            code = str(err.get("code", ""))
            message = str(err.get("message", message))
        except ValueError:
            pass
        exc_type = _ERROR_MAP.get(code)
        if exc_type is not None and 400 <= resp.status_code < 500:
            return exc_type(message)
        return UpstreamUnavailable(f"embedder error {resp.status_code}: {message}")

    def _parse(self, resp, request_id: str) -> np.ndarray:
        try:
            data = resp.json()
        except ValueError as exc:
            raise UpstreamUnavailable("embedder returned a non-JSON body") from exc
        missing = [k for k in _RESPONSE_KEYS if k not in data]
        if missing:
            raise UpstreamUnavailable(f"embedder response missing fields: {', '.join(missing)}")
        if data["request_id"] != request_id:
            raise UpstreamUnavailable("embedder response request_id does not match the request")
        rows, dim = int(data["rows"]), int(data["dim"])
        if rows < 1 or dim < 1:
            raise UpstreamUnavailable(f"embedder reported a degenerate shape {rows}x{dim}")
        if self._expected_dim is not None and dim != self._expected_dim:
            raise ConfigError(f"embedder dim {dim} does not match the configured dim {self._expected_dim}")
        try:
            raw = base64.b64decode(data["values_base64"], validate=True)
        except (binascii.Error, TypeError) as exc:
            raise UpstreamUnavailable("embedder values_base64 is not valid base64") from exc
        if len(raw) != rows * dim * 4:
            raise UpstreamUnavailable(
                f"embedder payload is {len(raw)} bytes, expected {rows * dim * 4} for {rows}x{dim}"
            )
        matrix = np.frombuffer(raw, dtype="<f4").reshape(rows, dim)
        return ensure_matrix(matrix, name="embedder response")

    def health(self) -> dict:
        now = self._time()
        if self._health_cache is not None and now < self._health_cache[0]:
            return self._health_cache[1]
        result = {"model_id": "", "dim": None, "normalized": False, "ready": False}
        try:
            resp = self._session.get(self._base + "/health", timeout=min(self._timeout, 10.0))
            payload = resp.json()
            if resp.status_code == 200:
                result = {
                    "model_id": str(payload.get("model_id", "")),
                    "dim": payload.get("dim"),
                    "normalized": bool(payload.get("normalized", False)),
                    "ready": bool(payload.get("ready", False)),
                }
        except Exception as exc:
            log.debug("health probe failed for %s: %s", self._base, exc)
        self._health_cache = (now + self._health_ttl, result)
        return result
