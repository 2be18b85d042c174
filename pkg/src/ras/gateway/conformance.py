"""Wire-protocol conformance checks, shared by every embedder server.

Any server claiming to implement the embed protocol (the in-tree mock
service, an external model sidecar) should pass :func:`run_conformance`.
The caller supplies a transport function so the same checks run against
an ASGI test client or a live socket.
"""

from __future__ import annotations

import base64
import functools
import io

import numpy as np

from ..errors import RasError

PAPER_IMAGE_ROWS = 768
PAPER_DIM = 128


class ConformanceFailure(RasError):
    """A server response violated the embed protocol."""


@functools.cache
def tiny_png() -> bytes:
    """A 1x1 PNG; decodability is the only gate an embedder may apply."""
    from PIL import Image

    buf = io.BytesIO()
    Image.new("RGB", (1, 1), (200, 120, 40)).save(buf, format="PNG")
    return buf.getvalue()


def asgi_caller(client):
    """Adapt a TestClient/httpx-style client to the transport signature."""

    def call(method: str, path: str, body: dict | None = None):
        resp = client.request(method, path, json=body)
        try:
            payload = resp.json()
        except Exception:
            payload = {}
        return resp.status_code, payload

    return call


def _require(cond: bool, message: str):
    if not cond:
        raise ConformanceFailure(message)


def _check_embed_response(data: dict, request_id: str, dim: int, what: str) -> np.ndarray:
    for key in ("request_id", "rows", "dim", "normalized", "model_id", "values_base64"):
        _require(key in data, f"{what}: response missing {key!r}")
    _require(data["request_id"] == request_id, f"{what}: request_id not echoed")
    rows = int(data["rows"])
    _require(rows >= 1, f"{what}: rows must be >= 1, got {rows}")
    _require(int(data["dim"]) == dim, f"{what}: dim {data['dim']} != advertised dim {dim}")
    raw = base64.b64decode(data["values_base64"])
    _require(
        len(raw) == rows * dim * 4,
        f"{what}: payload {len(raw)} bytes, expected {rows * dim * 4}",
    )
    matrix = np.frombuffer(raw, dtype="<f4").reshape(rows, dim)
    _require(bool(np.isfinite(matrix).all()), f"{what}: non-finite values in matrix")
    if data["normalized"]:
        norms = np.linalg.norm(matrix.astype(np.float64), axis=1)
        _require(
            bool(np.abs(norms - 1.0).max() < 1e-3),
            f"{what}: normalized=true but row norms stray to {norms.max():.6f}",
        )
    return matrix


def _expect_error(status: int, body: dict, code: str, what: str):
    _require(400 <= status < 500, f"{what}: expected a 4xx, got {status}")
    err = body.get("error")
    _require(isinstance(err, dict), f"{what}: missing error envelope")
    _require(err.get("code") == code, f"{what}: error code {err.get('code')!r}, expected {code!r}")
    _require(bool(err.get("message")), f"{what}: error message is empty")


def run_conformance(call, *, strict_shape: bool = False, deterministic: bool = True, expect_dim: int | None = None):
    """Exercise an embed server end to end; raises ConformanceFailure on a violation.

    ``strict_shape`` additionally pins the image shape to 768x128, the
    contract for production embedders. ``deterministic`` asserts repeat
    calls return byte-identical values (true for the mock; a live model
    may be exempt).
    """
    status, health = call("GET", "/health", None)
    _require(status == 200, f"health: expected 200, got {status}")
    for key in ("model_id", "dim", "normalized", "ready"):
        _require(key in health, f"health: missing {key!r}")
    _require(isinstance(health["model_id"], str) and health["model_id"], "health: model_id must be a non-empty string")
    dim = health["dim"]
    _require(isinstance(dim, int) and dim >= 1, f"health: dim must be a positive integer, got {dim!r}")
    _require(isinstance(health["ready"], bool), "health: ready must be a boolean")
    _require(health["ready"], "health: server reports not ready")
    if expect_dim is not None:
        _require(dim == expect_dim, f"health: dim {dim} != expected {expect_dim}")
    if strict_shape:
        _require(dim == PAPER_DIM, f"health: strict shape requires dim {PAPER_DIM}, got {dim}")

    rid = "conformance-text-1"
    status, data = call("POST", "/embed", {"kind": "text", "text": "old map", "request_id": rid})
    _require(status == 200, f"text embed: expected 200, got {status}")
    _check_embed_response(data, rid, dim, "text embed")

    rid = "conformance-image-1"
    png = base64.b64encode(tiny_png()).decode("ascii")
    status, idata = call("POST", "/embed", {"kind": "image", "payload_base64": png, "request_id": rid})
    _require(status == 200, f"image embed: expected 200, got {status}")
    imat = _check_embed_response(idata, rid, dim, "image embed")
    if strict_shape:
        _require(
            imat.shape == (PAPER_IMAGE_ROWS, PAPER_DIM),
            f"image embed: strict shape requires {PAPER_IMAGE_ROWS}x{PAPER_DIM}, got {imat.shape[0]}x{imat.shape[1]}",
        )

    if deterministic:
        status, again = call("POST", "/embed", {"kind": "text", "text": "old map", "request_id": "conformance-text-2"})
        _require(status == 200, "text embed repeat: non-200")
        _require(
            again["values_base64"] == data["values_base64"],
            "text embed: repeat call returned different values",
        )
        status, again = call("POST", "/embed", {"kind": "image", "payload_base64": png, "request_id": "conformance-image-2"})
        _require(status == 200, "image embed repeat: non-200")
        _require(
            again["values_base64"] == idata["values_base64"],
            "image embed: repeat call returned different values",
        )

    status, body = call("POST", "/embed", {"kind": "text", "text": "   ", "request_id": "conformance-err-1"})
    _expect_error(status, body, "invalid_argument", "blank text")

    bad = base64.b64encode(b"definitely not an image").decode("ascii")
    status, body = call("POST", "/embed", {"kind": "image", "payload_base64": bad, "request_id": "conformance-err-2"})
    _expect_error(status, body, "invalid_image", "undecodable image")

    status, body = call("POST", "/embed", {"kind": "audio", "text": "hm", "request_id": "conformance-err-3"})
    _expect_error(status, body, "invalid_argument", "unknown kind")
