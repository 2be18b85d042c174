"""Shared test fixtures: deterministic tiny images and a local image host.

The stub HTTP server answers:

* ``/img/<n>``: a small PNG whose pixels derive from ``n``
* ``/flaky/<name>``: HTTP 500 twice, then the PNG (per-path counter)
* ``/notimage``: 200 with non-image bytes
* ``/gif``: 200 with a GIF (decodable but unsupported)
* anything else: 404
"""

import csv
import io
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from pathlib import Path

import pytest
from PIL import Image


def png_for(n: int) -> bytes:
    img = Image.new("RGB", (2, 2), (n % 256, (n * 7) % 256, (n * 13) % 256))
    buf = io.BytesIO()
    img.save(buf, format="PNG")
    return buf.getvalue()


def write_manifest(path: Path, rows, extra_cols=()) -> Path:
    """CSV manifest from row sequences (doc_id, image_url, title, resource_url, doc_type, collection, *extras)."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(
            ["doc_id", "image_url", "title", "resource_url", "doc_type", "collection", *extra_cols]
        )
        writer.writerows(rows)
    return path


def seed_corpus(corpus_dir: Path, n: int) -> None:
    """A persisted corpus of n mock-embedded images with metadata."""
    from ras.gateway import MockEmbedder
    from ras.store import DocumentEmbedding, MetadataRecord, write_metadata_csv, write_shard

    emb = MockEmbedder()
    docs = [DocumentEmbedding(f"doc-{i}", emb.embed_image(png_for(i))) for i in range(n)]
    meta = [
        MetadataRecord(
            doc_id=f"doc-{i}",
            title=f"Title {i}",
            resource_url=f"http://loc/{i}",
            doc_type="map",
            collection="maps",
            extra={"image_url": f"http://imgs/{i}.png"},
        )
        for i in range(n)
    ]
    shards = corpus_dir / "shards"
    shards.mkdir(parents=True, exist_ok=True)
    write_shard(docs, shards / "seed.ras1", normalized=True)
    write_metadata_csv(corpus_dir / "metadata.csv", meta)


def gif_bytes() -> bytes:
    buf = io.BytesIO()
    Image.new("P", (1, 1)).save(buf, format="GIF")
    return buf.getvalue()


class _StubHandler(BaseHTTPRequestHandler):
    def _send(self, status: int, body: bytes, ctype: str) -> None:
        self.send_response(status)
        self.send_header("Content-Type", ctype)
        self.send_header("Content-Length", str(len(body)))
        self.end_headers()
        self.wfile.write(body)

    def do_GET(self):  # noqa: N802 (http.server API)
        server = self.server
        with server.state_lock:
            server.hits[self.path] = server.hits.get(self.path, 0) + 1
            hit = server.hits[self.path]
        if self.path.startswith("/img/"):
            self._send(200, png_for(int(self.path.rsplit("/", 1)[1])), "image/png")
        elif self.path.startswith("/flaky/"):
            if hit < 3:
                self._send(500, b"boom", "text/plain")
            else:
                self._send(200, png_for(0), "image/png")
        elif self.path == "/notimage":
            self._send(200, b"just some text, no pixels here", "text/plain")
        elif self.path == "/gif":
            self._send(200, gif_bytes(), "image/gif")
        else:
            self._send(404, b"no such image", "text/plain")

    def log_message(self, *args):
        pass


class StubServer(ThreadingHTTPServer):
    daemon_threads = True

    def __init__(self, addr):
        super().__init__(addr, _StubHandler)
        self.hits = {}
        self.state_lock = threading.Lock()


@pytest.fixture(scope="session")
def stub_server():
    server = StubServer(("127.0.0.1", 0))
    thread = threading.Thread(target=server.serve_forever, daemon=True)
    thread.start()
    try:
        yield f"http://127.0.0.1:{server.server_address[1]}", server
    finally:
        server.shutdown()
        thread.join(timeout=5)
        server.server_close()
