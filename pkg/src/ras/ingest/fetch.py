"""Image downloading with bounded concurrency, rate limiting, and retries.

Only JPEG, PNG, and TIFF payloads are accepted; anything else (or bytes
that do not decode at all) is a permanent failure for that row. HTTP 4xx
is permanent; 5xx and transport errors are retried with exponential
backoff up to the policy's attempt count.
"""

from __future__ import annotations

import io
import logging
import os
import threading
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Sequence
from urllib.parse import quote

import requests
from PIL import Image

from .manifest import ManifestRow

log = logging.getLogger(__name__)

ACCEPTED_FORMATS = ("JPEG", "PNG", "TIFF")
MAX_IN_FLIGHT = 8
FETCH_TIMEOUT = 30.0


@dataclass
class RetryPolicy:
    attempts: int = 3
    backoff_base: float = 1.0
    backoff_factor: float = 2.0
    sleep_fn: Callable[[float], None] = time.sleep

    def backoff(self, attempt: int) -> float:
        """Delay before retry number ``attempt`` (1-based)."""
        return self.backoff_base * self.backoff_factor ** (attempt - 1)


class TokenBucket:
    """Classic token bucket; acquire() blocks until a token is available."""

    def __init__(self, rate: float = 10.0, burst: float | None = None, *, time_fn=time.monotonic, sleep_fn=time.sleep):
        self._rate = float(rate)
        self._burst = float(burst) if burst is not None else max(self._rate, 1.0)
        self._tokens = self._burst
        self._time = time_fn
        self._sleep = sleep_fn
        self._last = time_fn()
        self._lock = threading.Lock()

    def acquire(self):
        while True:
            with self._lock:
                now = self._time()
                self._tokens = min(self._burst, self._tokens + (now - self._last) * self._rate)
                self._last = now
                if self._tokens >= 1.0:
                    self._tokens -= 1.0
                    return
                wait = (1.0 - self._tokens) / self._rate
            self._sleep(wait)


@dataclass
class FetchOutcome:
    doc_id: str
    ok: bool
    path: Path | None = None
    error: str = ""
    permanent: bool = False
    attempts: int = 0


def stored_image_path(dest_dir: str | os.PathLike, doc_id: str) -> Path:
    """Filesystem-safe location for a fetched image (ids may contain '/')."""
    return Path(dest_dir) / (quote(doc_id, safe="") + ".img")


def _classify_payload(data: bytes) -> str | None:
    """None when acceptable, else a permanent-failure reason."""
    try:
        with Image.open(io.BytesIO(data)) as img:
            fmt = img.format
            img.verify()
    except Exception as exc:
        return f"undecodable image: {exc}"
    if fmt not in ACCEPTED_FORMATS:
        return f"unsupported image format {fmt}"
    return None


def _fetch_one(
    row: ManifestRow,
    dest_dir: str | os.PathLike,
    session,
    policy: RetryPolicy,
    bucket: TokenBucket | None,
    timeout: float,
) -> FetchOutcome:
    attempts = 0
    while True:
        attempts += 1
        if bucket is not None:
            bucket.acquire()
        error = ""
        try:
            resp = session.get(row.image_url, timeout=timeout)
        except requests.RequestException as exc:
            error = f"transport error: {exc}"
        else:
            if resp.status_code == 200:
                reason = _classify_payload(resp.content)
                if reason is not None:
                    return FetchOutcome(row.doc_id, False, error=reason, permanent=True, attempts=attempts)
                path = stored_image_path(dest_dir, row.doc_id)
                path.write_bytes(resp.content)
                return FetchOutcome(row.doc_id, True, path=path, attempts=attempts)
            if 400 <= resp.status_code < 500:
                return FetchOutcome(
                    row.doc_id, False, error=f"HTTP {resp.status_code}", permanent=True, attempts=attempts
                )
            error = f"HTTP {resp.status_code}"
        if attempts >= policy.attempts:
            return FetchOutcome(row.doc_id, False, error=f"{error} (gave up after {attempts} attempts)",
                                permanent=False, attempts=attempts)
        log.debug("retrying %s after %s (attempt %d)", row.doc_id, error, attempts)
        policy.sleep_fn(policy.backoff(attempts))


def fetch_batch(
    rows: Sequence[ManifestRow],
    dest_dir: str | os.PathLike,
    *,
    session=None,
    policy: RetryPolicy | None = None,
    bucket: TokenBucket | None = None,
    max_workers: int = MAX_IN_FLIGHT,
    timeout: float = FETCH_TIMEOUT,
) -> list[FetchOutcome]:
    """Download one batch; outcomes line up with ``rows``.

    Failures never abort the batch. At most ``max_workers`` requests are
    in flight, further throttled by ``bucket`` when given.
    """
    if not rows:
        return []
    policy = policy or RetryPolicy()
    session = session if session is not None else requests.Session()
    workers = max(1, min(max_workers, len(rows)))
    if workers == 1:
        return [_fetch_one(r, dest_dir, session, policy, bucket, timeout) for r in rows]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(lambda r: _fetch_one(r, dest_dir, session, policy, bucket, timeout), rows))
