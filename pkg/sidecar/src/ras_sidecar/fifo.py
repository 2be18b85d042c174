"""Single-worker FIFO execution with a bounded waiting line."""

from __future__ import annotations

import queue
import threading
from concurrent.futures import Future
from typing import Callable


class QueueOverflow(RuntimeError):
    """The waiting line is at capacity; the caller should shed load."""


class FifoWorker:
    """Runs submitted callables one at a time, strictly in arrival order.

    The model is the scarce resource, so a single worker thread owns every
    call to it. At most ``depth`` submissions wait in line (on top of the
    one being executed); beyond that, ``submit`` refuses immediately
    instead of letting latency pile up invisibly.
    """

    def __init__(self, depth: int = 32):
        if depth < 1:
            raise ValueError(f"depth must be >= 1, got {depth}")
        self.depth = depth
        self._line: queue.Queue = queue.Queue(maxsize=depth)
        self._thread = threading.Thread(target=self._drain, name="sidecar-model", daemon=True)
        self._thread.start()

    def submit(self, fn: Callable) -> Future:
        future: Future = Future()
        try:
            self._line.put_nowait((fn, future))
        except queue.Full:
            raise QueueOverflow(f"request queue is full ({self.depth} waiting)") from None
        return future

    def run(self, fn: Callable, timeout: float | None = None):
        """Submit and wait; raises QueueOverflow or the job's own exception."""
        return self.submit(fn).result(timeout)

    def waiting(self) -> int:
        return self._line.qsize()

    def _drain(self) -> None:
        while True:
            item = self._line.get()
            if item is None:
                return
            fn, future = item
            if not future.set_running_or_notify_cancel():
                continue
            try:
                future.set_result(fn())
            except BaseException as exc:  # the future carries it to the caller
                future.set_exception(exc)

    def close(self) -> None:
        self._line.put(None)
        self._thread.join(timeout=5)
