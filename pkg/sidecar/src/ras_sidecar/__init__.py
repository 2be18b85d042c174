"""Embedding-model sidecar: the embed wire protocol over a real model.

Interchangeable with the engine's built-in mock embedder service; the
engine talks to either through the same HTTP client.
"""

from .backend import ColQwenBackend, ModelBackend
from .fifo import FifoWorker, QueueOverflow
from .service import DEFAULT_QUEUE_DEPTH, DIM, IMAGE_ROWS, create_sidecar_app

__all__ = [
    "ColQwenBackend",
    "DEFAULT_QUEUE_DEPTH",
    "DIM",
    "FifoWorker",
    "IMAGE_ROWS",
    "ModelBackend",
    "QueueOverflow",
    "create_sidecar_app",
]
