"""Embedder access: wire-protocol client, deterministic mock, conformance checks."""

from .client import DEFAULT_TIMEOUT, EmbedderClient, HttpEmbedderClient, encode_values
from .mock import DEFAULT_DIM, IMAGE_ROWS, MAX_TEXT_ROWS, MOCK_MODEL_ID, MockEmbedder, mock_matrix
from .mock_service import create_mock_embedder_app

__all__ = [
    "DEFAULT_DIM",
    "DEFAULT_TIMEOUT",
    "EmbedderClient",
    "HttpEmbedderClient",
    "IMAGE_ROWS",
    "MAX_TEXT_ROWS",
    "MOCK_MODEL_ID",
    "MockEmbedder",
    "create_mock_embedder_app",
    "encode_values",
    "mock_matrix",
]
