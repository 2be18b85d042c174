"""Retrieval-augmented search engine for large image/document collections.

Late-interaction (MaxSim) scoring over multi-vector embeddings, with a
sharded on-disk corpus, batch IIIF ingestion, runtime corpus expansion,
an HTTP query API, and pluggable LLM summarization of result metadata.
"""

__version__ = "0.1.0"
