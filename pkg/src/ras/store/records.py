"""Domain records stored in the corpus: embeddings and their metadata."""

from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from ..errors import InvalidArgument
from ..scoring import ensure_matrix


class Source(Enum):
    """Where a document entered the corpus from."""

    BASE_CORPUS = "base_corpus"
    USER_UPLOAD = "user_upload"
    FEDERATED_IMPORT = "federated_import"


@dataclass
class DocumentEmbedding:
    """One document's patch-embedding matrix keyed by its unique id.

    The matrix is validated and coerced to float32 C-order on construction.
    ``source`` is runtime bookkeeping only; it is not part of the shard
    format and resets to BASE_CORPUS on reload.
    """

    doc_id: str
    matrix: np.ndarray
    source: Source = Source.BASE_CORPUS

    def __post_init__(self):
        if not isinstance(self.doc_id, str) or not self.doc_id:
            raise InvalidArgument("doc_id must be a non-empty string")
        self.matrix = ensure_matrix(self.matrix, name=f"document {self.doc_id}")
        if not isinstance(self.source, Source):
            raise InvalidArgument(f"source must be a Source, got {self.source!r}")

    @property
    def rows(self) -> int:
        return int(self.matrix.shape[0])

    @property
    def dim(self) -> int:
        return int(self.matrix.shape[1])


@dataclass
class MetadataRecord:
    """Descriptive fields for one document.

    The five named fields are the pinned CSV columns; anything else a
    caller wants to carry rides in ``extra``.
    """

    doc_id: str
    title: str = ""
    resource_url: str = ""
    doc_type: str = ""
    collection: str = ""
    extra: dict[str, str] = field(default_factory=dict)

    def __post_init__(self):
        if not isinstance(self.doc_id, str) or not self.doc_id:
            raise InvalidArgument("doc_id must be a non-empty string")
