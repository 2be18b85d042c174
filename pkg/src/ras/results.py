"""Search results as presented to callers: ranked hits joined with metadata.

Centralizing this join means the HTTP service and the offline CLI query
path produce identical result rows by construction.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Sequence

from .iiif import DEFAULT_IIIF_BASE, iiif_image_url
from .scoring import RankedHit
from .store import MetadataRecord


@dataclass(frozen=True)
class SearchResult:
    """One ranked answer. ``collection`` feeds analysis prompts and is not
    part of the JSON response shape."""

    doc_id: str
    title: str
    image_url: str
    resource_url: str
    doc_type: str
    score: float
    rank: int
    collection: str = ""

    def to_dict(self) -> dict:
        return {
            "doc_id": self.doc_id,
            "title": self.title,
            "image_url": self.image_url,
            "resource_url": self.resource_url,
            "doc_type": self.doc_type,
            "score": self.score,
            "rank": self.rank,
        }


def build_results(
    hits: Sequence[RankedHit],
    meta: Mapping[str, MetadataRecord],
    *,
    iiif_base: str = DEFAULT_IIIF_BASE,
) -> list[SearchResult]:
    """Join ranked hits with metadata; ranks are 1-based positions.

    A document with no metadata row still gets a result (empty fields);
    a missing image_url falls back to the IIIF URL derived from the id.
    """
    out = []
    for rank, hit in enumerate(hits, start=1):
        rec = meta.get(hit.doc_id)
        image_url = rec.extra.get("image_url", "") if rec else ""
        if not image_url:
            image_url = iiif_image_url(hit.doc_id, iiif_base)
        out.append(
            SearchResult(
                doc_id=hit.doc_id,
                title=rec.title if rec else "",
                image_url=image_url,
                resource_url=rec.resource_url if rec else "",
                doc_type=rec.doc_type if rec else "",
                score=float(hit.score),
                rank=rank,
                collection=rec.collection if rec else "",
            )
        )
    return out
