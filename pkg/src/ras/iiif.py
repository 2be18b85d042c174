"""IIIF Image API URL construction.

Manifests may carry either a full image URL or a bare IIIF identifier;
bare identifiers are turned into a bounded-size derivative request
(``!1000,1000`` fits the embedder's own resize, full resolution would be
wasted bytes). Slashes inside an identifier are percent-encoded because
the identifier occupies a single path segment in the IIIF grammar.
"""

from urllib.parse import quote

DEFAULT_IIIF_BASE = "https://tile.loc.gov/image-services/iiif"
IIIF_PATH_SUFFIX = "full/!1000,1000/0/default.jpg"


def iiif_image_url(identifier: str, base: str = DEFAULT_IIIF_BASE) -> str:
    """Image request URL for a bare IIIF identifier."""
    return f"{base.rstrip('/')}/{quote(identifier, safe=':')}/{IIIF_PATH_SUFFIX}"


def resolve_image_url(value: str, base: str = DEFAULT_IIIF_BASE) -> str:
    """Pass absolute URLs through; treat anything else as an identifier."""
    if value.startswith(("http://", "https://")):
        return value
    return iiif_image_url(value, base)
