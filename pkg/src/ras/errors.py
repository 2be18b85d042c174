"""Exception types shared across the engine.

Every error raised by engine code derives from :class:`RasError` so callers
can catch engine failures without also swallowing programming errors.
"""


class RasError(Exception):
    """Base class for all engine errors."""


class DimensionError(RasError):
    """Embedding dimensionality does not match what the operation requires."""


class InvalidEmbedding(RasError):
    """An embedding matrix is malformed (wrong shape, non-finite values)."""


class InvalidArgument(RasError):
    """A caller-supplied parameter is out of its allowed range."""


class DuplicateDocument(RasError):
    """A document id collides with one already present."""


class NotFound(RasError):
    """A referenced document id does not exist."""


class IntegrityError(RasError):
    """A shard file failed structural or checksum validation."""


class ManifestError(RasError):
    """An ingest manifest is structurally unusable (e.g. missing columns)."""


class IngestLockError(RasError):
    """Another ingest run holds the corpus directory's lock file."""


class InvalidImage(RasError):
    """Image bytes could not be decoded."""


class UpstreamUnavailable(RasError):
    """A required upstream service (embedder, LLM) could not be reached."""


class UpstreamTimeout(UpstreamUnavailable):
    """An upstream call exceeded its deadline."""


class ConfigError(RasError):
    """Runtime configuration is inconsistent (e.g. embedder dim vs corpus dim)."""
