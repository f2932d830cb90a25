"""Exception hierarchy shared across the package."""


class TutorkitError(Exception):
    """Base class for all package errors."""


# --- ingest ---

class SchemaError(TutorkitError):
    """Interchange payload does not match the expected schema."""


class EncodingError(TutorkitError):
    """Payload bytes are not valid UTF-8."""


class PageOutOfRange(TutorkitError):
    """A block references a page beyond the declared page count."""


class EmptyMerge(TutorkitError):
    """No blocks survived from any extractor."""


# --- chunker ---

class PolicyError(TutorkitError):
    """Invalid chunking policy (e.g. overlap >= max tokens)."""


class EmptyDocument(TutorkitError):
    """Document has no chunkable content."""


# --- embed ---

class AuthError(TutorkitError):
    """Missing or rejected API credentials."""


class TransportError(TutorkitError):
    """Network failure that survived the retry policy."""


class DimensionMismatch(TutorkitError):
    """Vector dimensions disagree."""


class ZeroVector(TutorkitError):
    """Operation undefined on the zero vector."""


# --- index ---

class DuplicateChunkId(TutorkitError):
    """Two index entries share a chunk_id."""


class EmptyIndex(TutorkitError):
    """Search over an index with no entries."""


class VersionMismatch(TutorkitError):
    """Index file format version is not supported."""


class ChecksumError(TutorkitError):
    """Index file payload failed checksum validation."""


class TruncatedFile(TutorkitError):
    """Index file ended before the declared payload length."""


# --- guardrail ---

class EmptyQuestion(TutorkitError):
    """Question is empty after trimming."""


# --- answer ---

class EmptyContext(TutorkitError):
    """No retrieval results available for prompt assembly."""


class BudgetTooSmall(TutorkitError):
    """Context budget cannot fit even the smallest chunk."""


class ModelRefusal(TutorkitError):
    """Generation endpoint returned an empty completion."""


# --- eval ---

class UndefinedMetric(TutorkitError):
    """Metric denominator is zero."""


class EmptyInput(TutorkitError):
    """Metric computed over an empty collection."""
