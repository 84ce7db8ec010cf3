"""Exception types shared across the engine."""


class GuidecapError(Exception):
    """Base class for all errors raised by this package."""


class DimensionError(GuidecapError):
    """Embedding dimensions disagree with each other or with the backend."""


class DegenerateVectorError(GuidecapError):
    """An embedding is all-zero or non-finite where that is not allowed."""


class EmptyCandidatesError(GuidecapError):
    """Relevancy scoring was asked to score an empty candidate list."""


class ScorerError(GuidecapError):
    """An encoder backend failed while producing an embedding."""


class InvalidConfigError(GuidecapError):
    """A decoding knob is outside its valid range."""


class EmptyVocabularyError(GuidecapError):
    """Keyword parsing produced no keywords, or selection got an empty vocabulary."""


class EmptyCorpusError(GuidecapError):
    """A corpus-level operation received no items/sentences."""


class InsufficientCorpusError(GuidecapError):
    """CIDEr needs at least two items to form document frequencies."""


class ProtocolVersionError(GuidecapError):
    """Handshake failed because the two sides speak different protocol versions."""


class TransportError(GuidecapError):
    """The wire connection could not be established or broke mid-conversation."""


class ContractViolationError(GuidecapError):
    """A backend response violates the protocol contract (shape, sum, or dim)."""


class FormatError(GuidecapError):
    """A binary embedding file is malformed."""


class ManifestError(GuidecapError):
    """A dataset manifest line could not be parsed or fails validation."""
