"""Audio-guided caption decoding engine.

The package steers a language model's token-by-token output with audio-text
similarity scores and audio-derived keyword prompts, and ships the metric and
ablation machinery needed to evaluate the generated captions.
"""

from .decoding import (
    CandidateSet,
    DecodeResult,
    DecodingConfig,
    LanguageModel,
    StopReason,
    decode,
    score_candidates,
    select_next_token,
    top_m_candidates,
)
from .errors import (
    ContractViolationError,
    DegenerateVectorError,
    DimensionError,
    EmptyCandidatesError,
    EmptyCorpusError,
    EmptyVocabularyError,
    FormatError,
    GuidecapError,
    InsufficientCorpusError,
    InvalidConfigError,
    ManifestError,
    ProtocolVersionError,
    ScorerError,
    TransportError,
)
from .files import (
    ManifestEntry,
    read_embedding_file,
    read_manifest,
    write_embedding_file,
    write_manifest,
)
from .keywords import (
    KeywordSelection,
    KeywordVocabulary,
    load_bundled_keywords,
    load_keyword_file,
    parse_keyword_list,
    select_keywords,
)
from .metrics import (
    EvalCorpus,
    EvalItem,
    MetricReport,
    bleu,
    cider,
    evaluate_corpus,
    rouge_l,
    tokenize_caption,
)
from .prompts import ComposedPrompt, PromptTemplate, compose_prompt
from .protocol import PROTOCOL_VERSION, connect, connect_stream, serve_connection
from .scoring import (
    AudioTextScorer,
    EmbeddingVector,
    cosine_similarity,
    relevancy_scores,
    stable_softmax,
)
from .toy import (
    HashingEmbedder,
    ToyNgramLM,
    fnv1a64,
    generate_synthetic_dataset,
    hash_embed,
    reference_decode,
    toy_lm_from_corpus,
)

__version__ = "0.1.0"

__all__ = [
    "AudioTextScorer",
    "CandidateSet",
    "ComposedPrompt",
    "ContractViolationError",
    "DecodeResult",
    "DecodingConfig",
    "DegenerateVectorError",
    "DimensionError",
    "EmbeddingVector",
    "EmptyCandidatesError",
    "EmptyCorpusError",
    "EmptyVocabularyError",
    "EvalCorpus",
    "EvalItem",
    "FormatError",
    "GuidecapError",
    "HashingEmbedder",
    "InsufficientCorpusError",
    "InvalidConfigError",
    "KeywordSelection",
    "KeywordVocabulary",
    "LanguageModel",
    "ManifestEntry",
    "ManifestError",
    "MetricReport",
    "PROTOCOL_VERSION",
    "PromptTemplate",
    "ProtocolVersionError",
    "ScorerError",
    "StopReason",
    "ToyNgramLM",
    "TransportError",
    "bleu",
    "cider",
    "compose_prompt",
    "connect",
    "connect_stream",
    "cosine_similarity",
    "decode",
    "evaluate_corpus",
    "fnv1a64",
    "generate_synthetic_dataset",
    "hash_embed",
    "load_bundled_keywords",
    "load_keyword_file",
    "parse_keyword_list",
    "read_embedding_file",
    "read_manifest",
    "reference_decode",
    "relevancy_scores",
    "rouge_l",
    "score_candidates",
    "select_keywords",
    "select_next_token",
    "serve_connection",
    "stable_softmax",
    "tokenize_caption",
    "top_m_candidates",
    "toy_lm_from_corpus",
    "write_embedding_file",
    "write_manifest",
]
