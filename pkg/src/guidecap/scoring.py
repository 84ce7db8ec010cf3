"""Embedding containers and audio-text relevancy scoring.

All similarity math runs in 64-bit floats regardless of how the encoders
deliver their vectors; 32-bit payloads are widened on arrival so that argmax
decisions are reproducible across backends.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Protocol, Sequence, runtime_checkable

import numpy as np

from .errors import (
    DegenerateVectorError,
    DimensionError,
    EmptyCandidatesError,
    InvalidConfigError,
)


@dataclass(frozen=True, eq=False)
class EmbeddingVector:
    """Fixed-dimension real vector produced by an audio or text encoder."""

    values: np.ndarray

    def __post_init__(self) -> None:
        arr = np.array(self.values, dtype=np.float64, copy=True)
        if arr.ndim != 1 or arr.size == 0:
            raise DimensionError("embedding must be a non-empty 1-D vector")
        if not np.all(np.isfinite(arr)):
            raise DegenerateVectorError("embedding contains NaN or Inf")
        arr.setflags(write=False)
        object.__setattr__(self, "values", arr)

    @property
    def dim(self) -> int:
        return int(self.values.size)

    def scaled(self, factor: float) -> "EmbeddingVector":
        return EmbeddingVector(self.values * float(factor))


@runtime_checkable
class AudioTextScorer(Protocol):
    """Paired text/audio encoders that map into one shared embedding space.

    Implementations must be deterministic (same input, same vector) and must
    return vectors of ``embedding_dim`` from both encoders. Handles are never
    mutated by the engine and must tolerate concurrent read-only use.
    """

    @property
    def embedding_dim(self) -> int: ...

    def encode_text_batch(self, texts: Sequence[str]) -> list[EmbeddingVector]: ...

    def encode_audio(self, ref: str) -> EmbeddingVector: ...


def cosine_similarity(a: EmbeddingVector, b: EmbeddingVector) -> float:
    """Cosine of the angle between two embeddings, clipped into [-1, 1].

    Raises DimensionError for mismatched dims and DegenerateVectorError for
    zero-norm inputs (a zero vector signals a broken encoder, so it is an
    error rather than a silent 0.0).
    """
    if a.dim != b.dim:
        raise DimensionError(f"dimension mismatch: {a.dim} vs {b.dim}")
    aa = float(np.dot(a.values, a.values))
    bb = float(np.dot(b.values, b.values))
    if aa == 0.0 or bb == 0.0:
        raise DegenerateVectorError("cosine similarity undefined for a zero-norm vector")
    sim = float(np.dot(a.values, b.values)) / math.sqrt(aa * bb)
    return min(1.0, max(-1.0, sim))


def stable_softmax(scores: Sequence[float] | np.ndarray) -> np.ndarray:
    """Softmax with max-subtraction so large inputs cannot overflow."""
    arr = np.asarray(scores, dtype=np.float64)
    if arr.size == 0:
        raise EmptyCandidatesError("softmax over an empty score list")
    shifted = arr - np.max(arr)
    exps = np.exp(shifted)
    return exps / np.sum(exps)


def relevancy_scores(
    audio: EmbeddingVector,
    candidates: Sequence[str],
    scorer: AudioTextScorer,
    kappa: float,
) -> np.ndarray:
    """Audio-relevancy of each candidate text against one audio embedding.

    Encodes every candidate, takes its cosine similarity to the audio
    embedding, and returns softmax(kappa * similarities). The outputs are a
    probability vector: positive and summing to 1. At kappa == 0 they are
    exactly uniform.
    """
    if len(candidates) == 0:
        raise EmptyCandidatesError("no candidate texts to score")
    if not math.isfinite(kappa):
        raise InvalidConfigError(f"kappa must be finite, got {kappa!r}")
    embeddings = scorer.encode_text_batch(list(candidates))
    sims = np.array([cosine_similarity(audio, emb) for emb in embeddings])
    return stable_softmax(kappa * sims)
