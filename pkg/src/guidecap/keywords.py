"""Keyword vocabulary parsing and top-l keyword selection."""

from __future__ import annotations

from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Iterable

import numpy as np

from .errors import EmptyVocabularyError, InvalidConfigError
from .scoring import AudioTextScorer, EmbeddingVector, cosine_similarity

BUNDLED_KEYWORDS_RESOURCE = "audioset_614.txt"


@dataclass(frozen=True, eq=False)
class KeywordVocabulary:
    """Ordered, duplicate-free keyword list with an optional embedding cache.

    The cache, when present, is aligned index-for-index with ``keywords`` and
    must have been produced by the same scorer that will consume it.
    """

    keywords: tuple[str, ...]
    embeddings: tuple[EmbeddingVector, ...] | None = None

    def __post_init__(self) -> None:
        if not self.keywords:
            raise EmptyVocabularyError("vocabulary must contain at least one keyword")
        seen = set()
        for kw in self.keywords:
            if not kw or kw != kw.strip():
                raise ValueError(f"keyword not trimmed or empty: {kw!r}")
            if "\n" in kw:
                raise ValueError(f"keyword contains a newline: {kw!r}")
            if kw in seen:
                raise ValueError(f"duplicate keyword: {kw!r}")
            seen.add(kw)
        if self.embeddings is not None and len(self.embeddings) != len(self.keywords):
            raise ValueError("embedding cache is not aligned with the keyword list")

    def __len__(self) -> int:
        return len(self.keywords)

    def render_lines(self) -> list[str]:
        """One keyword per line; reparsing these lines reproduces the vocabulary."""
        return list(self.keywords)

    def with_embeddings(self, scorer: AudioTextScorer) -> "KeywordVocabulary":
        """Copy of this vocabulary with every keyword encoded once and cached."""
        if self.embeddings is not None:
            return self
        encoded = tuple(scorer.encode_text_batch(list(self.keywords)))
        return KeywordVocabulary(self.keywords, encoded)


@dataclass(frozen=True)
class KeywordSelection:
    """Top-l keywords with their similarities, sorted best first."""

    selected: tuple[tuple[str, float], ...]

    def __post_init__(self) -> None:
        sims = [s for _, s in self.selected]
        if any(a < b for a, b in zip(sims, sims[1:])):
            raise ValueError("selection similarities must be non-increasing")

    @property
    def keywords(self) -> tuple[str, ...]:
        return tuple(kw for kw, _ in self.selected)

    def __len__(self) -> int:
        return len(self.selected)

    @classmethod
    def empty(cls) -> "KeywordSelection":
        return cls(())


def parse_keyword_list(raw_lines: Iterable[str]) -> KeywordVocabulary:
    """Build a vocabulary from raw class-label lines.

    Each line is split on commas, fragments are trimmed of surrounding
    whitespace, empty fragments are dropped, and duplicates are removed
    keeping the first occurrence. Order follows first appearance.
    """
    seen: set[str] = set()
    keywords: list[str] = []
    for line in raw_lines:
        for fragment in line.split(","):
            fragment = fragment.strip()
            if fragment and fragment not in seen:
                seen.add(fragment)
                keywords.append(fragment)
    if not keywords:
        raise EmptyVocabularyError("no keywords found in input")
    return KeywordVocabulary(tuple(keywords))


def load_keyword_file(path: str | Path) -> KeywordVocabulary:
    """Parse a UTF-8 keyword file; lines starting with '#' are comments."""
    text = Path(path).read_text(encoding="utf-8-sig")
    lines = [line for line in text.splitlines() if not line.startswith("#")]
    return parse_keyword_list(lines)


def load_bundled_keywords() -> KeywordVocabulary:
    """The AudioSet-derived keyword list shipped with the package (614 entries)."""
    text = resources.files("guidecap.data").joinpath(BUNDLED_KEYWORDS_RESOURCE).read_text("utf-8")
    lines = [line for line in text.splitlines() if not line.startswith("#")]
    return parse_keyword_list(lines)


def select_keywords(
    audio: EmbeddingVector,
    vocab: KeywordVocabulary,
    scorer: AudioTextScorer,
    l: int,
) -> KeywordSelection:
    """Top-l keywords by cosine similarity between audio and keyword embeddings.

    Ties break toward the earlier vocabulary index, so results are identical
    across runs and platforms. If ``l`` exceeds the vocabulary size, every
    keyword is returned, ranked.
    """
    if l < 1:
        raise InvalidConfigError(f"l must be >= 1, got {l}")
    embeddings = vocab.embeddings
    if embeddings is None:
        embeddings = tuple(scorer.encode_text_batch(list(vocab.keywords)))
    sims = np.array([cosine_similarity(audio, emb) for emb in embeddings])
    order = np.argsort(-sims, kind="stable")[: min(l, len(vocab))]
    return KeywordSelection(tuple((vocab.keywords[i], float(sims[i])) for i in order))
