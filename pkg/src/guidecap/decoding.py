"""Relevancy-guided autoregressive decoding.

Each step takes the language model's full next-token distribution, keeps the
top-m candidates by raw probability, scores the candidate continuations
against the audio embedding, and picks the candidate maximizing

    lm_prob + beta * relevancy

Decoding stops as soon as the surface form of a selected token contains a
period, or after ``max_tokens`` tokens as a safety cap.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field, replace
from typing import Protocol, Sequence, runtime_checkable

import numpy as np

from .errors import EmptyVocabularyError, InvalidConfigError
from .keywords import KeywordSelection, KeywordVocabulary, select_keywords
from .prompts import PromptTemplate, compose_prompt
from .scoring import AudioTextScorer, EmbeddingVector, relevancy_scores


@runtime_checkable
class LanguageModel(Protocol):
    """Tokenizer plus next-token distribution over a fixed vocabulary.

    ``next_token_distribution`` must return a non-negative vector of length
    ``vocab_size`` summing to 1 (within 1e-6). ``detokenize(tokenize(s))``
    must reproduce ``s`` up to the tokenizer's declared normalization.
    """

    @property
    def vocab_size(self) -> int: ...

    def tokenize(self, text: str) -> list[int]: ...

    def detokenize(self, tokens: Sequence[int]) -> str: ...

    def next_token_distribution(self, context: Sequence[int]) -> np.ndarray: ...


class StopReason(enum.Enum):
    PERIOD = "period"
    MAX_TOKENS = "max_tokens"


@dataclass(frozen=True, eq=False)
class CandidateSet:
    """The top-m candidates at one decode step.

    ``relevancy``/``combined``/``scored_texts`` are filled once the step has
    been scored; they stay None for unscored steps (pure greedy shortcut, or
    runs without audio).
    """

    tokens: np.ndarray
    lm_probs: np.ndarray
    relevancy: np.ndarray | None = None
    combined: np.ndarray | None = None
    scored_texts: tuple[str, ...] | None = None

    def __len__(self) -> int:
        return int(self.tokens.size)


@dataclass(frozen=True)
class DecodingConfig:
    """All decoding knobs.

    ``include_default_prompt_in_similarity`` controls whether the text handed
    to the text encoder starts with the default prompt (it always excludes
    the keyword prompt). ``include_default_prompt_in_caption`` prepends the
    default prompt to the emitted caption.
    """

    l: int = 2
    m: int = 45
    beta: float = 0.5
    kappa: float = 1.0
    max_tokens: int = 64
    template: PromptTemplate = field(default_factory=PromptTemplate)
    use_keywords: bool = True
    include_default_prompt_in_similarity: bool = True
    include_default_prompt_in_caption: bool = False
    record_steps: bool = False

    def __post_init__(self) -> None:
        if self.l < 1:
            raise InvalidConfigError(f"l must be >= 1, got {self.l}")
        if self.m < 1:
            raise InvalidConfigError(f"m must be >= 1, got {self.m}")
        if self.max_tokens < 1:
            raise InvalidConfigError(f"max_tokens must be >= 1, got {self.max_tokens}")
        if not self.beta >= 0.0:
            raise InvalidConfigError(f"beta must be >= 0, got {self.beta}")
        if not self.kappa >= 0.0:
            raise InvalidConfigError(f"kappa must be >= 0, got {self.kappa}")


@dataclass(frozen=True)
class DecodeResult:
    """Caption (continuation only, unless configured otherwise), the default
    prompt plus continuation, optional per-step trace, and the stop reason."""

    caption: str
    full_text: str
    steps: tuple[CandidateSet, ...] | None
    stop_reason: StopReason


def top_m_candidates(dist: Sequence[float] | np.ndarray, m: int) -> tuple[np.ndarray, np.ndarray]:
    """The m highest-probability token ids with their raw probabilities.

    Returned in descending probability order; exact ties break toward the
    lower token id.
    """
    d = np.asarray(dist, dtype=np.float64)
    if m < 1 or m > d.size:
        raise InvalidConfigError(f"m must be in [1, {d.size}], got {m}")
    order = np.argsort(-d, kind="stable")[:m]
    return order.astype(np.int64), d[order]


def score_candidates(
    candidates: CandidateSet,
    audio: EmbeddingVector,
    generated_so_far: Sequence[int],
    lm: LanguageModel,
    scorer: AudioTextScorer,
    beta: float,
    kappa: float,
) -> CandidateSet:
    """Fill in relevancy and combined scores for a candidate set.

    Every candidate continuation is detokenized from ``generated_so_far``
    (which must already exclude the keyword prompt) extended by the candidate
    token; the texts are encoded in one batched scorer call.
    """
    prefix = list(generated_so_far)
    texts = tuple(lm.detokenize(prefix + [int(tok)]) for tok in candidates.tokens)
    rel = relevancy_scores(audio, texts, scorer, kappa)
    combined = candidates.lm_probs + beta * rel
    return replace(candidates, relevancy=rel, combined=combined, scored_texts=texts)


def select_next_token(
    candidates: CandidateSet,
    audio: EmbeddingVector,
    generated_so_far: Sequence[int],
    lm: LanguageModel,
    scorer: AudioTextScorer,
    beta: float,
    kappa: float,
) -> int:
    """Token id maximizing ``lm_prob + beta * relevancy``.

    Ties break toward the candidate with the higher LM probability and then
    the lower token id (the candidate order itself).
    """
    scored = score_candidates(candidates, audio, generated_so_far, lm, scorer, beta, kappa)
    assert scored.combined is not None
    return int(scored.tokens[int(np.argmax(scored.combined))])


def decode(
    audio: EmbeddingVector | None,
    vocab: KeywordVocabulary | None,
    lm: LanguageModel,
    scorer: AudioTextScorer,
    config: DecodingConfig,
) -> DecodeResult:
    """Run the full guided decode loop for one audio clip.

    ``audio`` may be None only for the audio-free baseline (keywords disabled
    and beta == 0), in which case decoding is pure greedy from the default
    prompt. When ``beta == 0`` and no trace is requested, relevancy scoring is
    skipped entirely; this cannot change the selected tokens because adding
    ``0 * relevancy`` leaves every combined score bit-identical.
    """
    if config.m > lm.vocab_size:
        raise InvalidConfigError(
            f"m={config.m} exceeds the language model vocabulary size {lm.vocab_size}"
        )
    if audio is None and (config.use_keywords or config.beta != 0.0):
        raise InvalidConfigError("audio embedding required unless keywords are off and beta == 0")

    selection: KeywordSelection | None = None
    if config.use_keywords:
        if vocab is None or len(vocab) == 0:
            raise EmptyVocabularyError("keyword selection enabled but vocabulary is empty")
        assert audio is not None
        selection = select_keywords(audio, vocab, scorer, config.l)

    prompt = compose_prompt(config.template, selection)
    lm_context = list(lm.tokenize(prompt.text))
    default_tokens = list(lm.tokenize(config.template.default_prompt))
    sim_prefix = default_tokens if config.include_default_prompt_in_similarity else []

    continuation: list[int] = []
    steps: list[CandidateSet] | None = [] if config.record_steps else None
    stop_reason = StopReason.MAX_TOKENS

    for _ in range(config.max_tokens):
        dist = lm.next_token_distribution(lm_context)
        tokens, lm_probs = top_m_candidates(dist, config.m)
        candidates = CandidateSet(tokens, lm_probs)

        if audio is not None and (config.beta != 0.0 or config.record_steps):
            candidates = score_candidates(
                candidates, audio, sim_prefix + continuation, lm, scorer,
                config.beta, config.kappa,
            )
            assert candidates.combined is not None
            choice = int(np.argmax(candidates.combined))
        else:
            choice = 0  # candidates are sorted by probability, so 0 is the greedy pick

        if steps is not None:
            steps.append(candidates)
        token = int(tokens[choice])
        lm_context.append(token)
        continuation.append(token)
        if "." in lm.detokenize([token]):
            stop_reason = StopReason.PERIOD
            break

    caption_tokens = (
        default_tokens + continuation if config.include_default_prompt_in_caption else continuation
    )
    return DecodeResult(
        caption=lm.detokenize(caption_tokens).strip(),
        full_text=lm.detokenize(default_tokens + continuation),
        steps=tuple(steps) if steps is not None else None,
        stop_reason=stop_reason,
    )
