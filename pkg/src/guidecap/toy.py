"""Deterministic toy models for desk-scale verification.

These stand in for the neural backends: a word-level n-gram language model
with additive smoothing, and a seeded feature-hashing text embedder. Both are
dependency-free, platform-independent, and fast enough to drive hundreds of
decodes in property tests. The module also carries ``reference_decode``, a
naive re-implementation of the decode loop used as a verification oracle, and
a generator for synthetic caption datasets on which relevancy guidance
provably changes the output.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .decoding import CandidateSet, DecodeResult, DecodingConfig, StopReason, decode
from .errors import EmptyCorpusError, EmptyVocabularyError, InvalidConfigError
from .files import ManifestEntry, write_config_file, write_embedding_file, write_manifest
from .keywords import KeywordSelection, KeywordVocabulary, parse_keyword_list
from .prompts import PromptTemplate, compose_prompt
from .scoring import EmbeddingVector, cosine_similarity, relevancy_scores

_FNV_OFFSET = 0xCBF29CE484222325
_FNV_PRIME = 0x100000001B3
_U64 = (1 << 64) - 1


def fnv1a64(data: bytes, seed: int = 0) -> int:
    """Seeded 64-bit FNV-1a hash.

    The eight little-endian bytes of ``seed`` are absorbed before ``data``,
    so the function stays a plain byte-for-byte FNV-1a loop and is trivial to
    reproduce in any language. Frozen reference values:

        fnv1a64(b"", seed=0)    == 0xa8c7f832281a39c5
        fnv1a64(b"dog", seed=0) == 0x921575db54289d09
        fnv1a64(b"dog", seed=1) == 0x8a1bf5e46b9d540e
    """
    h = _FNV_OFFSET
    for b in (seed & _U64).to_bytes(8, "little"):
        h = ((h ^ b) * _FNV_PRIME) & _U64
    for b in data:
        h = ((h ^ b) * _FNV_PRIME) & _U64
    return h


def _token_slot(token: str, dim: int, seed: int) -> tuple[int, float]:
    h = fnv1a64(token.encode("utf-8"), seed)
    return h % dim, 1.0 if (h >> 63) == 0 else -1.0


def hash_embed(text: str, dim: int = 64, seed: int = 0) -> EmbeddingVector:
    """Signed one-hot feature hashing of whitespace tokens.

    Every token adds +-1 at a hashed coordinate. If the accumulated vector is
    exactly zero (empty text, or full sign cancellation) it falls back to the
    fixed empty-string slot, so the result is never the zero vector.
    """
    if dim < 1:
        raise InvalidConfigError(f"dim must be >= 1, got {dim}")
    values = np.zeros(dim, dtype=np.float64)
    for token in text.split():
        idx, sign = _token_slot(token, dim, seed)
        values[idx] += sign
    if not np.any(values):
        idx, sign = _token_slot("", dim, seed)
        values[idx] = sign
    return EmbeddingVector(values)


class HashingEmbedder:
    """AudioTextScorer backed by ``hash_embed``.

    Audio references are treated as literal description strings and embedded
    exactly like text, so synthetic "clips" are just hidden descriptions.
    Per-token slots are memoized; this changes nothing observable because the
    hash is pure.
    """

    def __init__(self, dim: int = 64, seed: int = 0):
        if dim < 1:
            raise InvalidConfigError(f"dim must be >= 1, got {dim}")
        self._dim = dim
        self._seed = seed
        self._slots: dict[str, tuple[int, float]] = {}

    @property
    def embedding_dim(self) -> int:
        return self._dim

    @property
    def seed(self) -> int:
        return self._seed

    def _slot(self, token: str) -> tuple[int, float]:
        slot = self._slots.get(token)
        if slot is None:
            slot = _token_slot(token, self._dim, self._seed)
            self._slots[token] = slot
        return slot

    def encode_text(self, text: str) -> EmbeddingVector:
        values = np.zeros(self._dim, dtype=np.float64)
        for token in text.split():
            idx, sign = self._slot(token)
            values[idx] += sign
        if not np.any(values):
            idx, sign = self._slot("")
            values[idx] = sign
        return EmbeddingVector(values)

    def encode_text_batch(self, texts: Sequence[str]) -> list[EmbeddingVector]:
        return [self.encode_text(t) for t in texts]

    def encode_audio(self, ref: str) -> EmbeddingVector:
        return self.encode_text(ref)


class ToyNgramLM:
    """Word-level n-gram language model with add-alpha smoothing.

    Tokenization is whitespace splitting over the corpus vocabulary;
    out-of-vocabulary words are dropped (that is the declared tokenizer
    normalization, together with whitespace collapsing). Detokenization joins
    tokens with single spaces. Unseen or too-short contexts fall back to the
    smoothed unigram distribution.
    """

    def __init__(
        self,
        vocab: Sequence[str],
        context_counts: dict[tuple[int, ...], np.ndarray],
        unigram_counts: np.ndarray,
        order: int,
        alpha: float,
    ):
        self._vocab = tuple(vocab)
        self._index = {w: i for i, w in enumerate(self._vocab)}
        self._context_counts = context_counts
        self._unigram_counts = unigram_counts
        self.order = order
        self.alpha = alpha

    @property
    def vocab_size(self) -> int:
        return len(self._vocab)

    @property
    def vocab(self) -> tuple[str, ...]:
        return self._vocab

    def tokenize(self, text: str) -> list[int]:
        return [self._index[w] for w in text.split() if w in self._index]

    def detokenize(self, tokens: Sequence[int]) -> str:
        words = []
        for t in tokens:
            t = int(t)
            if not 0 <= t < len(self._vocab):
                raise ValueError(f"token id {t} out of range")
            words.append(self._vocab[t])
        return " ".join(words)

    def next_token_distribution(self, context: Sequence[int]) -> np.ndarray:
        counts = self._unigram_counts
        if self.order > 1 and len(context) >= self.order - 1:
            ctx = tuple(int(t) for t in context[-(self.order - 1):])
            counts = self._context_counts.get(ctx, self._unigram_counts)
        total = float(counts.sum())
        return (counts + self.alpha) / (total + self.alpha * len(self._vocab))


def toy_lm_from_corpus(
    sentences: Sequence[str], order: int = 2, alpha: float = 0.1
) -> ToyNgramLM:
    """Count n-grams over whitespace-tokenized sentences.

    N-grams never cross sentence boundaries and no boundary markers are
    added, so with corpus ["a b ."] and order 2 the probability of "b" after
    "a" is (1 + alpha) / (1 + 3 alpha).
    """
    if order < 1:
        raise InvalidConfigError(f"order must be >= 1, got {order}")
    if not alpha > 0:
        raise InvalidConfigError(f"alpha must be > 0, got {alpha}")
    tokenized = [s.split() for s in sentences]
    tokenized = [t for t in tokenized if t]
    if not tokenized:
        raise EmptyCorpusError("corpus has no non-empty sentences")

    vocab: list[str] = []
    index: dict[str, int] = {}
    for words in tokenized:
        for w in words:
            if w not in index:
                index[w] = len(vocab)
                vocab.append(w)

    v = len(vocab)
    unigram = np.zeros(v, dtype=np.float64)
    contexts: dict[tuple[int, ...], np.ndarray] = {}
    for words in tokenized:
        ids = [index[w] for w in words]
        for i, tok in enumerate(ids):
            unigram[tok] += 1.0
            if order > 1 and i >= order - 1:
                ctx = tuple(ids[i - order + 1 : i])
                table = contexts.get(ctx)
                if table is None:
                    table = np.zeros(v, dtype=np.float64)
                    contexts[ctx] = table
                table[tok] += 1.0
    return ToyNgramLM(vocab, contexts, unigram, order, alpha)


def reference_decode(
    audio: EmbeddingVector | None,
    vocab: KeywordVocabulary | None,
    lm,
    scorer,
    config: DecodingConfig,
) -> DecodeResult:
    """Naive mirror of the engine decode loop, used as an oracle.

    Everything is recomputed from scratch at every step: the prompt is
    re-tokenized, keyword similarities are re-encoded without any cache, and
    candidates come from a full sort of the vocabulary instead of a top-m
    selection. Relevancy values go through the same public scoring function,
    so any disagreement with ``decode`` isolates a wiring bug in selection,
    caching, context management, or the stop rule.
    """
    if config.m > lm.vocab_size:
        raise InvalidConfigError("m exceeds vocabulary size")
    if audio is None and (config.use_keywords or config.beta != 0.0):
        raise InvalidConfigError("audio embedding required unless keywords are off and beta == 0")

    selection: KeywordSelection | None = None
    if config.use_keywords:
        if vocab is None or len(vocab) == 0:
            raise EmptyVocabularyError("keyword selection enabled but vocabulary is empty")
        sims = []
        for kw in vocab.keywords:
            emb = scorer.encode_text_batch([kw])[0]
            sims.append(cosine_similarity(audio, emb))
        ranked = sorted(range(len(sims)), key=lambda i: (-sims[i], i))
        chosen = ranked[: min(config.l, len(sims))]
        selection = KeywordSelection(tuple((vocab.keywords[i], sims[i]) for i in chosen))

    prompt_text = compose_prompt(config.template, selection).text
    continuation: list[int] = []
    stop_reason = StopReason.MAX_TOKENS
    steps: list[CandidateSet] | None = [] if config.record_steps else None

    while len(continuation) < config.max_tokens:
        context = list(lm.tokenize(prompt_text)) + continuation
        dist = np.asarray(lm.next_token_distribution(context), dtype=np.float64)
        full_order = sorted(range(dist.size), key=lambda i: (-dist[i], i))
        cand_ids = full_order[: config.m]
        cand_probs = np.array([dist[i] for i in cand_ids])

        if audio is not None and (config.beta != 0.0 or config.record_steps):
            sim_tokens = (
                list(lm.tokenize(config.template.default_prompt))
                if config.include_default_prompt_in_similarity
                else []
            ) + continuation
            texts = tuple(lm.detokenize(sim_tokens + [c]) for c in cand_ids)
            rel = relevancy_scores(audio, texts, scorer, config.kappa)
            combined = cand_probs + config.beta * rel
            best = 0
            for i in range(1, len(cand_ids)):
                if combined[i] > combined[best]:
                    best = i
            candidates = CandidateSet(
                np.array(cand_ids, dtype=np.int64), cand_probs, rel, combined, texts
            )
        else:
            best = 0
            candidates = CandidateSet(np.array(cand_ids, dtype=np.int64), cand_probs)

        if steps is not None:
            steps.append(candidates)
        token = int(cand_ids[best])
        continuation.append(token)
        if "." in lm.detokenize([token]):
            stop_reason = StopReason.PERIOD
            break

    default_tokens = list(lm.tokenize(config.template.default_prompt))
    caption_tokens = (
        default_tokens + continuation if config.include_default_prompt_in_caption else continuation
    )
    return DecodeResult(
        caption=lm.detokenize(caption_tokens).strip(),
        full_text=lm.detokenize(default_tokens + continuation),
        steps=tuple(steps) if steps is not None else None,
        stop_reason=stop_reason,
    )


SYNTHETIC_EVENTS: tuple[tuple[str, str], ...] = (
    ("siren", "wailing"),
    ("dog", "barking"),
    ("rain", "falling"),
    ("piano", "playing"),
    ("engine", "idling"),
    ("birds", "chirping"),
    ("thunder", "rumbling"),
    ("crowd", "cheering"),
    ("wind", "blowing"),
    ("water", "dripping"),
    ("bell", "ringing"),
    ("horse", "galloping"),
)

_SYNTHETIC_TEMPLATE = PromptTemplate(
    keyword_prefix="objects: ",
    keyword_joiner=" ",
    keyword_suffix=" . ",
    default_prompt="this is a sound of",
)


@dataclass(frozen=True)
class SyntheticDataset:
    """Paths and expectations for a generated synthetic caption dataset."""

    manifest_path: Path
    config_path: Path
    corpus_path: Path
    keywords_path: Path
    descriptions: tuple[tuple[str, str], ...]
    expected_guided: tuple[str, ...]
    expected_unguided: str


def synthetic_decoding_config(
    m: int = 20, beta: float = 0.5, kappa: float = 2.0, max_tokens: int = 16
) -> DecodingConfig:
    return DecodingConfig(
        l=2, m=m, beta=beta, kappa=kappa, max_tokens=max_tokens,
        template=_SYNTHETIC_TEMPLATE,
    )


def generate_synthetic_dataset(
    out_dir: str | Path,
    n_clips: int = 50,
    seed: int = 7,
    dim: int = 256,
    order: int = 2,
    alpha: float = 0.05,
    reps: int = 3,
    m: int = 20,
    beta: float = 0.5,
    kappa: float = 2.0,
) -> SyntheticDataset:
    """Write a synthetic manifest on which relevancy guidance matters.

    The corpus gives every sound event the same count, so after the prompt
    the language model is exactly tied across event nouns and greedy decoding
    always emits the first event in vocabulary order. Each clip's hidden
    description shares words with one target event, so any positive relevancy
    edge flips the tied step toward the target. The generator replays every
    clip through both the guided and unguided decoder and refuses seeds where
    hash collisions spoil that construction.
    """
    out = Path(out_dir)
    (out / "embeddings").mkdir(parents=True, exist_ok=True)

    corpus = [f"this is a sound of {noun} {verb} ." for noun, verb in SYNTHETIC_EVENTS] * reps
    lm = toy_lm_from_corpus(corpus, order=order, alpha=alpha)
    embedder = HashingEmbedder(dim=dim, seed=seed)
    keyword_words = [w for pair in SYNTHETIC_EVENTS for w in pair]
    vocab = parse_keyword_list(keyword_words)

    rng = np.random.default_rng(seed)
    config = synthetic_decoding_config(m=m, beta=beta, kappa=kappa)
    unguided_config = DecodingConfig(
        l=config.l, m=config.m, beta=0.0, kappa=config.kappa,
        max_tokens=config.max_tokens, template=config.template,
    )

    first_noun, first_verb = SYNTHETIC_EVENTS[0]
    expected_unguided = f"{first_noun} {first_verb} ."

    entries: list[ManifestEntry] = []
    descriptions: list[tuple[str, str]] = []
    expected_guided: list[str] = []
    for i in range(n_clips):
        noun, verb = SYNTHETIC_EVENTS[int(rng.integers(len(SYNTHETIC_EVENTS)))]
        clip_id = f"clip_{i:03d}"
        description = f"{noun} {verb}"
        audio = embedder.encode_text(description)

        guided = decode(audio, vocab, lm, embedder, config)
        unguided = decode(audio, vocab, lm, embedder, unguided_config)
        expected = f"{noun} {verb} ."
        if guided.caption != expected or unguided.caption != expected_unguided:
            raise ValueError(
                f"seed {seed} produces a degenerate synthetic family at {clip_id}: "
                f"guided={guided.caption!r}, unguided={unguided.caption!r}"
            )

        rel_path = f"embeddings/{clip_id}.aemb"
        write_embedding_file(out / rel_path, audio.values)
        references = (
            f"a {noun} is {verb}",
            f"the sound of a {noun} {verb}",
            f"{noun} {verb}",
        )
        entries.append(ManifestEntry(clip_id, rel_path, None, references))
        descriptions.append((clip_id, description))
        expected_guided.append(expected)

    manifest_path = out / "manifest.jsonl"
    write_manifest(manifest_path, entries)
    corpus_path = out / "corpus.txt"
    corpus_path.write_text("\n".join(corpus) + "\n", encoding="utf-8")
    keywords_path = out / "keywords.txt"
    keywords_path.write_text("\n".join(vocab.keywords) + "\n", encoding="utf-8")
    config_path = out / "run.cfg"
    write_config_file(
        config_path,
        {
            "backend": "toy",
            "toy_corpus": "corpus.txt",
            "toy_order": order,
            "toy_alpha": alpha,
            "embed_dim": dim,
            "embed_seed": seed,
            "keywords_file": "keywords.txt",
            "l": config.l,
            "m": m,
            "beta": beta,
            "kappa": kappa,
            "max_tokens": config.max_tokens,
            "keyword_prefix": _SYNTHETIC_TEMPLATE.keyword_prefix,
            "keyword_joiner": _SYNTHETIC_TEMPLATE.keyword_joiner,
            "keyword_suffix": _SYNTHETIC_TEMPLATE.keyword_suffix,
            "default_prompt": _SYNTHETIC_TEMPLATE.default_prompt,
        },
    )
    return SyntheticDataset(
        manifest_path=manifest_path,
        config_path=config_path,
        corpus_path=corpus_path,
        keywords_path=keywords_path,
        descriptions=tuple(descriptions),
        expected_guided=tuple(expected_guided),
        expected_unguided=expected_unguided,
    )
