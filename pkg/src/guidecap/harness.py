"""End-to-end caption runs: config resolution, backends, modes, evaluation.

A run is described by a flat key = value config file (see files.py) whose
values can be overridden from the CLI. Relative paths inside a config are
resolved against the config file's directory.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Callable, Sequence

from .decoding import DecodeResult, DecodingConfig, decode
from .errors import DimensionError, InvalidConfigError, ManifestError
from .files import ManifestEntry, read_embedding_file, read_manifest
from .keywords import KeywordVocabulary, load_bundled_keywords, load_keyword_file
from .metrics import EvalCorpus, EvalItem, MetricReport, cider_items, evaluate_corpus, rouge_l_items
from .prompts import PromptTemplate
from .protocol import connect
from .scoring import EmbeddingVector, cosine_similarity
from .toy import HashingEmbedder, toy_lm_from_corpus

BACKEND_ENV_VAR = "GUIDECAP_BACKEND"
MODES = ("full", "no_keywords", "no_guiding", "no_audio")

_TEMPLATE_KEYS = ("keyword_prefix", "keyword_joiner", "keyword_suffix", "default_prompt")
_DECODING_KEYS = (
    "l", "m", "beta", "kappa", "max_tokens", "use_keywords",
    "include_default_prompt_in_similarity", "include_default_prompt_in_caption",
)
_BACKEND_KEYS = (
    "backend", "toy_corpus", "toy_order", "toy_alpha", "embed_dim", "embed_seed",
    "keywords_file",
)

KNOWN_CONFIG_KEYS = frozenset(_TEMPLATE_KEYS + _DECODING_KEYS + _BACKEND_KEYS)


@dataclass(frozen=True)
class RunOptions:
    """Fully resolved options for one caption run."""

    decoding: DecodingConfig
    backend: str = "toy"
    toy_corpus: Path | None = None
    toy_order: int = 2
    toy_alpha: float = 0.1
    embed_dim: int = 64
    embed_seed: int = 0
    keywords_file: Path | None = None


def resolve_options(
    config_values: dict[str, object],
    base_dir: Path | None = None,
    overrides: dict[str, object] | None = None,
) -> RunOptions:
    """Merge config-file values and CLI overrides into RunOptions."""
    merged = dict(config_values)
    if overrides:
        merged.update({k: v for k, v in overrides.items() if v is not None})
    unknown = set(merged) - KNOWN_CONFIG_KEYS
    if unknown:
        raise InvalidConfigError(f"unknown config keys: {sorted(unknown)}")

    template_kwargs = {k: str(merged[k]) for k in _TEMPLATE_KEYS if k in merged}
    template = PromptTemplate(**template_kwargs)
    decoding_kwargs: dict[str, object] = {"template": template}
    for key in _DECODING_KEYS:
        if key in merged:
            decoding_kwargs[key] = merged[key]
    decoding = DecodingConfig(**decoding_kwargs)  # type: ignore[arg-type]

    def as_path(key: str) -> Path | None:
        if key not in merged:
            return None
        p = Path(str(merged[key]))
        if base_dir is not None and not p.is_absolute():
            p = base_dir / p
        return p

    backend = str(merged.get("backend") or os.environ.get(BACKEND_ENV_VAR) or "toy")
    return RunOptions(
        decoding=decoding,
        backend=backend,
        toy_corpus=as_path("toy_corpus"),
        toy_order=int(merged.get("toy_order", 2)),
        toy_alpha=float(merged.get("toy_alpha", 0.1)),
        embed_dim=int(merged.get("embed_dim", 64)),
        embed_seed=int(merged.get("embed_seed", 0)),
        keywords_file=as_path("keywords_file"),
    )


def apply_mode(config: DecodingConfig, mode: str) -> DecodingConfig:
    """Translate an ablation mode into decoding-config changes."""
    if mode == "full":
        return config
    if mode == "no_keywords":
        return replace(config, use_keywords=False)
    if mode == "no_guiding":
        return replace(config, beta=0.0)
    if mode == "no_audio":
        return replace(config, use_keywords=False, beta=0.0)
    raise InvalidConfigError(f"unknown mode {mode!r}; expected one of {MODES}")


class Backend:
    """A language model plus scorer pair with an optional close hook.

    ``factory`` hands out per-worker handles: the toy backend shares its
    thread-safe handles, while protocol backends open one connection per
    worker.
    """

    def __init__(self, lm, scorer, factory: Callable[[], tuple] | None = None,
                 close: Callable[[], None] = lambda: None):
        self.lm = lm
        self.scorer = scorer
        self._factory = factory
        self._close = close
        self._extra_closers: list[Callable[[], None]] = []

    def worker_handles(self) -> tuple:
        if self._factory is None:
            return self.lm, self.scorer
        lm, scorer, closer = self._factory()
        self._extra_closers.append(closer)
        return lm, scorer

    def close(self) -> None:
        for closer in self._extra_closers:
            closer()
        self._close()

    def __enter__(self) -> "Backend":
        return self

    def __exit__(self, *exc) -> None:
        self.close()


def make_backend(options: RunOptions) -> Backend:
    if options.backend == "toy":
        if options.toy_corpus is None:
            raise InvalidConfigError("toy backend requires toy_corpus")
        sentences = [
            line for line in options.toy_corpus.read_text("utf-8").splitlines() if line.strip()
        ]
        lm = toy_lm_from_corpus(sentences, order=options.toy_order, alpha=options.toy_alpha)
        scorer = HashingEmbedder(dim=options.embed_dim, seed=options.embed_seed)
        return Backend(lm, scorer)

    remote = connect(options.backend)
    extras: list = []

    def factory() -> tuple:
        conn = connect(options.backend)
        extras.append(conn)
        return conn.lm, conn.scorer, conn.close

    return Backend(remote.lm, remote.scorer, factory=factory, close=remote.close)


def load_vocabulary(options: RunOptions) -> KeywordVocabulary:
    if options.keywords_file is not None:
        return load_keyword_file(options.keywords_file)
    return load_bundled_keywords()


def _entry_audio(entry: ManifestEntry, manifest_dir: Path, scorer) -> EmbeddingVector:
    if entry.embedding_file is not None:
        path = Path(entry.embedding_file)
        if not path.is_absolute():
            path = manifest_dir / path
        embedding = read_embedding_file(path)
        if embedding.dim != scorer.embedding_dim:
            raise DimensionError(
                f"{entry.id}: embedding dim {embedding.dim} != backend dim {scorer.embedding_dim}"
            )
        return embedding
    assert entry.audio_ref is not None
    return scorer.encode_audio(entry.audio_ref)


@dataclass(frozen=True)
class CaptionRun:
    """Everything produced by one caption run, in manifest order."""

    rows: tuple[dict, ...]
    results: tuple[DecodeResult, ...]
    report: MetricReport | None


def run_caption(
    manifest_path: str | Path,
    options: RunOptions,
    mode: str = "full",
    workers: int = 1,
    record_steps: bool = False,
) -> CaptionRun:
    """Caption every manifest entry; evaluate when references exist.

    Entries are processed possibly in parallel but the output order always
    equals manifest order. In ``no_audio`` mode no per-clip input reaches the
    model, so every caption is identical by construction.
    """
    manifest_path = Path(manifest_path)
    entries = read_manifest(manifest_path)
    if not entries:
        raise ManifestError(f"{manifest_path}: manifest is empty")
    manifest_dir = manifest_path.parent

    config = apply_mode(options.decoding, mode)
    if record_steps:
        config = replace(config, record_steps=True)

    with make_backend(options) as backend:
        vocab = None
        if config.use_keywords:
            vocab = load_vocabulary(options).with_embeddings(backend.scorer)

        def run_one(entry: ManifestEntry, lm, scorer) -> DecodeResult:
            audio = None if mode == "no_audio" else _entry_audio(entry, manifest_dir, scorer)
            return decode(audio, vocab, lm, scorer, config)

        if workers <= 1:
            results = [run_one(e, backend.lm, backend.scorer) for e in entries]
        else:
            handles = [backend.worker_handles() for _ in range(workers)]
            results = [None] * len(entries)  # type: ignore[list-item]
            with ThreadPoolExecutor(max_workers=workers) as pool:
                futures = {
                    pool.submit(run_one, entry, *handles[i % workers]): i
                    for i, entry in enumerate(entries)
                }
                for future, index in futures.items():
                    results[index] = future.result()

    rows = tuple(
        {"id": entry.id, "caption": result.caption, "stop_reason": result.stop_reason.value}
        for entry, result in zip(entries, results)
    )
    report = None
    scored = [(e, r) for e, r in zip(entries, rows) if e.references]
    if len(scored) >= 2:
        corpus = EvalCorpus(
            tuple(EvalItem(e.id, r["caption"], e.references) for e, r in scored)
        )
        report = evaluate_corpus(corpus)
    return CaptionRun(rows=rows, results=tuple(results), report=report)


def corpus_from_files(manifest_path: str | Path, caption_rows: Sequence[dict]) -> EvalCorpus:
    """Join a manifest's references with generated captions by id."""
    entries = {e.id: e for e in read_manifest(manifest_path)}
    items = []
    for row in caption_rows:
        entry = entries.get(row["id"])
        if entry is None:
            raise ManifestError(f"caption id {row['id']!r} not present in manifest")
        if entry.references:
            items.append(EvalItem(entry.id, row["caption"], entry.references))
    if not items:
        raise ManifestError("no caption ids with references to evaluate")
    return EvalCorpus(tuple(items))


def per_item_scores(corpus: EvalCorpus) -> list[dict]:
    """Per-item ROUGE-L and CIDEr rows for delimited output and figures."""
    rouge_scores = rouge_l_items(corpus)
    cider_scores = cider_items(corpus)
    return [
        {
            "id": item.id,
            "rouge_l": rouge,
            "cider": cider_score,
            "candidate_tokens": len(item.candidate.split()),
            "reference_count": len(item.references),
        }
        for item, rouge, cider_score in zip(corpus.items, rouge_scores, cider_scores)
    ]


def mean_audio_caption_similarity(
    manifest_path: str | Path,
    caption_rows: Sequence[dict],
    embedder: HashingEmbedder,
) -> float:
    """Mean cosine between each clip's audio embedding and its caption's
    embedding under the given toy embedder; used to compare run modes."""
    manifest_path = Path(manifest_path)
    entries = {e.id: e for e in read_manifest(manifest_path)}
    sims = []
    for row in caption_rows:
        entry = entries[row["id"]]
        if entry.embedding_file is None:
            raise ManifestError(f"{entry.id}: similarity comparison needs embedding files")
        path = Path(entry.embedding_file)
        if not path.is_absolute():
            path = manifest_path.parent / path
        audio = read_embedding_file(path)
        sims.append(cosine_similarity(audio, embedder.encode_text(row["caption"])))
    return sum(sims) / len(sims)
