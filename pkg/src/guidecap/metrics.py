"""Corpus-level caption metrics: BLEU-1..4, ROUGE-L, and CIDEr.

Tokenization is deliberately simple (lowercase, strip punctuation except
word-internal apostrophes, whitespace split) and is applied identically to
candidates and references. This keeps the module dependency-free at the cost
of small deviations from toolkit numbers produced with the PTB tokenizer.
"""

from __future__ import annotations

import math
import re
from collections import Counter, defaultdict
from dataclasses import dataclass
from typing import Sequence

from .errors import EmptyCorpusError, InsufficientCorpusError

ROUGE_BETA_SQ = 1.2
CIDER_MAX_N = 4
CIDER_SIGMA = 6.0

_TOKEN_RE = re.compile(r"\w+(?:'\w+)*")


def tokenize_caption(text: str) -> list[str]:
    """Lowercased word tokens; punctuation is dropped except apostrophes
    joining word characters ("don't" stays one token)."""
    return _TOKEN_RE.findall(text.lower())


@dataclass(frozen=True)
class EvalItem:
    id: str
    candidate: str
    references: tuple[str, ...]

    def __post_init__(self) -> None:
        if not self.references:
            raise ValueError(f"item {self.id!r} has no references")


@dataclass(frozen=True)
class EvalCorpus:
    items: tuple[EvalItem, ...]

    def __post_init__(self) -> None:
        ids = [item.id for item in self.items]
        if len(set(ids)) != len(ids):
            raise ValueError("corpus ids must be unique")

    def __len__(self) -> int:
        return len(self.items)

    @classmethod
    def from_items(cls, triples: Sequence[tuple[str, str, Sequence[str]]]) -> "EvalCorpus":
        return cls(tuple(EvalItem(i, c, tuple(r)) for i, c, r in triples))


@dataclass(frozen=True)
class MetricReport:
    bleu_1: float
    bleu_2: float
    bleu_3: float
    bleu_4: float
    rouge_l: float
    cider: float

    def __post_init__(self) -> None:
        for name in ("bleu_1", "bleu_2", "bleu_3", "bleu_4", "rouge_l"):
            value = getattr(self, name)
            if not (math.isfinite(value) and 0.0 <= value <= 1.0):
                raise ValueError(f"{name} out of range: {value}")
        if not (math.isfinite(self.cider) and 0.0 <= self.cider <= 10.0):
            raise ValueError(f"cider out of range: {self.cider}")

    def to_dict(self) -> dict[str, float]:
        return {
            "bleu_1": self.bleu_1,
            "bleu_2": self.bleu_2,
            "bleu_3": self.bleu_3,
            "bleu_4": self.bleu_4,
            "rouge_l": self.rouge_l,
            "cider": self.cider,
        }


def _ngrams(tokens: Sequence[str], n: int) -> Counter:
    return Counter(tuple(tokens[i : i + n]) for i in range(len(tokens) - n + 1))


def bleu(corpus: EvalCorpus, max_n: int = 4) -> list[float]:
    """Corpus BLEU-1..max_n with modified precision and brevity penalty.

    The brevity penalty uses the reference length closest to the candidate
    length (ties go to the shorter reference). If the modified precision of
    any order k <= n is zero, BLEU-n is zero.
    """
    if not 1 <= max_n <= 4:
        raise ValueError(f"max_n must be in [1, 4], got {max_n}")
    if len(corpus) == 0:
        raise EmptyCorpusError("BLEU needs a non-empty corpus")

    clipped = [0] * max_n
    totals = [0] * max_n
    candidate_length = 0
    effective_ref_length = 0
    for item in corpus.items:
        cand = tokenize_caption(item.candidate)
        refs = [tokenize_caption(r) for r in item.references]
        candidate_length += len(cand)
        effective_ref_length += min(
            (len(r) for r in refs), key=lambda rl: (abs(rl - len(cand)), rl)
        )
        for n in range(1, max_n + 1):
            cand_counts = _ngrams(cand, n)
            if not cand_counts:
                continue
            max_ref_counts: Counter = Counter()
            for ref in refs:
                for gram, count in _ngrams(ref, n).items():
                    if count > max_ref_counts[gram]:
                        max_ref_counts[gram] = count
            clipped[n - 1] += sum(
                min(count, max_ref_counts[gram]) for gram, count in cand_counts.items()
            )
            totals[n - 1] += sum(cand_counts.values())

    precisions = [
        (clipped[i] / totals[i]) if totals[i] > 0 else 0.0 for i in range(max_n)
    ]
    if candidate_length == 0:
        brevity = 0.0
    elif candidate_length > effective_ref_length:
        brevity = 1.0
    else:
        brevity = math.exp(1.0 - effective_ref_length / candidate_length)

    scores = []
    for n in range(1, max_n + 1):
        if any(p == 0.0 for p in precisions[:n]):
            scores.append(0.0)
        else:
            log_mean = sum(math.log(p) for p in precisions[:n]) / n
            scores.append(brevity * math.exp(log_mean))
    return scores


def _lcs_length(a: Sequence[str], b: Sequence[str]) -> int:
    if not a or not b:
        return 0
    prev = [0] * (len(b) + 1)
    for x in a:
        curr = [0]
        for j, y in enumerate(b, start=1):
            curr.append(prev[j - 1] + 1 if x == y else max(prev[j], curr[j - 1]))
        prev = curr
    return prev[-1]


def rouge_l_items(corpus: EvalCorpus) -> list[float]:
    """Per-item ROUGE-L: the max over references of the LCS F-measure."""
    if len(corpus) == 0:
        raise EmptyCorpusError("ROUGE-L needs a non-empty corpus")
    scores = []
    for item in corpus.items:
        cand = tokenize_caption(item.candidate)
        best = 0.0
        for reference in item.references:
            ref = tokenize_caption(reference)
            lcs = _lcs_length(cand, ref)
            if lcs == 0:
                continue
            precision = lcs / len(cand)
            recall = lcs / len(ref)
            f = (1 + ROUGE_BETA_SQ) * precision * recall / (recall + ROUGE_BETA_SQ * precision)
            best = max(best, f)
        scores.append(best)
    return scores


def rouge_l(corpus: EvalCorpus) -> float:
    scores = rouge_l_items(corpus)
    return sum(scores) / len(scores)


def _cider_vector(
    counts: Counter, doc_freq: Counter, log_num_items: float
) -> tuple[list[dict], list[float], int]:
    """TF-IDF vectors per n-gram order, their norms, and the token length."""
    vectors: list[dict] = [defaultdict(float) for _ in range(CIDER_MAX_N)]
    norms = [0.0] * CIDER_MAX_N
    length = 0
    for gram, term_freq in counts.items():
        n = len(gram) - 1
        idf = log_num_items - math.log(max(1.0, doc_freq[gram]))
        weight = float(term_freq) * idf
        vectors[n][gram] = weight
        norms[n] += weight * weight
        if n == 0:
            length += term_freq
    return vectors, [math.sqrt(x) for x in norms], length


def _all_ngram_counts(tokens: Sequence[str]) -> Counter:
    counts: Counter = Counter()
    for n in range(1, CIDER_MAX_N + 1):
        counts.update(_ngrams(tokens, n))
    return counts


def cider_items(corpus: EvalCorpus) -> list[float]:
    """Per-item CIDEr-D on 1..4-grams.

    TF-IDF weights use document frequencies counted over the reference sets
    of the corpus; per order, the candidate/reference similarity is a clipped
    cosine with a Gaussian penalty (sigma = 6) on the token-length gap.
    Scores are averaged over orders and references and scaled by 10.
    """
    if len(corpus) < 2:
        raise InsufficientCorpusError("CIDEr needs at least two items for document frequencies")

    ref_counts: list[list[Counter]] = [
        [_all_ngram_counts(tokenize_caption(r)) for r in item.references]
        for item in corpus.items
    ]
    doc_freq: Counter = Counter()
    for refs in ref_counts:
        unique: set = set()
        for counts in refs:
            unique.update(counts.keys())
        for gram in unique:
            doc_freq[gram] += 1
    log_num_items = math.log(float(len(corpus)))

    scores = []
    for item, refs in zip(corpus.items, ref_counts):
        cand_counts = _all_ngram_counts(tokenize_caption(item.candidate))
        cand_vec, cand_norm, cand_len = _cider_vector(cand_counts, doc_freq, log_num_items)
        per_order_sum = [0.0] * CIDER_MAX_N
        for ref in refs:
            ref_vec, ref_norm, ref_len = _cider_vector(ref, doc_freq, log_num_items)
            penalty = math.exp(-((cand_len - ref_len) ** 2) / (2.0 * CIDER_SIGMA**2))
            for n in range(CIDER_MAX_N):
                dot = 0.0
                for gram, weight in cand_vec[n].items():
                    dot += min(weight, ref_vec[n][gram]) * ref_vec[n][gram]
                if cand_norm[n] != 0.0 and ref_norm[n] != 0.0:
                    # clipped cosine is mathematically <= 1; clamp fp overshoot
                    dot = min(1.0, dot / (cand_norm[n] * ref_norm[n]))
                per_order_sum[n] += dot * penalty
        mean_over_orders = sum(per_order_sum) / CIDER_MAX_N
        scores.append(10.0 * mean_over_orders / len(refs))
    return scores


def cider(corpus: EvalCorpus) -> float:
    scores = cider_items(corpus)
    return sum(scores) / len(scores)


def evaluate_corpus(corpus: EvalCorpus) -> MetricReport:
    """All metrics in one report; the corpus needs >= 2 items (for CIDEr)."""
    bleu_scores = bleu(corpus, max_n=4)
    return MetricReport(
        bleu_1=bleu_scores[0],
        bleu_2=bleu_scores[1],
        bleu_3=bleu_scores[2],
        bleu_4=bleu_scores[3],
        rouge_l=rouge_l(corpus),
        cider=cider(corpus),
    )
