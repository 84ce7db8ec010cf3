"""Caption metrics against hand computations and independent oracles."""

import math

import numpy as np
import pytest

from guidecap import (
    EmptyCorpusError,
    EvalCorpus,
    InsufficientCorpusError,
    bleu,
    cider,
    evaluate_corpus,
    rouge_l,
    tokenize_caption,
)
from guidecap.metrics import cider_items, rouge_l_items
from oracles import bleu_oracle, cider_d_oracle, rouge_l_oracle

WORDS = ["dog", "cat", "rain", "wind", "car", "bell", "bird", "water", "door", "horn"]


def corpus_of(*triples):
    return EvalCorpus.from_items(list(triples))


def random_corpus(rng, min_items=2):
    items = []
    for i in range(int(rng.integers(min_items, 9))):
        candidate = " ".join(rng.choice(WORDS, size=int(rng.integers(1, 8))))
        references = [
            " ".join(rng.choice(WORDS, size=int(rng.integers(1, 9))))
            for _ in range(int(rng.integers(1, 4)))
        ]
        items.append((f"item{i}", candidate, references))
    return corpus_of(*items)


def tokenized_pairs(corpus):
    return [
        (tokenize_caption(item.candidate), [tokenize_caption(r) for r in item.references])
        for item in corpus.items
    ]


class TestTokenizer:
    def test_lowercase_and_punctuation(self):
        assert tokenize_caption("A Dog barks.") == ["a", "dog", "barks"]

    def test_word_internal_apostrophe_kept(self):
        assert tokenize_caption("don't stop, it's fine!") == ["don't", "stop", "it's", "fine"]

    def test_applied_identically_to_both_sides(self):
        noisy = corpus_of(("a", "The DOG barks!", ["the dog barks."]),
                          ("b", "rain falls", ["rain falls"]))
        clean = corpus_of(("a", "the dog barks", ["the dog barks"]),
                          ("b", "rain falls", ["rain falls"]))
        assert bleu(noisy) == bleu(clean)
        assert rouge_l(noisy) == rouge_l(clean)
        assert cider(noisy) == cider(clean)


class TestBleu:
    def test_identity_corpus_scores_one(self):
        corpus = corpus_of(
            ("a", "a dog barks loudly", ["a dog barks loudly"]),
            ("b", "rain falls on the roof", ["rain falls on the roof"]),
        )
        assert bleu(corpus) == [1.0, 1.0, 1.0, 1.0]

    def test_hand_computed_brevity_penalty(self):
        corpus = corpus_of(("a", "the cat", ["the cat sat"]))
        scores = bleu(corpus)
        assert scores[0] == pytest.approx(math.exp(1.0 - 3.0 / 2.0), abs=1e-4)
        assert scores[0] == pytest.approx(0.6065, abs=1e-4)

    def test_disjoint_unigrams_scores_zero(self):
        corpus = corpus_of(("a", "piano chord", ["dog bark", "loud dog"]))
        assert bleu(corpus)[0] == 0.0

    def test_matches_oracle_on_random_corpora(self, rng):
        for _ in range(20):
            corpus = random_corpus(rng)
            np.testing.assert_allclose(
                bleu(corpus), bleu_oracle(tokenized_pairs(corpus)), atol=1e-6
            )

    def test_bleu4_not_above_bleu1(self, rng):
        for _ in range(30):
            scores = bleu(random_corpus(rng))
            assert scores[3] <= scores[0] + 1e-12

    def test_item_order_invariance(self, rng):
        corpus = random_corpus(rng, min_items=4)
        shuffled = EvalCorpus(tuple(reversed(corpus.items)))
        assert bleu(corpus) == bleu(shuffled)

    def test_empty_corpus_rejected(self):
        with pytest.raises(EmptyCorpusError):
            bleu(EvalCorpus(()))


class TestRougeL:
    def test_identity_scores_one(self):
        corpus = corpus_of(("a", "a dog barks", ["a dog barks"]))
        assert rouge_l(corpus) == 1.0

    def test_hand_computed_lcs_fixture(self):
        corpus = corpus_of(("a", "a b c", ["a x c"]))
        assert rouge_l(corpus) == pytest.approx(0.6667, abs=1e-4)

    def test_disjoint_tokens_scores_zero(self):
        corpus = corpus_of(("a", "piano chord", ["dog bark"]))
        assert rouge_l(corpus) == 0.0

    def test_max_over_references(self):
        corpus = corpus_of(("a", "a b c", ["x y z", "a b c"]))
        assert rouge_l(corpus) == 1.0

    def test_matches_oracle_on_random_corpora(self, rng):
        for _ in range(20):
            corpus = random_corpus(rng)
            assert rouge_l(corpus) == pytest.approx(
                rouge_l_oracle(tokenized_pairs(corpus)), abs=1e-6
            )

    def test_item_order_invariance(self, rng):
        corpus = random_corpus(rng, min_items=4)
        shuffled = EvalCorpus(tuple(reversed(corpus.items)))
        assert rouge_l(corpus) == rouge_l(shuffled)


class TestCider:
    def test_identity_distinct_items_match_oracle(self):
        corpus = corpus_of(
            ("a", "a dog barks loudly", ["a dog barks loudly"]),
            ("b", "rain falls softly", ["rain falls softly"]),
            ("c", "a car horn honks", ["a car horn honks"]),
        )
        expected = cider_d_oracle(tokenized_pairs(corpus))
        np.testing.assert_allclose(cider_items(corpus), expected, atol=1e-6)
        assert cider(corpus) == pytest.approx(sum(expected) / len(expected), abs=1e-6)

    def test_no_overlap_contributes_zero(self):
        corpus = corpus_of(
            ("a", "piano chord", ["dog bark"]),
            ("b", "rain falls", ["rain falls"]),
        )
        assert cider_items(corpus)[0] == 0.0

    def test_duplicated_references_leave_average_unchanged(self, rng):
        for _ in range(10):
            corpus = random_corpus(rng)
            doubled = EvalCorpus(
                tuple(
                    type(item)(item.id, item.candidate, item.references * 2)
                    for item in corpus.items
                )
            )
            np.testing.assert_allclose(cider_items(corpus), cider_items(doubled), atol=1e-12)

    def test_matches_oracle_on_random_corpora(self, rng):
        for _ in range(20):
            corpus = random_corpus(rng)
            np.testing.assert_allclose(
                cider_items(corpus), cider_d_oracle(tokenized_pairs(corpus)), atol=1e-6
            )

    def test_item_order_invariance(self, rng):
        corpus = random_corpus(rng, min_items=4)
        shuffled = EvalCorpus(tuple(reversed(corpus.items)))
        assert sorted(cider_items(corpus)) == pytest.approx(sorted(cider_items(shuffled)))
        assert cider(corpus) == pytest.approx(cider(shuffled), abs=1e-12)

    def test_single_item_rejected(self):
        with pytest.raises(InsufficientCorpusError):
            cider(corpus_of(("a", "x", ["x"])))


class TestEvaluateCorpus:
    def test_report_fields_and_ranges(self, rng):
        report = evaluate_corpus(random_corpus(rng, min_items=3))
        data = report.to_dict()
        assert set(data) == {"bleu_1", "bleu_2", "bleu_3", "bleu_4", "rouge_l", "cider"}
        for key, value in data.items():
            assert math.isfinite(value)
            assert value >= 0.0
        assert data["cider"] <= 10.0

    def test_identity_corpus(self):
        corpus = corpus_of(
            ("a", "a dog barks", ["a dog barks"]),
            ("b", "rain falls hard", ["rain falls hard"]),
        )
        report = evaluate_corpus(corpus)
        assert report.bleu_1 == 1.0
        assert report.rouge_l == 1.0

    def test_duplicate_ids_rejected(self):
        with pytest.raises(ValueError):
            corpus_of(("a", "x", ["x"]), ("a", "y", ["y"]))

    def test_empty_references_rejected(self):
        with pytest.raises(ValueError):
            corpus_of(("a", "x", []))

    def test_per_item_helpers_align(self, rng):
        corpus = random_corpus(rng, min_items=3)
        assert len(rouge_l_items(corpus)) == len(corpus)
        assert len(cider_items(corpus)) == len(corpus)
