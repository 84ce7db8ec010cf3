"""Embedding container, cosine similarity, and relevancy softmax."""

import math

import numpy as np
import pytest

from guidecap import (
    DegenerateVectorError,
    DimensionError,
    EmbeddingVector,
    EmptyCandidatesError,
    HashingEmbedder,
    InvalidConfigError,
    ScorerError,
    cosine_similarity,
    relevancy_scores,
    stable_softmax,
)
from oracles import softmax_oracle


def vec(*values):
    return EmbeddingVector(np.array(values, dtype=np.float64))


class FixedSimScorer:
    """Scorer whose text embeddings are unit-circle points chosen per text,
    so cosine similarities against audio [1, 0] are the configured values."""

    def __init__(self, sims_by_text):
        self._sims = dict(sims_by_text)

    @property
    def embedding_dim(self):
        return 2

    def encode_text_batch(self, texts):
        out = []
        for t in texts:
            c = self._sims[t]
            out.append(vec(c, math.sqrt(max(0.0, 1.0 - c * c))))
        return out

    def encode_audio(self, ref):
        return vec(1.0, 0.0)


class BrokenScorer:
    @property
    def embedding_dim(self):
        return 2

    def encode_text_batch(self, texts):
        raise ScorerError("encoder backend is down")

    def encode_audio(self, ref):
        raise ScorerError("encoder backend is down")


class TestEmbeddingVector:
    def test_dim_matches_length(self):
        assert vec(1.0, 2.0, 3.0).dim == 3

    def test_rejects_nan(self):
        with pytest.raises(DegenerateVectorError):
            vec(1.0, float("nan"))

    def test_rejects_empty_and_2d(self):
        with pytest.raises(DimensionError):
            EmbeddingVector(np.zeros((2, 2)))
        with pytest.raises(DimensionError):
            EmbeddingVector(np.zeros(0))

    def test_widens_float32_input(self):
        e = EmbeddingVector(np.array([0.1, 0.2], dtype=np.float32))
        assert e.values.dtype == np.float64

    def test_values_read_only(self):
        e = vec(1.0, 2.0)
        with pytest.raises(ValueError):
            e.values[0] = 5.0


class TestCosineSimilarity:
    def test_self_similarity_is_exactly_one(self):
        rng = np.random.default_rng(3)
        for _ in range(50):
            v = EmbeddingVector(rng.normal(size=int(rng.integers(1, 40))))
            assert cosine_similarity(v, v) == 1.0

    def test_orthogonal_is_zero(self):
        assert cosine_similarity(vec(1.0, 0.0), vec(0.0, 1.0)) == 0.0

    def test_hand_computed_value(self):
        sim = cosine_similarity(vec(1.0, 2.0, 3.0), vec(4.0, 5.0, 6.0))
        assert sim == pytest.approx(0.974631846, abs=1e-9)

    def test_symmetric(self):
        rng = np.random.default_rng(4)
        for _ in range(50):
            a = EmbeddingVector(rng.normal(size=8))
            b = EmbeddingVector(rng.normal(size=8))
            assert cosine_similarity(a, b) == cosine_similarity(b, a)

    def test_range(self):
        rng = np.random.default_rng(5)
        for _ in range(200):
            a = EmbeddingVector(rng.normal(size=4))
            b = EmbeddingVector(rng.normal(size=4))
            assert -1.0 <= cosine_similarity(a, b) <= 1.0

    def test_dimension_mismatch(self):
        with pytest.raises(DimensionError):
            cosine_similarity(vec(1.0, 2.0), vec(1.0, 2.0, 3.0))

    def test_zero_norm_is_error(self):
        with pytest.raises(DegenerateVectorError):
            cosine_similarity(vec(0.0, 0.0), vec(1.0, 0.0))

    def test_scale_invariance(self):
        rng = np.random.default_rng(6)
        for _ in range(100):
            a = EmbeddingVector(rng.normal(size=6))
            b = EmbeddingVector(rng.normal(size=6))
            scale = float(rng.uniform(1e-3, 1e3))
            assert cosine_similarity(a.scaled(scale), b) == pytest.approx(
                cosine_similarity(a, b), abs=1e-9
            )


class TestRelevancyScores:
    def audio(self):
        return vec(1.0, 0.0)

    def test_kappa_zero_exactly_uniform(self):
        scorer = FixedSimScorer({"x": 0.9, "y": 0.1, "z": -0.5})
        scores = relevancy_scores(self.audio(), ["x", "y", "z"], scorer, kappa=0.0)
        assert list(scores) == [1.0 / 3.0] * 3

    def test_equal_similarities_give_half(self):
        scorer = FixedSimScorer({"x": 0.42, "y": 0.42})
        for kappa in (0.5, 1.0, 7.0):
            scores = relevancy_scores(self.audio(), ["x", "y"], scorer, kappa=kappa)
            assert list(scores) == [0.5, 0.5]

    def test_hand_computed_two_candidates(self):
        scorer = FixedSimScorer({"x": 0.8, "y": 0.2})
        scores = relevancy_scores(self.audio(), ["x", "y"], scorer, kappa=1.0)
        assert scores[0] == pytest.approx(0.645656, abs=1e-5)
        assert scores[1] == pytest.approx(0.354344, abs=1e-5)

    def test_matches_scalar_oracle(self, rng):
        for _ in range(100):
            sims = rng.uniform(-1, 1, size=int(rng.integers(2, 10)))
            kappa = float(rng.uniform(0, 5))
            texts = [f"t{i}" for i in range(sims.size)]
            scorer = FixedSimScorer(dict(zip(texts, sims)))
            got = relevancy_scores(self.audio(), texts, scorer, kappa=kappa)
            expected = softmax_oracle(
                [cosine_similarity(self.audio(), e) for e in scorer.encode_text_batch(texts)],
                kappa,
            )
            np.testing.assert_allclose(got, expected, atol=1e-12)

    def test_sums_to_one(self, rng):
        for _ in range(100):
            n = int(rng.integers(1, 12))
            sims = rng.uniform(-1, 1, size=n)
            texts = [f"t{i}" for i in range(n)]
            scorer = FixedSimScorer(dict(zip(texts, sims)))
            scores = relevancy_scores(self.audio(), texts, scorer, float(rng.uniform(0, 10)))
            assert abs(scores.sum() - 1.0) < 1e-9
            assert np.all(scores > 0.0) and np.all(scores < 1.0 + 1e-12)

    def test_monotone_in_similarity(self, rng):
        for _ in range(50):
            sims = sorted(rng.uniform(-1, 1, size=5))
            texts = [f"t{i}" for i in range(5)]
            scorer = FixedSimScorer(dict(zip(texts, sims)))
            scores = relevancy_scores(self.audio(), texts, scorer, kappa=float(rng.uniform(0.1, 4)))
            assert all(a < b for a, b in zip(scores, scores[1:]))

    def test_large_kappa_stays_finite(self):
        scorer = FixedSimScorer({"x": 1.0, "y": -1.0})
        scores = relevancy_scores(self.audio(), ["x", "y"], scorer, kappa=1e4)
        assert np.all(np.isfinite(scores))
        assert abs(scores.sum() - 1.0) < 1e-9

    def test_empty_candidates(self):
        with pytest.raises(EmptyCandidatesError):
            relevancy_scores(self.audio(), [], FixedSimScorer({}), 1.0)

    def test_non_finite_kappa(self):
        with pytest.raises(InvalidConfigError):
            relevancy_scores(self.audio(), ["x"], FixedSimScorer({"x": 0.5}), float("inf"))

    def test_scorer_error_propagates(self):
        with pytest.raises(ScorerError):
            relevancy_scores(self.audio(), ["x"], BrokenScorer(), 1.0)

    def test_scale_invariance_of_scores(self, rng):
        embedder = HashingEmbedder(dim=32, seed=9)
        audio = embedder.encode_audio("dog barking")
        texts = ["a dog", "a cat", "rain falls"]
        base = relevancy_scores(audio, texts, embedder, kappa=1.5)
        scaled = relevancy_scores(audio.scaled(37.5), texts, embedder, kappa=1.5)
        np.testing.assert_allclose(base, scaled, atol=1e-9)


class TestStableSoftmax:
    def test_no_overflow_at_huge_scores(self):
        out = stable_softmax([1e4, 0.0, -1e4])
        assert np.all(np.isfinite(out))
        assert abs(out.sum() - 1.0) < 1e-9

    def test_empty_rejected(self):
        with pytest.raises(EmptyCandidatesError):
            stable_softmax([])
