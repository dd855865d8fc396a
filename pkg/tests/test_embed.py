import math
import random

import numpy as np
import pytest
from hypothesis import given, strategies as st

from geoseek.embed import (
    NgramEmbedder,
    RemoteEmbedder,
    cosine_similarity,
    ngram_embed,
)

SQRT2_OVER_2 = 0.7071067811865476  # verified against tests/oracles.py arithmetic


class TestCosineSimilarity:
    def test_self_similarity(self):
        v = np.array([1.0, 2.0, 3.0])
        assert cosine_similarity(v, v) == 1.0

    def test_orthogonal(self):
        assert cosine_similarity(np.array([1.0, 0.0]), np.array([0.0, 1.0])) == 0.0

    def test_half_overlap(self):
        s = cosine_similarity(np.array([1.0, 1.0]), np.array([1.0, 0.0]))
        assert s == pytest.approx(SQRT2_OVER_2, rel=1e-12)

    def test_zero_vector_is_zero(self):
        assert cosine_similarity(np.zeros(4), np.array([1.0, 2.0, 3.0, 4.0])) == 0.0

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError):
            cosine_similarity(np.ones(4), np.ones(5))

    @given(
        st.lists(st.floats(min_value=-100, max_value=100), min_size=2, max_size=16).filter(
            lambda xs: any(abs(x) > 1e-6 for x in xs)
        )
    )
    def test_self_similarity_property(self, values):
        v = np.array(values)
        assert cosine_similarity(v, v) == pytest.approx(1.0, abs=1e-12)

    def test_clamped_range(self):
        a = np.array([1e-200, 1.0])
        b = np.array([1e-200, -1.0])
        assert -1.0 <= cosine_similarity(a, b) <= 1.0


class TestNgramEmbed:
    def test_deterministic(self):
        a = ngram_embed("Paris", 64)
        b = ngram_embed("Paris", 64)
        assert np.array_equal(a, b)
        assert cosine_similarity(a, b) == 1.0

    def test_empty_is_zero_vector(self):
        v = ngram_embed("", 64)
        assert not v.any()
        assert cosine_similarity(v, ngram_embed("Paris", 64)) == 0.0

    def test_whitespace_only_is_zero_vector(self):
        assert not ngram_embed("   ", 64).any()

    def test_unit_norm(self):
        for text in ("Paris", "a", "Hefei City", "Ulaanbaatar", "日本"):
            v = ngram_embed(text, 128)
            assert abs(np.linalg.norm(v) - 1.0) < 1e-9

    def test_case_and_nfc_insensitive(self):
        assert np.array_equal(ngram_embed("PARIS", 64), ngram_embed("paris", 64))
        composed, decomposed = "café", "café"
        assert np.array_equal(ngram_embed(composed, 64), ngram_embed(decomposed, 64))

    def test_rejects_small_dimension(self):
        with pytest.raises(ValueError):
            ngram_embed("Paris", 7)

    def test_shared_substring_ordering(self):
        base = ngram_embed("Hefei", 256)
        close = cosine_similarity(base, ngram_embed("Hefei City", 256))
        far = cosine_similarity(base, ngram_embed("Reykjavik", 256))
        assert close > far

    def test_shared_substring_ordering_fuzz_corpus(self):
        # 100 seeded (base, variant, unrelated) triples: the variant keeps
        # the base as a substring and must always score closer.
        rng = random.Random(20240811)
        syllables = ["an", "be", "ci", "do", "el", "fu", "ga", "ho", "is", "ju",
                     "ka", "lo", "me", "nu", "or", "pa", "qi", "ro", "su", "ti"]
        suffixes = [" City", " Province", " District", " Region", "shire", " Nord"]
        for _ in range(100):
            base = "".join(rng.sample(syllables, 3)).capitalize()
            unrelated = "".join(rng.sample(syllables, 3)).capitalize()
            while unrelated == base:
                unrelated = "".join(rng.sample(syllables, 3)).capitalize()
            variant = base + rng.choice(suffixes)
            b = ngram_embed(base, 256)
            close = cosine_similarity(b, ngram_embed(variant, 256))
            far = cosine_similarity(b, ngram_embed(unrelated, 256))
            assert close > far, (base, variant, unrelated, close, far)


class TestNgramEmbedder:
    def test_provider_surface(self):
        p = NgramEmbedder(dimension=64)
        assert p.dimension == 64
        assert p.provider_id() == "ngram-v1-d64"

    def test_cache_returns_identical_vector(self):
        p = NgramEmbedder(dimension=64)
        assert p.embed("Oslo") is p.embed("Oslo")

    def test_cached_vector_readonly(self):
        v = NgramEmbedder(dimension=64).embed("Oslo")
        with pytest.raises(ValueError):
            v[0] = 9.0

    def test_rejects_small_dimension(self):
        with pytest.raises(ValueError):
            NgramEmbedder(dimension=4)


class _StubResponse:
    def __init__(self, payload, status=200):
        self._payload = payload
        self.status_code = status

    def raise_for_status(self):
        if self.status_code != 200:
            raise RuntimeError(f"HTTP {self.status_code}")

    def json(self):
        return self._payload


class _StubSession:
    def __init__(self, vectors):
        self.vectors = vectors
        self.calls = []

    def post(self, url, json=None, headers=None):
        self.calls.append((url, json, headers))
        text = json["texts"][0]
        return _StubResponse({"vectors": [self.vectors[text]]})


class TestRemoteEmbedder:
    def test_requires_endpoint(self, monkeypatch):
        monkeypatch.delenv("GEOSEEK_EMBED_URL", raising=False)
        with pytest.raises(ValueError):
            RemoteEmbedder()

    def test_posts_and_pins_dimension(self):
        session = _StubSession({"Oslo": [1.0, 0.0, 0.0], "Bergen": [0.0, 1.0, 0.0]})
        p = RemoteEmbedder(url="http://embed.test", token="tok", session=session)
        v = p.embed("Oslo")
        assert v.shape == (3,)
        assert p.dimension == 3
        assert session.calls[0][2]["Authorization"] == "Bearer tok"
        p.embed("Bergen")

    def test_rejects_dimension_drift(self):
        session = _StubSession({"a": [1.0, 0.0], "b": [1.0, 0.0, 0.0]})
        p = RemoteEmbedder(url="http://embed.test", session=session)
        p.embed("a")
        with pytest.raises(ValueError):
            p.embed("b")

    def test_rejects_non_finite(self):
        session = _StubSession({"a": [1.0, math.inf]})
        p = RemoteEmbedder(url="http://embed.test", session=session)
        with pytest.raises(ValueError):
            p.embed("a")
