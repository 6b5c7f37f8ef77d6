import math

import httpx
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from idc.apiclient import JSONClient, MissingCredentialError, ProviderError, replay_transport
from idc.embedding import (
    APIEmbedder,
    HashingEmbedder,
    build_matrix,
    cosine,
    embed_texts,
    mean_chunk_embedding,
)

FIXTURES = __import__("pathlib").Path(__file__).parent / "fixtures"

finite = st.floats(-100, 100, allow_nan=False, allow_infinity=False)


class TestOfflineProvider:
    def test_deterministic(self, offline):
        a, b = embed_texts(offline, ["abc"]), embed_texts(offline, ["abc"])
        np.testing.assert_array_equal(a, b)

    def test_distinct_inputs(self, offline):
        v = embed_texts(offline, ["abc", "xyz"])
        assert cosine(v[0], v[1]) < 1

    def test_unit_norm(self):
        v = embed_texts(HashingEmbedder(64), ["the cat sat"])[0]
        assert v.shape == (64,)
        assert abs(np.linalg.norm(v) - 1.0) <= 1e-9

    def test_stable_across_instances(self):
        # blake2b, not the per-process salted hash()
        a = HashingEmbedder(32).embed_one("stable hashing")
        b = HashingEmbedder(32).embed_one("stable hashing")
        np.testing.assert_array_equal(a, b)

    def test_lexical_overlap_raises_similarity(self, offline):
        base, near, far = offline.embed(["the river flows north", "the river flows south", "copper engines hum"])
        assert cosine(base, near) > cosine(base, far)

    def test_rejects_empty_text(self, offline):
        with pytest.raises(ValueError):
            embed_texts(offline, [""])


class TestCosine:
    def test_identical(self):
        assert cosine([1, 0], [1, 0]) == 1.0

    def test_orthogonal(self):
        assert cosine([1, 0], [0, 1]) == 0.0

    def test_hand_value(self):
        expected = 32 / (math.sqrt(14) * math.sqrt(77))
        assert cosine([1, 2, 3], [4, 5, 6]) == pytest.approx(expected, abs=1e-12)
        assert expected == pytest.approx(0.974631846, abs=1e-9)

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError):
            cosine([1, 0], [1, 0, 0])

    def test_zero_vector_warns(self):
        with pytest.warns(RuntimeWarning):
            assert cosine([0, 0], [1, 0]) == 0.0

    @given(arrays(np.float64, 8, elements=finite), arrays(np.float64, 8, elements=finite))
    def test_symmetric_and_self(self, a, b):
        if np.linalg.norm(a) < 1e-6 or np.linalg.norm(b) < 1e-6:
            return
        assert cosine(a, b) == pytest.approx(cosine(b, a), abs=1e-12)
        assert cosine(a, a) == pytest.approx(1.0, abs=1e-9)
        assert -1.0 <= cosine(a, b) <= 1.0


class TestMatrix:
    def test_prefix_small(self):
        m = build_matrix([[1], [2], [3]])
        np.testing.assert_array_equal(m.prefix, [[0], [1], [3], [6]])

    def test_single_row(self):
        m = build_matrix([[5, 5]])
        np.testing.assert_array_equal(m.prefix, [[0, 0], [5, 5]])

    def test_random_prefix_invariant(self):
        rows = np.random.default_rng(0).normal(size=(100, 7))
        m = build_matrix(rows)
        for i in range(0, 100, 7):
            for j in range(i, 101, 11):
                direct = rows[i:j].sum(axis=0)
                np.testing.assert_allclose(m.prefix[j] - m.prefix[i], direct, rtol=1e-9, atol=1e-9)

    def test_mismatch(self):
        with pytest.raises(ValueError):
            build_matrix([[1, 2], [3]])
        with pytest.raises(ValueError):
            build_matrix([])

    def test_immutable(self):
        m = build_matrix([[1.0, 2.0]])
        with pytest.raises(ValueError):
            m.rows[0, 0] = 9


class TestMeanChunk:
    def test_pair(self):
        np.testing.assert_array_equal(mean_chunk_embedding(build_matrix([[1], [3]]), 0, 1), [2])

    def test_singletons(self):
        rows = np.random.default_rng(1).normal(size=(6, 4))
        m = build_matrix(rows)
        for k in range(6):
            np.testing.assert_allclose(mean_chunk_embedding(m, k, k), rows[k], atol=1e-12)

    def test_brute_force_mean(self):
        rows = np.random.default_rng(2).normal(size=(20, 5))
        np.testing.assert_allclose(mean_chunk_embedding(build_matrix(rows), 3, 9), rows[3:10].mean(axis=0), atol=1e-9)

    def test_range_error(self):
        with pytest.raises(IndexError):
            mean_chunk_embedding(build_matrix([[1], [2]]), 1, 2)

    @settings(max_examples=60)
    @given(st.integers(1, 50), st.integers(0, 2**32 - 1))
    def test_all_spans_match_naive(self, n, seed):
        rows = np.random.default_rng(seed).normal(size=(n, 3))
        m = build_matrix(rows)
        for i in range(n):
            for j in range(i, n):
                naive = sum(rows[t] for t in range(i, j + 1)) / (j - i + 1)
                np.testing.assert_allclose(mean_chunk_embedding(m, i, j), naive, rtol=1e-9, atol=1e-9)


class TestAPIEmbedder:
    def make(self, transport, **kw):
        client = JSONClient("https://api.test/v1", "k", transport=transport, sleep=lambda s: None)
        return APIEmbedder(model="test-embed", dim=3, client=client, **kw)

    def test_replay_with_retry_and_batching(self):
        emb = self.make(replay_transport(FIXTURES / "embeddings_replay.json"), batch_size=2)
        out = embed_texts(emb, ["alpha beta", "gamma", "delta"])
        np.testing.assert_array_equal(out, [[0.6, 0, 0.8], [0, 1, 0], [1, 0, 0]])

    def test_retry_exhaustion(self):
        calls, waits = [], []
        transport = httpx.MockTransport(lambda r: calls.append(r) or httpx.Response(503, text="down"))
        client = JSONClient("https://api.test/v1", "k", transport=transport, sleep=waits.append, backoff=0.5)
        emb = APIEmbedder(model="m", dim=3, client=client)
        with pytest.raises(ProviderError, match="after 5 retries"):
            emb.embed(["x"])
        assert len(calls) == 6
        assert waits == [0.5, 1.0, 2.0, 4.0, 8.0]

    def test_client_error_not_retried(self):
        calls = []
        transport = httpx.MockTransport(lambda r: calls.append(r) or httpx.Response(401, text="bad key"))
        with pytest.raises(ProviderError, match="401"):
            self.make(transport).embed(["x"])
        assert len(calls) == 1

    def test_sends_bearer_key(self):
        seen = {}

        def handler(request):
            seen["auth"] = request.headers["authorization"]
            return httpx.Response(200, json={"data": [{"index": 0, "embedding": [1, 0, 0]}]})

        self.make(httpx.MockTransport(handler)).embed(["x"])
        assert seen["auth"] == "Bearer k"

    def test_wrong_dimension_rejected(self):
        transport = httpx.MockTransport(lambda r: httpx.Response(200, json={"data": [{"index": 0, "embedding": [1, 0]}]}))
        with pytest.raises(ProviderError):
            embed_texts(self.make(transport), ["x"])

    def test_missing_credential(self, monkeypatch):
        monkeypatch.delenv("IDC_API_KEY", raising=False)
        with pytest.raises(MissingCredentialError, match="missing credential"):
            APIEmbedder()
