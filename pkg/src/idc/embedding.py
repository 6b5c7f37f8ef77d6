"""Embeddings, cosine similarity and prefix-sum chunk means.

Embeddings are plain 1-D ``float64`` numpy arrays; lists of them are usually
stacked into a 2-D array with one row per text.
"""

from __future__ import annotations

import hashlib
import re
import warnings
from dataclasses import dataclass
from functools import lru_cache
from typing import Optional, Protocol, Sequence

import numpy as np

from .apiclient import JSONClient, ProviderError, credentials_from_env

_WORD = re.compile(r"[^\W_]+")


class EmbeddingProvider(Protocol):
    dim: int

    def embed(self, texts: Sequence[str]) -> np.ndarray:
        """Return an array of shape (len(texts), dim)."""
        ...


def embed_texts(provider: EmbeddingProvider, texts: Sequence[str]) -> np.ndarray:
    if not texts:
        return np.zeros((0, provider.dim))
    for t in texts:
        if not t:
            raise ValueError("cannot embed an empty string")
    out = np.asarray(provider.embed(list(texts)), dtype=np.float64)
    if out.shape != (len(texts), provider.dim):
        raise ProviderError(f"provider returned shape {out.shape}, expected {(len(texts), provider.dim)}")
    if not np.all(np.isfinite(out)):
        raise ProviderError("provider returned non-finite embedding values")
    return out


def cosine(a: np.ndarray, b: np.ndarray) -> float:
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ValueError(f"dimension mismatch: {a.shape} vs {b.shape}")
    na, nb = np.linalg.norm(a), np.linalg.norm(b)
    if na == 0.0 or nb == 0.0:
        warnings.warn("cosine of a zero vector; returning 0", RuntimeWarning, stacklevel=2)
        return 0.0
    return float(np.clip(a @ b / (na * nb), -1.0, 1.0))


def normalize_rows(x: np.ndarray) -> np.ndarray:
    """L2-normalize rows; all-zero rows stay zero."""
    norms = np.linalg.norm(x, axis=-1, keepdims=True)
    return np.divide(x, norms, out=np.zeros_like(x, dtype=np.float64), where=norms > 0)


@dataclass(frozen=True)
class EmbeddingMatrix:
    rows: np.ndarray
    prefix: np.ndarray

    def __len__(self) -> int:
        return self.rows.shape[0]

    @property
    def dim(self) -> int:
        return self.rows.shape[1]


def build_matrix(sentence_embeddings) -> EmbeddingMatrix:
    rows = [np.asarray(r, dtype=np.float64) for r in sentence_embeddings]
    if not rows:
        raise ValueError("cannot build an embedding matrix from zero rows")
    dims = {r.shape for r in rows}
    if len(dims) != 1 or rows[0].ndim != 1:
        raise ValueError(f"dimension mismatch among rows: {sorted(dims)}")
    arr = np.vstack(rows)
    prefix = np.zeros((arr.shape[0] + 1, arr.shape[1]), dtype=np.float64)
    np.cumsum(arr, axis=0, out=prefix[1:])
    arr.setflags(write=False)
    prefix.setflags(write=False)
    return EmbeddingMatrix(rows=arr, prefix=prefix)


def mean_chunk_embedding(matrix: EmbeddingMatrix, i: int, j: int) -> np.ndarray:
    """Mean of rows i..j inclusive, in O(d) via the prefix sums."""
    n = len(matrix)
    if not 0 <= i <= j < n:
        raise IndexError(f"span ({i}, {j}) out of range for {n} rows")
    return (matrix.prefix[j + 1] - matrix.prefix[i]) / (j - i + 1)


@lru_cache(maxsize=200_000)
def _bucket(feature: str, dim: int) -> tuple[int, float]:
    h = int.from_bytes(hashlib.blake2b(feature.encode("utf-8"), digest_size=8).digest(), "little")
    return h % dim, (1.0 if (h >> 63) & 1 else -1.0)


class HashingEmbedder:
    """Deterministic offline embedder.

    Word unigrams and within-word character trigrams are hashed into ``dim``
    signed buckets and the count vector is L2-normalized.
    """

    name = "offline"

    def __init__(self, dim: int = 64):
        if dim < 1:
            raise ValueError("dim must be >= 1")
        self.dim = dim

    def features(self, text: str) -> list[str]:
        words = _WORD.findall(text.lower())
        feats = ["w:" + w for w in words]
        for w in words:
            padded = f"#{w}#"
            feats.extend("c:" + padded[k : k + 3] for k in range(len(padded) - 2))
        return feats

    def embed_one(self, text: str) -> np.ndarray:
        vec = np.zeros(self.dim)
        for feat in self.features(text):
            idx, sign = _bucket(feat, self.dim)
            vec[idx] += sign
        norm = np.linalg.norm(vec)
        return vec / norm if norm > 0 else vec

    def embed(self, texts: Sequence[str]) -> np.ndarray:
        return np.vstack([self.embed_one(t) for t in texts]) if texts else np.zeros((0, self.dim))


class APIEmbedder:
    """OpenAI-style ``/embeddings`` endpoint client.

    The key comes from ``IDC_API_KEY``; the endpoint from ``IDC_API_URL``
    unless given explicitly.
    """

    name = "api"

    def __init__(
        self,
        model: str = "text-embedding-3-small",
        dim: int = 1536,
        url: Optional[str] = None,
        batch_size: int = 64,
        client: Optional[JSONClient] = None,
        **client_kwargs,
    ):
        self.model = model
        self.dim = dim
        self.batch_size = batch_size
        if client is None:
            base, key = credentials_from_env(url)
            client = JSONClient(base, key, **client_kwargs)
        self.client = client

    def embed(self, texts: Sequence[str]) -> np.ndarray:
        out = []
        for lo in range(0, len(texts), self.batch_size):
            batch = list(texts[lo : lo + self.batch_size])
            payload = {"model": self.model, "input": batch}
            if self.dim:
                payload["dimensions"] = self.dim
            data = self.client.post("embeddings", payload)
            try:
                items = sorted(data["data"], key=lambda d: d["index"])
                vecs = [item["embedding"] for item in items]
            except (KeyError, TypeError) as exc:
                raise ProviderError(f"malformed embeddings response: {exc}") from None
            if len(vecs) != len(batch):
                raise ProviderError(f"expected {len(batch)} embeddings, got {len(vecs)}")
            out.extend(vecs)
        return np.asarray(out, dtype=np.float64).reshape(len(texts), -1)
