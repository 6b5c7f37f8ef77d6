"""Exact hybrid retrieval over chunks: dense cosine fused with Okapi BM25."""

from __future__ import annotations

import json
import math
import re
from collections import Counter
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Optional, Sequence

import numpy as np

from .docmodel import Chunk
from .embedding import EmbeddingProvider, embed_texts, normalize_rows

INDEX_FORMAT = "idc-index"
INDEX_VERSION = 1

_TOKEN = re.compile(r"[^\W_]+")


class IndexFormatError(ValueError):
    pass


def tokenize(text: str) -> List[str]:
    return _TOKEN.findall(text.lower())


@dataclass
class Index:
    chunks: List[Chunk]
    dense: np.ndarray
    doc_freq: Dict[str, int]
    term_freqs: List[Counter]
    lengths: List[int]
    avg_len: float
    embedder: Optional[dict] = None

    def __len__(self) -> int:
        return len(self.chunks)

    def to_dict(self) -> dict:
        return {
            "format": INDEX_FORMAT,
            "version": INDEX_VERSION,
            "embedder": self.embedder,
            "chunks": [dict(c.to_dict(), doc_id=c.doc_id) for c in self.chunks],
            "dense": self.dense.tolist(),
            "doc_freq": dict(sorted(self.doc_freq.items())),
            "term_freqs": [dict(sorted(tf.items())) for tf in self.term_freqs],
            "lengths": self.lengths,
            "avg_len": self.avg_len,
        }

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_dict()), encoding="utf-8")

    @classmethod
    def load(cls, path: str | Path) -> "Index":
        data = json.loads(Path(path).read_text(encoding="utf-8"))
        if not isinstance(data, dict) or data.get("format") != INDEX_FORMAT:
            raise IndexFormatError(f"{path} is not an {INDEX_FORMAT} file")
        if data.get("version") != INDEX_VERSION:
            raise IndexFormatError(
                f"{path} has index format version {data.get('version')}, this build reads version {INDEX_VERSION}"
            )
        chunks = [Chunk.from_dict(c["doc_id"], c) for c in data["chunks"]]
        return cls(
            chunks=chunks,
            dense=np.asarray(data["dense"], dtype=np.float64).reshape(len(chunks), -1),
            doc_freq=dict(data["doc_freq"]),
            term_freqs=[Counter(tf) for tf in data["term_freqs"]],
            lengths=list(data["lengths"]),
            avg_len=float(data["avg_len"]),
            embedder=data.get("embedder"),
        )


@dataclass(frozen=True)
class SearchResult:
    chunk_index: int
    score: float
    dense_score: float
    sparse_score: float
    rank: int

    def to_dict(self) -> dict:
        return {
            "rank": self.rank,
            "chunk_index": self.chunk_index,
            "score": self.score,
            "dense_score": self.dense_score,
            "sparse_score": self.sparse_score,
        }


def build_index(chunks: Sequence[Chunk], embedder: EmbeddingProvider) -> Index:
    if not chunks:
        raise ValueError("cannot index zero chunks")
    term_freqs = [Counter(tokenize(c.text)) for c in chunks]
    lengths = [sum(tf.values()) for tf in term_freqs]
    doc_freq: Counter = Counter()
    for tf in term_freqs:
        doc_freq.update(tf.keys())
    dense = embed_texts(embedder, [c.text for c in chunks])
    info = {"name": getattr(embedder, "name", type(embedder).__name__), "dim": embedder.dim}
    return Index(list(chunks), dense, dict(doc_freq), term_freqs, lengths, sum(lengths) / len(lengths), info)


def idf(index: Index, term: str) -> float:
    df = index.doc_freq.get(term, 0)
    return math.log((len(index) - df + 0.5) / (df + 0.5) + 1.0)


def bm25_score(index: Index, query_terms: Sequence[str], chunk_index: int, k1: float = 1.2, b: float = 0.75) -> float:
    tf_map = index.term_freqs[chunk_index]
    norm = 1.0 - b + b * index.lengths[chunk_index] / index.avg_len if index.avg_len > 0 else 1.0
    score = 0.0
    for term in query_terms:
        tf = tf_map.get(term, 0)
        if tf:
            score += idf(index, term) * tf * (k1 + 1) / (tf + k1 * norm)
    return score


def bm25_scores(index: Index, query_terms: Sequence[str], k1: float = 1.2, b: float = 0.75) -> np.ndarray:
    return np.array([bm25_score(index, query_terms, c, k1, b) for c in range(len(index))])


def minmax(scores: np.ndarray) -> np.ndarray:
    """Scale to [0, 1]; an all-equal score vector carries no signal and maps to 0."""
    scores = np.asarray(scores, dtype=np.float64)
    lo, hi = scores.min(), scores.max()
    if hi - lo <= 0:
        return np.zeros_like(scores)
    return (scores - lo) / (hi - lo)


def fuse_scores(dense: np.ndarray, sparse: np.ndarray, w_dense: float = 0.6, w_sparse: float = 0.4) -> np.ndarray:
    if not math.isclose(w_dense + w_sparse, 1.0, abs_tol=1e-9):
        raise ValueError("fusion weights must sum to 1")
    return w_dense * minmax(dense) + w_sparse * minmax(sparse)


def rank(scores: np.ndarray, k: int, tiebreak: Optional[np.ndarray] = None) -> List[int]:
    """Top-k positions by descending score, then descending ``tiebreak``;
    remaining ties go to the lower position."""
    if tiebreak is None:
        tiebreak = np.zeros(len(scores))
    order = sorted(range(len(scores)), key=lambda c: (-scores[c], -tiebreak[c], c))
    return order[:k]


def hybrid_search(
    index: Index,
    query: str,
    embedder: EmbeddingProvider,
    k: int = 10,
    w_dense: float = 0.6,
    w_sparse: float = 0.4,
    doc_id: Optional[str] = None,
    k1: float = 1.2,
    b: float = 0.75,
) -> List[SearchResult]:
    """Rank chunks for ``query``; ``doc_id`` restricts candidates to one document."""
    if len(index) == 0:
        raise ValueError("empty index")
    if k < 1:
        raise ValueError("k must be >= 1")
    candidates = [c for c, ch in enumerate(index.chunks) if doc_id is None or ch.doc_id == doc_id]
    if not candidates:
        return []
    q = normalize_rows(embed_texts(embedder, [query]))[0]
    dense = normalize_rows(index.dense[candidates]) @ q
    terms = tokenize(query)
    sparse = np.array([bm25_score(index, terms, c, k1, b) for c in candidates])
    fused = fuse_scores(dense, sparse, w_dense, w_sparse)
    # Min-max scaling can round near-equal scores together; fall back on the
    # raw scores so a zero weight reproduces the other ranking exactly.
    raw = w_dense * dense + w_sparse * sparse if w_dense and w_sparse else (dense if w_dense else sparse)
    return [
        SearchResult(candidates[p], float(fused[p]), float(dense[p]), float(sparse[p]), r)
        for r, p in enumerate(rank(fused, k, raw), start=1)
    ]
