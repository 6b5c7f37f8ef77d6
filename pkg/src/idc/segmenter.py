"""Intent-driven segmentation by exact dynamic programming.

A chunk spanning sentences i..j scores

    relevance(i, j) - lam * (j - i + 1)**2 - beta

where relevance is the best cosine between the chunk's mean sentence
embedding and any predicted intent. A segmentation's utility is

    sum(relevance) - lam * sum(len**2) - beta * (k - 1)

for k chunks. The recurrence charges ``beta`` once per chunk, so its final
value is ``utility - beta``; both are kept (``DPState.f[N]`` and
``Segmentation.utility``).
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, replace
from typing import Iterator, List, Sequence, Tuple

import numpy as np

from .docmodel import Chunk, Document, Segmentation, chunk_text
from .embedding import EmbeddingMatrix, cosine, mean_chunk_embedding, normalize_rows
from .intent import IntentSet

# Scores closer than this are treated as tied.
TIE_EPS = 1e-12
BRUTE_FORCE_MAX_N = 20


@dataclass(frozen=True)
class SegmenterConfig:
    lam: float = 0.0005
    beta: float = 0.05
    max_len: int = 12
    merge_min_len: int = 2
    split_max_len: int = 15

    def __post_init__(self) -> None:
        if self.lam < 0 or self.beta < 0:
            raise ValueError("penalties must be non-negative")
        if self.max_len < 1:
            raise ValueError("max_len must be >= 1")
        if self.split_max_len < self.max_len:
            raise ValueError("split_max_len must be >= max_len")


@dataclass(frozen=True)
class DPState:
    f: np.ndarray
    back: np.ndarray

    def boundaries(self) -> List[Tuple[int, int]]:
        spans = []
        j = len(self.f) - 1
        while j > 0:
            i = int(self.back[j])
            spans.append((i, j - 1))
            j = i
        return spans[::-1]


def _check_intents(intents: IntentSet) -> None:
    if len(intents) == 0:
        raise ValueError("no intents")


def relevance(matrix: EmbeddingMatrix, i: int, j: int, intents: IntentSet) -> Tuple[float, int]:
    """Best cosine between the mean of rows i..j and any intent, with its index."""
    _check_intents(intents)
    mean = mean_chunk_embedding(matrix, i, j)
    if not np.any(mean):
        return cosine(mean, intents.embeddings[0]), 0
    sims = [cosine(mean, q) for q in intents.embeddings]
    best = int(np.argmax(sims))
    return sims[best], best


def chunk_score(matrix, i: int, j: int, intents: IntentSet, config: SegmenterConfig) -> float:
    length = j - i + 1
    if length > config.max_len:
        raise ValueError(f"span length {length} exceeds max_len {config.max_len}")
    rel, _ = relevance(matrix, i, j, intents)
    return rel - config.lam * length * length - config.beta


def utility(chunks: Sequence[Chunk], config: SegmenterConfig) -> float:
    """Segmentation utility recomputed from chunk relevances and lengths."""
    if not chunks:
        return 0.0
    rel = sum(c.relevance for c in chunks)
    return rel - config.lam * sum(len(c) ** 2 for c in chunks) - config.beta * (len(chunks) - 1)


def _end_relevances(matrix: EmbeddingMatrix, unit_intents: np.ndarray, j: int, lo: int):
    """Relevance and best intent of every chunk ending at sentence j-1 and
    starting at i for i = j-1, j-2, ..., lo (shortest first)."""
    starts = np.arange(j - 1, lo - 1, -1)
    lengths = (j - starts)[:, None]
    means = (matrix.prefix[j] - matrix.prefix[starts]) / lengths
    sims = normalize_rows(means) @ unit_intents.T
    best = sims.argmax(axis=1)
    return sims[np.arange(len(starts)), best], best, starts


def solve_dp(matrix: EmbeddingMatrix, intents: IntentSet, config: SegmenterConfig) -> DPState:
    _check_intents(intents)
    n = len(matrix)
    unit = normalize_rows(np.asarray(intents.embeddings, dtype=np.float64))
    f = np.full(n + 1, -np.inf)
    f[0] = 0.0
    back = np.zeros(n + 1, dtype=np.int64)
    lam, beta = config.lam, config.beta
    for j in range(1, n + 1):
        rels, _, starts = _end_relevances(matrix, unit, j, max(0, j - config.max_len))
        best, best_i = -math.inf, -1
        # Shortest final chunk first, so ties keep the larger i.
        for length, (rel, i) in enumerate(zip(rels.tolist(), starts.tolist()), start=1):
            value = f[i] + rel - lam * length * length - beta
            if value > best + TIE_EPS:
                best, best_i = value, i
        f[j] = best
        back[j] = best_i
    return DPState(f=f, back=back)


def _build_chunks(document: Document, matrix, spans, intents: IntentSet) -> Tuple[Chunk, ...]:
    out = []
    for i, j in spans:
        rel, best = relevance(matrix, i, j, intents)
        out.append(replace(chunk_text(document, i, j), relevance=rel, best_intent=best))
    return tuple(out)


def segment_dp(document: Document, matrix: EmbeddingMatrix, intents: IntentSet, config: SegmenterConfig) -> Segmentation:
    if len(document) == 0:
        raise ValueError("empty document")
    if len(matrix) != len(document):
        raise ValueError("embedding matrix and document differ in sentence count")
    state = solve_dp(matrix, intents, config)
    chunks = _build_chunks(document, matrix, state.boundaries(), intents)
    return Segmentation(document.doc_id, chunks, "idc", utility=float(state.f[-1]) + config.beta)


def enumerate_partitions(n: int, max_len: int) -> Iterator[List[Tuple[int, int]]]:
    """Every partition of 0..n-1 into contiguous spans of length <= max_len."""
    for cuts in itertools.product((False, True), repeat=n - 1):
        spans, lo = [], 0
        for k, cut in enumerate(cuts, start=1):
            if cut:
                spans.append((lo, k - 1))
                lo = k
        spans.append((lo, n - 1))
        if all(b - a + 1 <= max_len for a, b in spans):
            yield spans


def brute_force_segment(document: Document, matrix: EmbeddingMatrix, intents: IntentSet, config: SegmenterConfig) -> Segmentation:
    """Exhaustive search over all partitions; a test oracle for segment_dp.

    Among tied optima it keeps the one whose chunk starts, read from the last
    chunk backwards, are lexicographically largest, which is the partition the
    recurrence reconstructs.
    """
    n = len(document)
    if n == 0:
        raise ValueError("empty document")
    if n > BRUTE_FORCE_MAX_N:
        raise ValueError(f"brute force limited to N <= {BRUTE_FORCE_MAX_N}, got {n}")
    _check_intents(intents)
    rel_cache = {}

    def rel(i, j):
        if (i, j) not in rel_cache:
            rel_cache[(i, j)] = relevance(matrix, i, j, intents)[0]
        return rel_cache[(i, j)]

    best_value, best_spans, best_key = -math.inf, None, None
    for spans in enumerate_partitions(n, config.max_len):
        value = (
            sum(rel(a, b) for a, b in spans)
            - config.lam * sum((b - a + 1) ** 2 for a, b in spans)
            - config.beta * (len(spans) - 1)
        )
        key = tuple(a for a, _ in reversed(spans))
        if value > best_value + TIE_EPS or (abs(value - best_value) <= TIE_EPS and key > best_key):
            best_value, best_spans, best_key = value, spans, key
    chunks = _build_chunks(document, matrix, best_spans, intents)
    return Segmentation(document.doc_id, chunks, "idc", utility=best_value)


def _merge_short(spans: List[Tuple[int, int]], intent_of, min_len: int) -> List[Tuple[int, int]]:
    spans = list(spans)
    k = 0
    while k < len(spans):
        a, b = spans[k]
        if b - a + 1 < min_len:
            mine = intent_of(a, b)
            if k > 0 and intent_of(*spans[k - 1]) == mine:
                spans[k - 1 : k + 1] = [(spans[k - 1][0], b)]
                k -= 1
                continue
            if k + 1 < len(spans) and intent_of(*spans[k + 1]) == mine:
                spans[k : k + 2] = [(a, spans[k + 1][1])]
                continue
        k += 1
    return spans


def _split_long(span: Tuple[int, int], paragraph_starts: Sequence[int], max_len: int) -> List[Tuple[int, int]]:
    a, b = span
    if b - a + 1 <= max_len:
        return [span]
    mid = a + (b - a + 1) // 2
    inside = [p for p in paragraph_starts if a < p <= b]
    cut = min(inside, key=lambda p: (abs(p - mid), p)) if inside else mid
    return _split_long((a, cut - 1), paragraph_starts, max_len) + _split_long((cut, b), paragraph_starts, max_len)


def postprocess(
    segmentation: Segmentation,
    document: Document,
    config: SegmenterConfig,
    matrix: EmbeddingMatrix,
    intents: IntentSet,
) -> Segmentation:
    """Merge short same-intent neighbours, then split chunks over split_max_len.

    A short chunk merges into its left neighbour when they share a best intent,
    otherwise into its right one. Long chunks are cut at the paragraph start
    nearest their midpoint, or at the midpoint when none lies inside, until
    every piece fits. Relevance is recomputed for every new chunk; the
    reported utility is left as the optimum found before post-processing.
    """
    known = {(c.start, c.end): c.best_intent for c in segmentation.chunks}

    def intent_of(a, b):
        if (a, b) not in known:
            known[(a, b)] = relevance(matrix, a, b, intents)[1]
        return known[(a, b)]

    spans = _merge_short(segmentation.boundaries, intent_of, config.merge_min_len)
    spans = [piece for span in spans for piece in _split_long(span, document.paragraph_starts, config.split_max_len)]
    if spans == segmentation.boundaries:
        return replace(segmentation, postprocessed=True)
    old = {(c.start, c.end): c for c in segmentation.chunks}
    chunks = []
    for a, b in spans:
        chunks.append(old.get((a, b)) or _build_chunks(document, matrix, [(a, b)], intents)[0])
    return replace(segmentation, chunks=tuple(chunks), postprocessed=True)
