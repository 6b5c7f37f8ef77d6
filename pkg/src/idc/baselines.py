"""Comparison chunkers: fixed windows, sliding windows, embedding TextTiling
and paragraphs. All of them work on the same sentence split as IDC."""

from __future__ import annotations

from typing import List, Optional, Sequence, Tuple

import numpy as np

from .docmodel import Document, Segmentation, chunk_text
from .embedding import EmbeddingMatrix, normalize_rows


def _segmentation(document: Document, spans: Sequence[Tuple[int, int]], method: str) -> Segmentation:
    chunks = tuple(chunk_text(document, a, b) for a, b in spans)
    return Segmentation(document.doc_id, chunks, method)


def spans_from_starts(starts: Sequence[int], n: int) -> List[Tuple[int, int]]:
    starts = sorted(set(starts))
    ends = [s - 1 for s in starts[1:]] + [n - 1]
    return list(zip(starts, ends))


def fixed_length(document: Document, window: int = 6) -> Segmentation:
    if window < 1:
        raise ValueError("window must be >= 1")
    n = len(document)
    spans = [(a, min(a + window, n) - 1) for a in range(0, n, window)]
    return _segmentation(document, spans, "fixed")


def sliding_window(document: Document, window: int = 6, stride: Optional[int] = None) -> Segmentation:
    if stride is None:
        stride = max(1, window // 2)
    if not 1 <= stride <= window:
        raise ValueError("need 1 <= stride <= window")
    n = len(document)
    spans = []
    start = 0
    while n:
        end = min(start + window, n) - 1
        spans.append((start, end))
        if end == n - 1:
            break
        start += stride
    return _segmentation(document, spans, "sliding")


def gap_similarities(matrix: EmbeddingMatrix, block: int = 3) -> np.ndarray:
    """Cosine between the mean of the ``block`` sentences before each gap and
    the ``block`` after it. Entry g-1 is the gap before sentence g."""
    n = len(matrix)
    gaps = np.arange(1, n)
    if not len(gaps):
        return np.zeros(0)
    lo = np.maximum(gaps - block, 0)
    hi = np.minimum(gaps + block, n)
    left = (matrix.prefix[gaps] - matrix.prefix[lo]) / (gaps - lo)[:, None]
    right = (matrix.prefix[hi] - matrix.prefix[gaps]) / (hi - gaps)[:, None]
    return np.sum(normalize_rows(left) * normalize_rows(right), axis=1)


def depth_scores(sims: Sequence[float]) -> np.ndarray:
    """TextTiling depth: rise to the nearest peak on each side of every gap."""
    sims = np.asarray(sims, dtype=np.float64)
    depth = np.zeros_like(sims)
    for g, s in enumerate(sims):
        left = g
        while left > 0 and sims[left - 1] >= sims[left]:
            left -= 1
        right = g
        while right < len(sims) - 1 and sims[right + 1] >= sims[right]:
            right += 1
        depth[g] = (sims[left] - s) + (sims[right] - s)
    return depth


def coherence_segment(
    document: Document,
    matrix: EmbeddingMatrix,
    block: int = 3,
    cutoff_std: float = 0.5,
) -> Segmentation:
    """Cut at gaps whose depth exceeds mean + cutoff_std * std of all depths."""
    n = len(document)
    if n == 0:
        return _segmentation(document, [], "coherence")
    if len(matrix) != n:
        raise ValueError("embedding matrix and document differ in sentence count")
    depth = depth_scores(gap_similarities(matrix, block))
    starts = [0]
    if len(depth):
        cutoff = depth.mean() + cutoff_std * depth.std()
        starts += [g + 1 for g in np.flatnonzero(depth > cutoff + 1e-12)]
    return _segmentation(document, spans_from_starts(starts, n), "coherence")


def paragraph_segment(document: Document) -> Segmentation:
    n = len(document)
    spans = spans_from_starts(document.paragraph_starts, n) if n else []
    return _segmentation(document, spans, "paragraph")
