"""Run any segmentation method over a corpus with shared preprocessing."""

from __future__ import annotations

import logging
import threading
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Dict, List, Optional, Sequence

import numpy as np

from .baselines import coherence_segment, fixed_length, paragraph_segment, sliding_window
from .docmodel import METHODS, Document, Segmentation
from .embedding import EmbeddingProvider, build_matrix, embed_texts
from .intent import DEDUP_THRESHOLD, IntentGenerator, IntentSet, predict_intents
from .segmenter import SegmenterConfig, postprocess, segment_dp

logger = logging.getLogger(__name__)


class CachedEmbedder:
    """Memoizes another provider so every method sees identical vectors."""

    def __init__(self, inner: EmbeddingProvider):
        self.inner = inner
        self.dim = inner.dim
        self.name = getattr(inner, "name", type(inner).__name__)
        self._cache: Dict[str, np.ndarray] = {}
        self._lock = threading.Lock()

    def embed(self, texts: Sequence[str]) -> np.ndarray:
        missing = list(dict.fromkeys(t for t in texts if t not in self._cache))
        if missing:
            vectors = embed_texts(self.inner, missing)
            with self._lock:
                self._cache.update(zip(missing, vectors))
        return np.vstack([self._cache[t] for t in texts]) if texts else np.zeros((0, self.dim))


@dataclass(frozen=True)
class PipelineConfig:
    segmenter: SegmenterConfig = field(default_factory=SegmenterConfig)
    window: int = 6
    stride: Optional[int] = None
    block: int = 3
    dedup_threshold: float = DEDUP_THRESHOLD
    postprocess: bool = True
    jobs: int = 1


@dataclass
class DocResult:
    segmentation: Segmentation
    segment_seconds: float = 0.0
    embed_seconds: float = 0.0
    intent_seconds: float = 0.0
    intents: Optional[IntentSet] = None
    error: Optional[str] = None


def segment_document(
    document: Document,
    method: str,
    embedder: EmbeddingProvider,
    config: PipelineConfig = PipelineConfig(),
    generator: Optional[IntentGenerator] = None,
) -> DocResult:
    if method not in METHODS:
        raise ValueError(f"unknown method {method!r}")
    if len(document) == 0:
        return DocResult(Segmentation(document.doc_id, (), method))
    if method == "fixed":
        t0 = time.perf_counter()
        seg = fixed_length(document, config.window)
        return DocResult(seg, segment_seconds=time.perf_counter() - t0)
    if method == "sliding":
        t0 = time.perf_counter()
        seg = sliding_window(document, config.window, config.stride)
        return DocResult(seg, segment_seconds=time.perf_counter() - t0)
    if method == "paragraph":
        t0 = time.perf_counter()
        seg = paragraph_segment(document)
        return DocResult(seg, segment_seconds=time.perf_counter() - t0)

    t0 = time.perf_counter()
    matrix = build_matrix(embed_texts(embedder, document.texts))
    embed_seconds = time.perf_counter() - t0
    if method == "coherence":
        t0 = time.perf_counter()
        seg = coherence_segment(document, matrix, config.block)
        return DocResult(seg, segment_seconds=time.perf_counter() - t0, embed_seconds=embed_seconds)

    if generator is None:
        raise ValueError("IDC needs an intent generator")
    t0 = time.perf_counter()
    try:
        intents = predict_intents(document, generator, embedder, config.dedup_threshold)
        error = None if len(intents) else "no intents"
    except Exception as exc:
        intents, error = None, f"{type(exc).__name__}: {exc}"
    intent_seconds = time.perf_counter() - t0

    t0 = time.perf_counter()
    if error is not None:
        logger.warning("%s: intent prediction failed (%s); using coherence segmentation", document.doc_id, error)
        seg = coherence_segment(document, matrix, config.block)
        seg = replace(seg, flags=(f"idc-fallback: {error}",))
    else:
        seg = segment_dp(document, matrix, intents, config.segmenter)
        if config.postprocess:
            seg = postprocess(seg, document, config.segmenter, matrix, intents)
    return DocResult(
        seg,
        segment_seconds=time.perf_counter() - t0,
        embed_seconds=embed_seconds,
        intent_seconds=intent_seconds,
        intents=intents,
        error=error,
    )


def segment_corpus(
    documents: Sequence[Document],
    method: str,
    embedder: EmbeddingProvider,
    config: PipelineConfig = PipelineConfig(),
    generator: Optional[IntentGenerator] = None,
) -> List[DocResult]:
    """Segment every document; results come back sorted by doc_id."""

    def work(doc):
        return segment_document(doc, method, embedder, config, generator)

    if config.jobs > 1:
        with ThreadPoolExecutor(max_workers=config.jobs) as pool:
            results = list(pool.map(work, documents))
    else:
        results = [work(d) for d in documents]
    return sorted(results, key=lambda r: r.segmentation.doc_id)
