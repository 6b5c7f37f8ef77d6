"""Retrieval and segmentation metrics, and end-to-end method comparison."""

from __future__ import annotations

import csv
import io
import json
import re
import string
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Sequence, Union

from .docmodel import Chunk, Document, QAPair, Segmentation
from .embedding import EmbeddingProvider
from .intent import IntentGenerator
from .pipeline import CachedEmbedder, PipelineConfig, segment_corpus
from .retrieval import build_index, hybrid_search

_SPACE = re.compile(r"\s+")
_EDGE_PUNCT = string.punctuation + "“”‘’…"

TIMING_FIELDS = ("preprocess_seconds", "embed_seconds", "intent_seconds")


def normalize_text(text: str) -> str:
    return _SPACE.sub(" ", text.lower()).strip().strip(_EDGE_PUNCT).strip()


def contains_answer(chunk: Union[Chunk, str], answer: str) -> bool:
    needle = normalize_text(answer)
    if not needle:
        raise ValueError("answer is empty after normalization")
    text = chunk.text if isinstance(chunk, Chunk) else chunk
    return needle in normalize_text(text)


def first_hit_rank(ranked: Sequence[Union[Chunk, str]], answer: str) -> Optional[int]:
    """1-based rank of the first retrieved chunk containing the answer."""
    for r, chunk in enumerate(ranked, start=1):
        if contains_answer(chunk, answer):
            return r
    return None


def _ranks(ranked_results, qa_pairs) -> List[Optional[int]]:
    if len(ranked_results) != len(qa_pairs):
        raise ValueError("need exactly one ranked list per QA pair")
    return [first_hit_rank(ranked, qa.answer) for ranked, qa in zip(ranked_results, qa_pairs)]


def recall_at_k(ranked_results, qa_pairs: Sequence[QAPair], k: int) -> float:
    if k < 1:
        raise ValueError("k must be >= 1")
    ranks = _ranks(ranked_results, qa_pairs)
    if not ranks:
        return 0.0
    return sum(1 for r in ranks if r is not None and r <= k) / len(ranks)


def mrr(ranked_results, qa_pairs: Sequence[QAPair]) -> float:
    ranks = _ranks(ranked_results, qa_pairs)
    if not ranks:
        return 0.0
    return sum(1.0 / r for r in ranks if r is not None) / len(ranks)


def answer_coverage(segmentations: Union[Segmentation, Sequence[Segmentation]], qa_pairs: Sequence[QAPair]) -> float:
    """Fraction of pairs whose answer lies wholly inside some chunk.

    A pair naming a doc_id only counts chunks of that document.
    """
    if isinstance(segmentations, Segmentation):
        segmentations = [segmentations]
    if not qa_pairs:
        return 0.0
    by_doc: Dict[str, List[Chunk]] = {}
    for seg in segmentations:
        by_doc.setdefault(seg.doc_id, []).extend(seg.chunks)
    everything = [c for chunks in by_doc.values() for c in chunks]
    covered = 0
    for qa in qa_pairs:
        pool = by_doc.get(qa.doc_id, []) if qa.doc_id is not None else everything
        covered += any(contains_answer(c, qa.answer) for c in pool)
    return covered / len(qa_pairs)


def chunk_stats(segmentations: Union[Segmentation, Sequence[Segmentation]]) -> dict:
    if isinstance(segmentations, Segmentation):
        segmentations = [segmentations]
    lengths = [len(c) for seg in segmentations for c in seg.chunks]
    if not lengths:
        return {"count": 0, "mean_len": None, "max_len": None, "min_len": None}
    return {
        "count": len(lengths),
        "mean_len": sum(lengths) / len(lengths),
        "max_len": max(lengths),
        "min_len": min(lengths),
    }


@dataclass
class MethodRecord:
    method: str
    recall_at_1: float
    recall_at_5: float
    mrr: float
    chunk_count: int
    answer_coverage: float
    mean_chunk_len: Optional[float]
    preprocess_seconds: float = 0.0
    embed_seconds: float = 0.0
    intent_seconds: float = 0.0
    num_queries: int = 0
    fallback_docs: List[str] = field(default_factory=list)


@dataclass
class EvalReport:
    dataset: str
    records: List[MethodRecord]
    settings: dict = field(default_factory=dict)

    def to_dict(self, include_timings: bool = True) -> dict:
        records = []
        for rec in self.records:
            d = asdict(rec)
            if not include_timings:
                for key in TIMING_FIELDS:
                    d.pop(key)
            records.append(d)
        return {"dataset": self.dataset, "settings": self.settings, "records": records}

    def to_json(self, include_timings: bool = True) -> str:
        return json.dumps(self.to_dict(include_timings), indent=2, sort_keys=True) + "\n"

    def timings(self) -> dict:
        return {
            "dataset": self.dataset,
            "records": [{"method": r.method, **{k: getattr(r, k) for k in TIMING_FIELDS}} for r in self.records],
        }

    def to_csv(self, include_timings: bool = True) -> str:
        cols = ["dataset", "method", "recall_at_1", "recall_at_5", "mrr", "chunk_count",
                "answer_coverage", "mean_chunk_len", "num_queries", "fallback_docs"]
        if include_timings:
            cols += list(TIMING_FIELDS)
        buf = io.StringIO()
        writer = csv.DictWriter(buf, fieldnames=cols, lineterminator="\n")
        writer.writeheader()
        for rec in self.records:
            row = {k: v for k, v in asdict(rec).items() if k in cols}
            row["fallback_docs"] = ";".join(rec.fallback_docs)
            writer.writerow(dict(row, dataset=self.dataset))
        return buf.getvalue()


def figure_series(reports: Iterable[EvalReport]) -> Dict[str, List[tuple]]:
    """(method, dataset, value) triples for recall@1, all metrics, chunk
    counts and coverage plots."""
    series: Dict[str, List[tuple]] = {"recall_at_1": [], "all_metrics": [], "chunk_count": [], "answer_coverage": []}
    for rep in reports:
        for r in rep.records:
            series["recall_at_1"].append((r.method, rep.dataset, r.recall_at_1))
            for metric in ("recall_at_1", "recall_at_5", "mrr"):
                series["all_metrics"].append((r.method, rep.dataset, metric, getattr(r, metric)))
            series["chunk_count"].append((r.method, rep.dataset, r.chunk_count))
            series["answer_coverage"].append((r.method, rep.dataset, r.answer_coverage))
    return series


def write_figure_data(reports: Iterable[EvalReport], out_dir: str | Path) -> List[Path]:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written = []
    for name, rows in figure_series(reports).items():
        path = out_dir / f"{name}.csv"
        header = ["method", "dataset", "metric", "value"] if name == "all_metrics" else ["method", "dataset", "value"]
        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(header)
            writer.writerows(rows)
        written.append(path)
    return written


def evaluate_segmentations(
    segmentations: Sequence[Segmentation],
    qa_pairs: Sequence[QAPair],
    embedder: EmbeddingProvider,
    method: str,
    k: int = 10,
    per_document: bool = False,
    w_dense: float = 0.6,
) -> MethodRecord:
    """Index the chunks, run every question and score the rankings."""
    if not qa_pairs:
        raise ValueError("no QA pairs")
    chunks = [c for seg in segmentations for c in seg.chunks]
    index = build_index(chunks, embedder)
    depth = max(k, 5)
    ranked = []
    for qa in qa_pairs:
        hits = hybrid_search(
            index, qa.question, embedder, k=depth, w_dense=w_dense, w_sparse=1.0 - w_dense,
            doc_id=qa.doc_id if per_document else None,
        )
        ranked.append([index.chunks[h.chunk_index] for h in hits])
    stats = chunk_stats(segmentations)
    return MethodRecord(
        method=method,
        recall_at_1=recall_at_k(ranked, qa_pairs, 1),
        recall_at_5=recall_at_k(ranked, qa_pairs, 5),
        mrr=mrr(ranked, qa_pairs),
        chunk_count=stats["count"],
        answer_coverage=answer_coverage(segmentations, qa_pairs),
        mean_chunk_len=stats["mean_len"],
        num_queries=len(qa_pairs),
    )


def compare_methods(
    documents: Sequence[Document],
    qa_pairs: Sequence[QAPair],
    methods: Sequence[str],
    embedder: EmbeddingProvider,
    generator: Optional[IntentGenerator] = None,
    config: PipelineConfig = PipelineConfig(),
    dataset: str = "corpus",
    k: int = 10,
    per_document: bool = False,
    w_dense: float = 0.6,
) -> EvalReport:
    if not qa_pairs:
        raise ValueError("no QA pairs")
    shared = embedder if isinstance(embedder, CachedEmbedder) else CachedEmbedder(embedder)
    records = []
    for method in methods:
        results = segment_corpus(documents, method, shared, config, generator)
        segs = [r.segmentation for r in results]
        rec = evaluate_segmentations(segs, qa_pairs, shared, method, k, per_document, w_dense)
        rec.preprocess_seconds = sum(r.segment_seconds for r in results)
        rec.embed_seconds = sum(r.embed_seconds for r in results)
        rec.intent_seconds = sum(r.intent_seconds for r in results)
        rec.fallback_docs = [r.segmentation.doc_id for r in results if r.error is not None]
        records.append(rec)
    seg_cfg = config.segmenter
    settings = {
        "lambda": seg_cfg.lam, "beta": seg_cfg.beta, "max_len": seg_cfg.max_len,
        "merge_min_len": seg_cfg.merge_min_len, "split_max_len": seg_cfg.split_max_len,
        "window": config.window, "block": config.block, "postprocess": config.postprocess,
        "k": k, "w_dense": w_dense, "per_document": per_document,
        "embedder": getattr(embedder, "name", type(embedder).__name__),
        "generator": getattr(generator, "source", None),
    }
    return EvalReport(dataset, records, settings)
