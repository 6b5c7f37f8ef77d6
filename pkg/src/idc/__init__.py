"""Intent-driven dynamic chunking (IDC).

Predict the questions a document will be asked, then cut it into the chunks
that best answer them, found exactly by dynamic programming. Baseline
chunkers, hybrid BM25 + dense retrieval and QA metrics are included so the
strategies can be compared end to end.
"""

from .docmodel import Chunk, Document, QAPair, Segmentation, Sentence, chunk_text, detect_paragraphs, split_sentences
from .embedding import EmbeddingMatrix, HashingEmbedder, build_matrix, cosine, mean_chunk_embedding
from .intent import IntentSet, StubGenerator, dedup_intents, plan_intent_count, predict_intents
from .segmenter import SegmenterConfig, brute_force_segment, postprocess, segment_dp

__all__ = [
    "Chunk", "Document", "QAPair", "Segmentation", "Sentence", "chunk_text", "detect_paragraphs",
    "split_sentences", "EmbeddingMatrix", "HashingEmbedder", "build_matrix", "cosine",
    "mean_chunk_embedding", "IntentSet", "StubGenerator", "dedup_intents", "plan_intent_count",
    "predict_intents", "SegmenterConfig", "brute_force_segment", "postprocess", "segment_dp",
]

__version__ = "0.1.0"
