"""Predicting the questions a document is likely to be asked."""

from __future__ import annotations

import json
import logging
import math
import re
from collections import defaultdict
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Protocol, Sequence, Tuple

import numpy as np

from .apiclient import JSONClient, credentials_from_env
from .docmodel import Document
from .embedding import EmbeddingProvider, embed_texts, normalize_rows

logger = logging.getLogger(__name__)

SHORT_DOC = 100
LONG_DOC = 400
SHORT_COUNT = 12
LONG_COUNT = 38
SECTIONWISE_FROM = 150
SECTION_SIZE = 80
DEDUP_THRESHOLD = 0.85

STUB_TEMPLATE = "What does the document say about: {}?"

SYSTEM_PROMPT = (
    "You write the questions a reader could answer from a passage. "
    "Cover the passage's main topics and its key details. "
    "Return exactly one question per line and nothing else."
)


class IntentGenerationError(RuntimeError):
    def __init__(self, message: str, section: int, partial: List[str]):
        super().__init__(f"section {section}: {message}")
        self.section = section
        self.partial = partial


@dataclass(frozen=True)
class IntentSet:
    questions: Tuple[str, ...]
    embeddings: np.ndarray
    source: str = "stub"

    def __post_init__(self) -> None:
        if len(self.questions) != len(self.embeddings):
            raise ValueError("questions and embeddings differ in length")
        if self.source not in ("llm", "stub", "file"):
            raise ValueError(f"unknown intent source {self.source!r}")

    def __len__(self) -> int:
        return len(self.questions)


@dataclass(frozen=True)
class IntentPlan:
    target_count: int
    per_section: Tuple[Tuple[Tuple[int, int], int], ...] = field(default=())

    @property
    def sectionwise(self) -> bool:
        return len(self.per_section) > 1

    def sections(self, num_sentences: int) -> List[Tuple[Tuple[int, int], int]]:
        if self.per_section:
            return list(self.per_section)
        return [((0, num_sentences - 1), self.target_count)]


def target_intent_count(num_sentences: int) -> int:
    if num_sentences < SHORT_DOC:
        return SHORT_COUNT
    if num_sentences > LONG_DOC:
        return LONG_COUNT
    frac = (num_sentences - SHORT_DOC) / (LONG_DOC - SHORT_DOC)
    return int(math.floor(SHORT_COUNT + frac * (LONG_COUNT - SHORT_COUNT) + 0.5))


def _section_ranges(num_sentences: int, paragraph_starts: Sequence[int]) -> List[Tuple[int, int]]:
    """Runs of about SECTION_SIZE sentences, cut at paragraph starts when one is near."""
    paragraphs = sorted(set(paragraph_starts) | {0})
    half = SECTION_SIZE // 2
    ranges = []
    lo = 0
    while num_sentences - lo > SECTION_SIZE + half:
        ideal = lo + SECTION_SIZE
        near = [p for p in paragraphs if lo + half <= p <= ideal + half]
        cut = min(near, key=lambda p: (abs(p - ideal), p)) if near else ideal
        ranges.append((lo, cut - 1))
        lo = cut
    ranges.append((lo, num_sentences - 1))
    return ranges


def _apportion(total: int, sizes: Sequence[int]) -> List[int]:
    """Largest-remainder split of ``total`` proportional to ``sizes``, each >= 1."""
    n = sum(sizes)
    raw = [total * s / n for s in sizes]
    counts = [max(1, int(math.floor(r))) for r in raw]
    order = sorted(range(len(sizes)), key=lambda k: (-(raw[k] - math.floor(raw[k])), k))
    k = 0
    while sum(counts) < total:
        counts[order[k % len(order)]] += 1
        k += 1
    return counts


def plan_intent_count(num_sentences: int, paragraph_starts: Sequence[int] = (0,)) -> IntentPlan:
    if num_sentences < 1:
        raise ValueError("num_sentences must be >= 1")
    target = target_intent_count(num_sentences)
    if num_sentences < SECTIONWISE_FROM:
        return IntentPlan(target)
    ranges = _section_ranges(num_sentences, paragraph_starts)
    counts = _apportion(target, [b - a + 1 for a, b in ranges])
    return IntentPlan(sum(counts), tuple(zip(ranges, counts)))


class IntentGenerator(Protocol):
    source: str

    def generate(self, document: Document, span: Tuple[int, int], count: int) -> List[str]:
        ...


def normalize_question(line: str) -> str:
    q = re.sub(r"^\s*(?:[-*•]+|\(?\d+[.)])\s*", "", line).strip()
    q = q.strip("\"'").strip()
    if not q:
        return ""
    return q if q.endswith("?") else q.rstrip(".") + "?"


def generate_intents(generator: IntentGenerator, document: Document, plan: IntentPlan) -> List[str]:
    if len(document) == 0:
        raise ValueError("empty document")
    questions: List[str] = []
    for k, (span, count) in enumerate(plan.sections(len(document))):
        try:
            produced = generator.generate(document, span, count)
        except Exception as exc:
            raise IntentGenerationError(str(exc), k, list(questions)) from exc
        produced = [q for q in (normalize_question(p) for p in produced) if q]
        questions.extend(produced)
    if not questions:
        raise IntentGenerationError("generator produced no questions", len(plan.sections(len(document))) - 1, [])
    return questions


def dedup_intents(
    questions: Sequence[str],
    embedder: EmbeddingProvider,
    threshold: float = DEDUP_THRESHOLD,
    source: str = "stub",
) -> IntentSet:
    """Keep a question only if its cosine to every kept question is <= threshold."""
    if not questions:
        raise ValueError("no questions to deduplicate")
    unit = normalize_rows(embed_texts(embedder, list(questions)))
    kept: List[int] = []
    for k in range(len(questions)):
        if all(float(unit[k] @ unit[m]) <= threshold for m in kept):
            kept.append(k)
    return IntentSet(tuple(questions[k] for k in kept), unit[kept], source)


class StubGenerator:
    """Offline generator: turns the most central sentences into questions.

    Centrality is a sentence's mean cosine to the other sentences of the same
    section. Questions come out most-central first.
    """

    source = "stub"

    def __init__(self, embedder: EmbeddingProvider):
        self.embedder = embedder

    def generate(self, document: Document, span: Tuple[int, int], count: int) -> List[str]:
        lo, hi = span
        texts = document.texts[lo : hi + 1]
        if len(texts) == 1:
            return [STUB_TEMPLATE.format(texts[0].rstrip(".!?"))]
        unit = normalize_rows(embed_texts(self.embedder, texts))
        sims = unit @ unit.T
        centrality = (sims.sum(axis=1) - np.diag(sims)) / (len(texts) - 1)
        order = sorted(range(len(texts)), key=lambda k: (-round(float(centrality[k]), 12), k))
        return [STUB_TEMPLATE.format(texts[k].rstrip(".!?")) for k in order[:count]]


class LLMGenerator:
    """Chat-completion generator; each section is prompted on its own."""

    source = "llm"

    def __init__(
        self,
        model: str = "gemini-2.5-flash",
        temperature: float = 0.8,
        top_k: Optional[int] = 40,
        url: Optional[str] = None,
        client: Optional[JSONClient] = None,
        seed: Optional[int] = None,
        **client_kwargs,
    ):
        self.model = model
        self.temperature = temperature
        self.top_k = top_k
        self.seed = seed
        if client is None:
            base, key = credentials_from_env(url)
            client = JSONClient(base, key, **client_kwargs)
        self.client = client

    def build_payload(self, document: Document, span: Tuple[int, int], count: int) -> dict:
        lo, hi = span
        passage = " ".join(document.texts[lo : hi + 1])
        payload = {
            "model": self.model,
            "messages": [
                {"role": "system", "content": SYSTEM_PROMPT},
                {"role": "user", "content": f"Write {count} questions for this passage.\n\n{passage}"},
            ],
            "temperature": self.temperature,
        }
        if self.top_k is not None:
            payload["top_k"] = self.top_k
        if self.seed is not None:
            payload["seed"] = self.seed
        return payload

    def generate(self, document: Document, span: Tuple[int, int], count: int) -> List[str]:
        data = self.client.post("chat/completions", self.build_payload(document, span, count))
        try:
            content = data["choices"][0]["message"]["content"]
        except (KeyError, IndexError, TypeError) as exc:
            raise ValueError(f"malformed chat response: {exc}") from None
        return [line for line in content.splitlines() if line.strip()]


class FileGenerator:
    """Replays questions stored as ``{"doc_id", "question"}`` JSONL records.

    Every stored question for the document is returned on the first section;
    the plan's counts are ignored because the file is the experiment input.
    """

    source = "file"

    def __init__(self, path: str | Path):
        self.by_doc: Dict[str, List[str]] = defaultdict(list)
        with open(path, encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, start=1):
                if not line.strip():
                    continue
                try:
                    rec = json.loads(line)
                    self.by_doc[str(rec["doc_id"])].append(rec["question"])
                except (json.JSONDecodeError, KeyError, TypeError):
                    raise ValueError(f"{path}: malformed intent record on line {lineno}") from None

    def generate(self, document: Document, span: Tuple[int, int], count: int) -> List[str]:
        if span[0] != 0:
            return []
        if document.doc_id not in self.by_doc:
            raise KeyError(f"no stored intents for document {document.doc_id!r}")
        return list(self.by_doc[document.doc_id])


def predict_intents(
    document: Document,
    generator: IntentGenerator,
    embedder: EmbeddingProvider,
    threshold: float = DEDUP_THRESHOLD,
) -> IntentSet:
    plan = plan_intent_count(len(document), document.paragraph_starts)
    questions = generate_intents(generator, document, plan)
    intents = dedup_intents(questions, embedder, threshold, source=generator.source)
    logger.debug("%s: %d questions, %d after dedup", document.doc_id, len(questions), len(intents))
    return intents
