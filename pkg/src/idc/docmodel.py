"""Document, sentence and chunk types shared by every segmentation method."""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterator, List, Optional, Sequence, Tuple

METHODS = ("idc", "fixed", "sliding", "coherence", "paragraph")

# Lowercased, with the trailing period.
ABBREVIATIONS = frozenset(
    {
        "dr.", "mr.", "mrs.", "ms.", "prof.", "sr.", "jr.", "st.", "mt.",
        "e.g.", "i.e.", "cf.", "vs.", "etc.", "al.", "approx.",
        "fig.", "figs.", "eq.", "eqs.", "no.", "vol.", "pp.", "sec.", "ch.",
        "inc.", "ltd.", "co.", "corp.", "dept.", "u.s.", "u.k.",
        "jan.", "feb.", "mar.", "apr.", "jun.", "jul.", "aug.", "sep.",
        "sept.", "oct.", "nov.", "dec.",
    }
)

_PARAGRAPH_BREAK = re.compile(r"\n[^\S\n]*\n\s*")
# Terminal punctuation and optional closing quotes/brackets, followed by
# whitespace, an optional opening quote/bracket and then a word character that
# must be uppercase or a digit (checked in code so non-ASCII capitals count).
_BOUNDARY = re.compile(r"[.!?]+[\"')\]”’]*(?=\s+[\"'(\[“‘]?(\w))")
_WORD_BEFORE = re.compile(r"(\S+)$")


@dataclass(frozen=True)
class Sentence:
    index: int
    text: str
    char_span: Tuple[int, int]


@dataclass(frozen=True)
class Document:
    doc_id: str
    raw_text: str
    sentences: Tuple[Sentence, ...]
    paragraph_starts: Tuple[int, ...]

    @classmethod
    def from_text(cls, doc_id: str, raw_text: str) -> "Document":
        sentences = split_sentences(raw_text)
        return cls(
            doc_id=doc_id,
            raw_text=raw_text,
            sentences=tuple(sentences),
            paragraph_starts=tuple(detect_paragraphs(raw_text, sentences)),
        )

    def __len__(self) -> int:
        return len(self.sentences)

    @property
    def texts(self) -> List[str]:
        return [s.text for s in self.sentences]


@dataclass(frozen=True)
class Chunk:
    doc_id: str
    start: int
    end: int
    text: str
    relevance: Optional[float] = None
    best_intent: Optional[int] = None

    def __len__(self) -> int:
        return self.end - self.start + 1

    def to_dict(self) -> dict:
        out = {"start": self.start, "end": self.end, "text": self.text}
        if self.relevance is not None:
            out["relevance"] = self.relevance
        if self.best_intent is not None:
            out["best_intent"] = self.best_intent
        return out

    @classmethod
    def from_dict(cls, doc_id: str, data: dict) -> "Chunk":
        return cls(
            doc_id=doc_id,
            start=int(data["start"]),
            end=int(data["end"]),
            text=data["text"],
            relevance=data.get("relevance"),
            best_intent=data.get("best_intent"),
        )


@dataclass(frozen=True)
class Segmentation:
    """Ordered chunks for one document.

    For IDC, ``utility`` is the optimum found by the boundary search and is
    kept even after post-processing changes the chunks (``postprocessed``
    records whether that happened).
    """

    doc_id: str
    chunks: Tuple[Chunk, ...]
    method: str
    utility: Optional[float] = None
    postprocessed: bool = False
    flags: Tuple[str, ...] = field(default=())

    def __post_init__(self) -> None:
        if self.method not in METHODS:
            raise ValueError(f"unknown segmentation method {self.method!r}")

    def __len__(self) -> int:
        return len(self.chunks)

    @property
    def boundaries(self) -> List[Tuple[int, int]]:
        return [(c.start, c.end) for c in self.chunks]

    def to_dict(self) -> dict:
        out = {
            "doc_id": self.doc_id,
            "method": self.method,
            "chunks": [c.to_dict() for c in self.chunks],
            "utility": self.utility,
        }
        if self.method == "idc":
            out["postprocessed"] = self.postprocessed
        if self.flags:
            out["flags"] = list(self.flags)
        return out

    @classmethod
    def from_dict(cls, data: dict) -> "Segmentation":
        doc_id = data["doc_id"]
        return cls(
            doc_id=doc_id,
            chunks=tuple(Chunk.from_dict(doc_id, c) for c in data["chunks"]),
            method=data["method"],
            utility=data.get("utility"),
            postprocessed=bool(data.get("postprocessed", False)),
            flags=tuple(data.get("flags", ())),
        )


@dataclass(frozen=True)
class QAPair:
    question: str
    answer: str
    doc_id: Optional[str] = None

    def __post_init__(self) -> None:
        if not self.question.strip() or not self.answer.strip():
            raise ValueError("QA pair needs a non-empty question and answer")


def _split_block(raw_text: str, start: int, end: int) -> Iterator[Tuple[int, int]]:
    """Yield trimmed sentence spans inside raw_text[start:end]."""
    block = raw_text[start:end]
    cursor = 0
    for match in _BOUNDARY.finditer(block):
        cut = match.end()
        following = match.group(1)
        if not (following.isupper() or following.isdigit()):
            continue
        if match.group(0).startswith(".") and len(match.group(0).rstrip("\"')]”’")) == 1:
            word = _WORD_BEFORE.search(block[cursor:cut])
            if word and word.group(1).lower().lstrip("\"'([“‘") in ABBREVIATIONS:
                continue
        yield from _trimmed(block, cursor, cut, start)
        cursor = cut
    yield from _trimmed(block, cursor, len(block), start)


def _trimmed(block: str, lo: int, hi: int, offset: int) -> Iterator[Tuple[int, int]]:
    piece = block[lo:hi]
    stripped = piece.strip()
    if stripped:
        lead = len(piece) - len(piece.lstrip())
        yield offset + lo + lead, offset + lo + lead + len(stripped)


def split_sentences(raw_text: str) -> List[Sentence]:
    """Rule-based splitter on ``. ! ?``; paragraph breaks always end a sentence."""
    spans: List[Tuple[int, int]] = []
    cursor = 0
    for brk in _PARAGRAPH_BREAK.finditer(raw_text):
        spans.extend(_split_block(raw_text, cursor, brk.start()))
        cursor = brk.end()
    spans.extend(_split_block(raw_text, cursor, len(raw_text)))
    return [Sentence(i, raw_text[a:b], (a, b)) for i, (a, b) in enumerate(spans)]


def detect_paragraphs(raw_text: str, sentences: Sequence[Sentence]) -> List[int]:
    if not sentences:
        return []
    starts = [0]
    for k in range(1, len(sentences)):
        gap = raw_text[sentences[k - 1].char_span[1] : sentences[k].char_span[0]]
        if _PARAGRAPH_BREAK.search(gap):
            starts.append(k)
    return starts


def chunk_text(document: Document, start: int, end: int) -> Chunk:
    n = len(document.sentences)
    if not 0 <= start <= end < n:
        raise IndexError(f"chunk span ({start}, {end}) out of range for {n} sentences")
    text = " ".join(s.text for s in document.sentences[start : end + 1])
    return Chunk(doc_id=document.doc_id, start=start, end=end, text=text)


def check_partition(segmentation: Segmentation, num_sentences: int) -> None:
    """Raise ValueError unless the chunks tile 0..N-1 (coverage only for sliding)."""
    chunks = segmentation.chunks
    if num_sentences == 0:
        if chunks:
            raise ValueError("non-empty segmentation of an empty document")
        return
    if not chunks:
        raise ValueError("empty segmentation of a non-empty document")
    for c in chunks:
        if not 0 <= c.start <= c.end < num_sentences:
            raise ValueError(f"chunk ({c.start}, {c.end}) out of range")
    if segmentation.method == "sliding":
        covered = set()
        for c in chunks:
            covered.update(range(c.start, c.end + 1))
        if covered != set(range(num_sentences)):
            raise ValueError("sliding windows do not cover the document")
        return
    if chunks[0].start != 0 or chunks[-1].end != num_sentences - 1:
        raise ValueError("chunks do not span the whole document")
    for prev, nxt in zip(chunks, chunks[1:]):
        if nxt.start != prev.end + 1:
            raise ValueError(f"gap or overlap between chunks ending {prev.end} and starting {nxt.start}")


def _read_jsonl(path: Path) -> Iterator[Tuple[int, dict]]:
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ValueError(f"{path}: malformed JSON on line {lineno}: {exc.msg}") from None
            if not isinstance(record, dict):
                raise ValueError(f"{path}: line {lineno} is not a JSON object")
            yield lineno, record


def load_corpus(path: str | Path) -> List[Document]:
    docs = []
    seen = set()
    for lineno, rec in _read_jsonl(Path(path)):
        try:
            doc_id, text = str(rec["doc_id"]), rec["text"]
        except KeyError as exc:
            raise ValueError(f"{path}: line {lineno} missing field {exc.args[0]!r}") from None
        if doc_id in seen:
            raise ValueError(f"{path}: duplicate doc_id {doc_id!r} on line {lineno}")
        seen.add(doc_id)
        docs.append(Document.from_text(doc_id, text))
    return docs


def load_qa(path: str | Path) -> List[QAPair]:
    pairs = []
    for lineno, rec in _read_jsonl(Path(path)):
        try:
            pairs.append(QAPair(rec["question"], rec["answer"], rec.get("doc_id")))
        except KeyError as exc:
            raise ValueError(f"{path}: line {lineno} missing field {exc.args[0]!r}") from None
        except ValueError as exc:
            raise ValueError(f"{path}: line {lineno}: {exc}") from None
    return pairs


def write_jsonl(path: str | Path, records) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for rec in records:
            fh.write(json.dumps(rec, ensure_ascii=False, sort_keys=True) + "\n")


def read_segmentations(path: str | Path) -> List[Segmentation]:
    return [Segmentation.from_dict(rec) for _, rec in _read_jsonl(Path(path))]
