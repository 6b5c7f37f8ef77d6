import numpy as np
import pytest

from idc.docmodel import Document
from idc.embedding import HashingEmbedder, build_matrix
from idc.intent import IntentSet, StubGenerator

ACCEPTANCE_LINES = []

VOCAB = (
    "river stone light market bread engine cloud forest copper signal quiet orbit "
    "garden winter paper harbor silver motor castle thunder lemon valley pixel canvas"
).split()


class TableEmbedder:
    """Returns hand-set vectors for known texts."""

    name = "table"

    def __init__(self, table):
        self.table = {k: np.asarray(v, dtype=float) for k, v in table.items()}
        self.dim = len(next(iter(self.table.values())))

    def embed(self, texts):
        return np.vstack([self.table[t] for t in texts])


def make_doc(n, paragraph_starts=(0,), doc_id="d"):
    """Document with sentences "Sentence k." and blank lines before paragraph starts."""
    parts = []
    for k in range(n):
        if k and k in paragraph_starts:
            parts.append("\n\n")
        elif k:
            parts.append(" ")
        parts.append(f"Sentence {k}.")
    return Document.from_text(doc_id, "".join(parts))


def random_sentences(rng, n):
    out = []
    for _ in range(n):
        words = list(rng.choice(VOCAB, size=rng.integers(3, 9)))
        out.append(" ".join(words).capitalize() + ".")
    return out


def random_instance(seed, n_max=12, dim=16, n_intents=3):
    """Random document embedded offline, with stub intents."""
    rng = np.random.default_rng(seed)
    n = int(rng.integers(1, n_max + 1))
    doc = Document.from_text(f"r{seed}", " ".join(random_sentences(rng, n)))
    assert len(doc) == n
    emb = HashingEmbedder(dim)
    matrix = build_matrix(emb.embed(doc.texts))
    questions = StubGenerator(emb).generate(doc, (0, n - 1), n_intents)
    intents = IntentSet(tuple(questions), emb.embed(questions), "stub")
    return doc, matrix, intents


def vector_instance(rows, intent_rows, paragraph_starts=(0,)):
    doc = make_doc(len(rows), paragraph_starts)
    matrix = build_matrix(np.asarray(rows, dtype=float))
    intents = IntentSet(tuple(f"q{k}?" for k in range(len(intent_rows))), np.asarray(intent_rows, dtype=float), "stub")
    return doc, matrix, intents


@pytest.fixture
def offline():
    return HashingEmbedder(64)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
