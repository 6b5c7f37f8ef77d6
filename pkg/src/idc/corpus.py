"""Seeded synthetic corpora with planted topic blocks and answerable questions.

Each topic owns a private vocabulary of pseudo-words. A document is a run of
topic blocks split into paragraphs; a few sentences per topic state a planted
fact ("The <attribute> of the <thing> is <value>.") and each QA pair asks for
one of those values, so every answer is a substring of a single sentence.
"""

from __future__ import annotations

import random
from dataclasses import dataclass
from typing import List, Tuple

from .docmodel import QAPair

_ONSETS = ["b", "d", "f", "g", "k", "l", "m", "n", "p", "r", "s", "t", "v", "z", "br", "dr", "kl", "pr", "st", "tr"]
_VOWELS = ["a", "e", "i", "o", "u", "ai", "ou"]
_CODAS = ["", "n", "r", "s", "x", "l", "m"]

_COMMON = (
    "system process result method study model value design group level part form "
    "change record area source effect order point range sample field"
).split()
_ATTRIBUTES = (
    "origin capacity weight colour founder rating density speed depth height "
    "owner status price width grade yield index period code label"
).split()

_FILLER = [
    "The {a} {n1} {v} the {n2} near the {c}.",
    "Each {n1} {v} a {a} {n2} during the {c}.",
    "Most {n1} reports describe how the {n2} {v} every {a} {c}.",
    "In practice the {n1} and the {n2} {v} together with {a} {c}.",
    "A {a} {n1} often {v} when the {n2} reaches the {c}.",
    "Observers noted that the {n2} {v} the {a} {n1}.",
    "The {c} of the {n1} depends on a {a} {n2}.",
    "Without the {n2}, the {a} {n1} rarely {v}.",
]


@dataclass(frozen=True)
class Topic:
    name: str
    nouns: Tuple[str, ...]
    verbs: Tuple[str, ...]
    adjectives: Tuple[str, ...]


def _pseudo_words(rng: random.Random, count: int, used: set) -> List[str]:
    out = []
    while len(out) < count:
        word = "".join(rng.choice(_ONSETS) + rng.choice(_VOWELS) + rng.choice(_CODAS) for _ in range(rng.choice((2, 3))))
        if word not in used:
            used.add(word)
            out.append(word)
    return out


def _topic(rng: random.Random, used: set) -> Topic:
    words = _pseudo_words(rng, 1 + 12 + 6 + 6, used)
    return Topic(words[0], tuple(words[1:13]), tuple(w + "s" for w in words[13:19]), tuple(words[19:25]))


def _filler(rng: random.Random, topic: Topic) -> str:
    n1, n2 = rng.sample(topic.nouns, 2)
    text = rng.choice(_FILLER).format(
        a=rng.choice(topic.adjectives), n1=n1, n2=n2, v=rng.choice(topic.verbs), c=rng.choice(_COMMON)
    )
    return text[0].upper() + text[1:]


def generate_corpus(
    seed: int = 0,
    num_docs: int = 2,
    topics_per_doc: int = 5,
    sentences_per_topic: Tuple[int, int] = (40, 50),
    facts_per_topic: int = 3,
    num_qa: int = 20,
) -> Tuple[List[dict], List[QAPair]]:
    """Return (corpus records, QA pairs) for the given seed."""
    rng = random.Random(seed)
    used: set = set()
    docs, facts = [], []
    for d in range(num_docs):
        doc_id = f"synth-{seed}-{d}"
        paragraphs = []
        for _ in range(topics_per_doc):
            topic = _topic(rng, used)
            n = rng.randint(*sentences_per_topic)
            sentences = [_filler(rng, topic) for _ in range(n)]
            attrs = rng.sample(_ATTRIBUTES, facts_per_topic)
            things = rng.sample(topic.nouns, facts_per_topic)
            for attr, thing in zip(attrs, things):
                value = f"{_pseudo_words(rng, 1, used)[0]} {rng.randint(10, 9999)}"
                pos = rng.randrange(1, n)
                sentences.insert(pos, f"The {attr} of the {topic.name} {thing} is {value}.")
                facts.append(QAPair(f"What is the {attr} of the {topic.name} {thing}?", value, doc_id))
            k = 0
            while k < len(sentences):
                size = rng.randint(3, 7)
                paragraphs.append(" ".join(sentences[k : k + size]))
                k += size
        docs.append({"doc_id": doc_id, "text": "\n\n".join(paragraphs)})
    rng.shuffle(facts)
    return docs, facts[:num_qa]
