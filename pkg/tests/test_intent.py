import httpx
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import VOCAB, TableEmbedder, make_doc
from idc.apiclient import JSONClient, replay_transport
from idc.docmodel import Document
from idc.embedding import HashingEmbedder, cosine
from idc.intent import (
    FileGenerator,
    IntentGenerationError,
    IntentPlan,
    LLMGenerator,
    StubGenerator,
    dedup_intents,
    generate_intents,
    normalize_question,
    plan_intent_count,
    predict_intents,
)

FIXTURES = __import__("pathlib").Path(__file__).parent / "fixtures"


class TestPlan:
    def test_short(self):
        plan = plan_intent_count(50)
        assert plan.target_count == 12 and not plan.sectionwise

    def test_long_is_sectionwise(self):
        plan = plan_intent_count(495)
        assert plan.target_count == 38 and plan.sectionwise
        assert sum(c for _, c in plan.per_section) == 38

    def test_interpolated(self):
        # 12 + (250 - 100) / 300 * 26 = 25
        assert plan_intent_count(250).target_count == 25

    @pytest.mark.parametrize("n,expected", [(99, 12), (100, 12), (400, 38), (401, 38), (149, 16)])
    def test_band_edges(self, n, expected):
        assert plan_intent_count(n).target_count == expected

    def test_sections_partition_and_follow_paragraphs(self):
        paragraphs = list(range(0, 495, 7))
        plan = plan_intent_count(495, paragraphs)
        ranges = [r for r, _ in plan.per_section]
        assert ranges[0][0] == 0 and ranges[-1][1] == 494
        assert all(b[0] == a[1] + 1 for a, b in zip(ranges, ranges[1:]))
        assert all(r[0] in paragraphs for r in ranges)
        assert all(40 <= r[1] - r[0] + 1 <= 120 for r in ranges)

    def test_sectionwise_threshold(self):
        assert not plan_intent_count(149).sectionwise
        assert plan_intent_count(150).sectionwise

    def test_monotone(self):
        counts = [plan_intent_count(n).target_count for n in range(1, 600)]
        assert all(a <= b for a, b in zip(counts, counts[1:]))

    def test_rejects_zero(self):
        with pytest.raises(ValueError):
            plan_intent_count(0)


PHOTO = Document.from_text(
    "photo",
    "Photosynthesis converts light energy into chemical energy. "
    "Chlorophyll in the leaves absorbs the light energy. "
    "The chemical energy is stored as glucose in the plant.",
)


class TestStub:
    def test_one_question_per_sentence(self, offline):
        qs = generate_intents(StubGenerator(offline), PHOTO, plan_intent_count(len(PHOTO)))
        assert len(qs) == 3
        anchors = sorted(PHOTO.texts.index(q.split(": ", 1)[1][:-1] + ".") for q in qs)
        assert anchors == [0, 1, 2]
        assert all(q.endswith("?") for q in qs)

    def test_most_central_first(self):
        table = {"A first.": [1, 0], "A second.": [0.9, 0.1], "B far.": [0, 1]}
        doc = Document.from_text("t", "A first. A second. B far.")
        qs = StubGenerator(TableEmbedder(table)).generate(doc, (0, 2), 2)
        # A second. has the highest mean cosine to the other two
        assert qs == ["What does the document say about: A second?", "What does the document say about: A first?"]

    def test_empty_document(self, offline):
        with pytest.raises(ValueError, match="empty document"):
            generate_intents(StubGenerator(offline), Document.from_text("e", ""), IntentPlan(12))

    def test_sectionwise_counts(self, offline):
        rng = np.random.default_rng(0)
        text = " ".join(" ".join(rng.choice(VOCAB, 5)).capitalize() + f" {k}." for k in range(200))
        doc = Document.from_text("long", text)
        plan = plan_intent_count(len(doc))
        qs = generate_intents(StubGenerator(offline), doc, plan)
        assert len(qs) == plan.target_count


class TestLLM:
    def make(self, fixture="chat_replay.json"):
        client = JSONClient("https://api.test/v1", "k", transport=replay_transport(FIXTURES / fixture), sleep=lambda s: None)
        return LLMGenerator(model="m", client=client)

    def test_replay_verbatim(self):
        qs = generate_intents(self.make(), PHOTO, IntentPlan(3))
        assert qs == [
            "How do plants make sugar?",
            "What pigment captures light?",
            "Where does photosynthesis happen?",
        ]

    def test_payload_carries_sampling(self):
        gen = LLMGenerator(model="m", temperature=0.7, top_k=20, client=object())
        payload = gen.build_payload(PHOTO, (0, 1), 5)
        assert payload["temperature"] == 0.7 and payload["top_k"] == 20
        assert "Write 5 questions" in payload["messages"][1]["content"]
        assert PHOTO.texts[2] not in payload["messages"][1]["content"]

    def test_failure_keeps_partial_results(self):
        replies = iter([
            httpx.Response(200, json={"choices": [{"message": {"content": "Q one?\nQ two?"}}]}),
            httpx.Response(400, text="bad"),
        ])
        client = JSONClient("https://api.test/v1", "k", transport=httpx.MockTransport(lambda r: next(replies)))
        plan = IntentPlan(4, (((0, 1), 2), ((2, 2), 2)))
        with pytest.raises(IntentGenerationError) as info:
            generate_intents(LLMGenerator(client=client), PHOTO, plan)
        assert info.value.section == 1
        assert info.value.partial == ["Q one?", "Q two?"]


def test_file_generator(tmp_path, offline):
    path = tmp_path / "q.jsonl"
    path.write_text('{"doc_id": "photo", "question": "What is chlorophyll?"}\n{"doc_id": "x", "question": "Other?"}\n')
    gen = FileGenerator(path)
    assert generate_intents(gen, PHOTO, plan_intent_count(3)) == ["What is chlorophyll?"]
    intents = predict_intents(PHOTO, gen, offline)
    assert intents.source == "file" and intents.questions == ("What is chlorophyll?",)
    with pytest.raises(IntentGenerationError):
        generate_intents(gen, make_doc(3, doc_id="missing"), IntentPlan(3))


@pytest.mark.parametrize(
    "line,expected",
    [("1. What is X?", "What is X?"), ("- what is y", "what is y?"), ("  (2) Why.  ", "Why?"), ("   ", "")],
)
def test_normalize_question(line, expected):
    assert normalize_question(line) == expected


def three_question_table():
    # cos(A, A') = 0.9, cos(A, B) = cos(A', B) = 0.1
    a = np.array([1.0, 0.0, 0.0])
    a2 = np.array([0.9, np.sqrt(1 - 0.81), 0.0])
    y = (0.1 - 0.09) / a2[1]
    b = np.array([0.1, y, np.sqrt(1 - 0.01 - y * y)])
    return {"A": a, "A'": a2, "B": b}


class TestDedup:
    def test_identical(self, offline):
        assert dedup_intents(["Same?", "Same?"], offline).questions == ("Same?",)

    def test_orthogonal(self):
        emb = TableEmbedder({"X?": [1, 0], "Y?": [0, 1]})
        assert dedup_intents(["X?", "Y?"], emb).questions == ("X?", "Y?")

    def test_synthetic_three(self):
        table = three_question_table()
        assert cosine(table["A"], table["A'"]) == pytest.approx(0.9, abs=1e-12)
        assert cosine(table["A"], table["B"]) == pytest.approx(0.1, abs=1e-12)
        assert cosine(table["A'"], table["B"]) == pytest.approx(0.1, abs=1e-12)
        kept = dedup_intents(["A", "A'", "B"], TableEmbedder(table))
        assert kept.questions == ("A", "B")
        assert len(kept.embeddings) == 2

    def test_threshold_is_inclusive(self):
        emb = TableEmbedder({"P": [1, 0], "Q": [0.85, np.sqrt(1 - 0.85**2)]})
        assert len(dedup_intents(["P", "Q"], emb, threshold=0.85)) == 2

    def test_requires_questions(self, offline):
        with pytest.raises(ValueError):
            dedup_intents([], offline)

    def test_greedy_count_not_monotone_in_threshold(self):
        # A kept first; B is close to A; C and D are close to B but not to A.
        a = np.array([1.0, 0.0, 0.0, 0.0])
        b = np.array([0.8, 0.6, 0.0, 0.0])
        c3 = np.sqrt(1 - 0.25 - 0.7667**2)
        c = np.array([0.5, 0.7667, c3, 0.0])
        d = np.array([0.5, 0.7667, -c3, 0.0])
        emb = TableEmbedder({"A": a, "B": b, "C": c, "D": d})
        assert cosine(b, c) > 0.85 and cosine(b, d) > 0.85 and cosine(c, d) < 0.75
        assert dedup_intents(list("ABCD"), emb, 0.85).questions == ("A", "B")
        assert dedup_intents(list("ABCD"), emb, 0.75).questions == ("A", "C", "D")

    @settings(max_examples=50)
    @given(st.lists(st.lists(st.sampled_from(VOCAB[:8]), min_size=1, max_size=4), min_size=1, max_size=12),
           st.floats(0.3, 0.99))
    def test_idempotent_and_separated(self, word_lists, threshold):
        emb = HashingEmbedder(16)
        qs = [" ".join(w) + "?" for w in word_lists]
        once = dedup_intents(qs, emb, threshold)
        assert dedup_intents(list(once.questions), emb, threshold).questions == once.questions
        unit = once.embeddings
        sims = unit @ unit.T
        assert np.all(sims[~np.eye(len(unit), dtype=bool)] <= threshold + 1e-12)
        # extremes: nothing above 1 is a duplicate, and -1.01 keeps only the first
        assert len(dedup_intents(qs, emb, 1.01)) == len(qs)
        assert len(dedup_intents(qs, emb, -1.01)) == 1
