import math
import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import oracles
from memanchor.backend.embedding import EmbeddingVector
from memanchor.errors import ArgumentError, StateError
from memanchor.events import EventTuple, WhenSpec
from memanchor.kb import AnchorKB
from memanchor.retrieval import (
    AnchorSelection,
    RetrievalConfig,
    compact_text,
    rerank,
    select_anchors,
    select_events_with_preservation,
    similarities,
)


class Item:
    def __init__(self, topic_id):
        self.topic_id = topic_id


def table_embed(table):
    def embed(text):
        if text not in table:
            return EmbeddingVector(2, (1.0, 0.0))
        s = table[text]
        return EmbeddingVector(2, (s, math.sqrt(1 - s * s)))
    return embed


def test_identical_text_scores_one_and_ranks_first():
    cands = [(Item("a"), "pottery class with Dana"), (Item("b"), "Caroline MedLLM")]
    out = rerank(cands, "Caroline MedLLM", 5, 0.25)
    assert out[0].anchor.topic_id == "b"
    assert out[0].similarity == pytest.approx(1.0, abs=1e-12)


def test_sigma_excludes_even_when_k_unfilled():
    table = {"x": 0.10, "y": 0.5}
    out = rerank([(Item("x"), "x"), (Item("y"), "y")], "q", 5, 0.25, table_embed(table))
    assert [s.anchor.topic_id for s in out] == ["y"]


def test_seven_candidates_keep_five_largest():
    sims = [0.3, 0.9, 0.5, 0.7, 0.4, 0.8, 0.6]
    table = {f"t{i}": s for i, s in enumerate(sims)}
    out = rerank([(Item(f"i{i}"), f"t{i}") for i in range(7)], "q", 5, 0.0, table_embed(table))
    assert [s.similarity for s in out] == sorted(sims, reverse=True)[:5]


def test_similarities_match_naive_cosine():
    texts = ["Caroline presented MedLLM", "Melanie pottery class", "camping at Pine Lake with Leo"]
    got = similarities([(None, t) for t in texts], "Caroline MedLLM camping")
    for g, t in zip(got, texts):
        assert g == pytest.approx(oracles.naive_cosine(t, "Caroline MedLLM camping"), abs=1e-12)
    assert similarities([(None, "!!!")], "Caroline") == [0.0]


@settings(max_examples=100, deadline=None)
@given(st.lists(st.tuples(st.integers(0, 999), st.integers(-8, 8)), max_size=100, unique_by=lambda p: p[0]),
       st.integers(0, 10), st.integers(0, 8))
def test_rerank_equals_oracle(pairs, k, sigma8):
    table = {f"t{i}": s / 8 for i, s in pairs}
    got = rerank([(Item(f"{i:03d}"), f"t{i}") for i, _ in pairs], "q", k, sigma8 / 8, table_embed(table))
    want = oracles.sort_then_truncate([(f"{i:03d}", s / 8) for i, s in pairs], k, sigma8 / 8)
    assert [(s.anchor.topic_id, s.similarity) for s in got] == want


def test_config_validation():
    with pytest.raises(ArgumentError):
        RetrievalConfig(sigma=1.5)
    with pytest.raises(ArgumentError):
        RetrievalConfig(k_event=1, temporal_reserved=2)
    with pytest.raises(ArgumentError):
        RetrievalConfig(k_entity=-1)
    assert RetrievalConfig.uniform(1).temporal_reserved == 1


def event(i, **when):
    return EventTuple(f"ev_{i}", ["Caroline"], f"thing {i}", WhenSpec(**when), description=f"event {i}",
                      source_seq_id=i, recorded_at="2023-05-08T18:00:00")


def test_recent_event_below_sigma_still_selected():
    evs = [event(0, relative="recently")] + [event(i) for i in range(1, 8)]
    table = {compact_text(e): (0.05 if e.event_id == "ev_0" else 0.9) for e in evs}
    out = select_events_with_preservation(evs, "what has Caroline done recently", RetrievalConfig(), table_embed(table))
    assert out[0].anchor.event_id == "ev_0" and out[0].temporal_reserved
    assert len(out) == 5


def test_no_temporal_expression_equals_rerank():
    evs = [event(i, absolute="2023-05-08") for i in range(8)]
    rng = random.Random(1)
    table = {compact_text(e): rng.random() for e in evs}
    embed = table_embed(table)
    a = select_events_with_preservation(evs, "what did Caroline do", RetrievalConfig(), embed)
    b = rerank([(e, compact_text(e)) for e in evs], "what did Caroline do", 5, 0.25, embed)
    assert a == b


def test_four_matches_two_reserved():
    evs = [event(i, absolute="2023-06-20" if i < 4 else "2022-01-01") for i in range(8)]
    sims = [0.1, 0.3, 0.2, 0.05, 0.9, 0.8, 0.7, 0.6]
    table = {compact_text(e): s for e, s in zip(evs, sims)}
    out = select_events_with_preservation(evs, "what happened on June 20, 2023", RetrievalConfig(), table_embed(table))
    assert [(s.anchor.event_id, s.temporal_reserved) for s in out] == [
        ("ev_1", True), ("ev_2", True), ("ev_4", False), ("ev_5", False), ("ev_6", False)]


def test_relative_event_resolved_against_recorded_time():
    ev = event(0, relative="yesterday")
    table = {compact_text(ev): 0.0}
    out = select_events_with_preservation([ev], "what happened on May 7, 2023", RetrievalConfig(), table_embed(table))
    assert [s.anchor.event_id for s in out] == ["ev_0"]


def test_empty_kb_and_zero_k(demo_kb):
    assert select_anchors(AnchorKB({}), "Caroline").is_empty()
    assert select_anchors(demo_kb, "Caroline MedLLM", RetrievalConfig(0, 0, 0, temporal_reserved=0)).is_empty()


def test_unloaded_kb_is_state_error():
    with pytest.raises(StateError):
        select_anchors(AnchorKB({}, loaded=False), "q")
    with pytest.raises(StateError):
        select_anchors(None, "q")


def test_demo_query_ranks_caroline_first(demo_kb):
    sel = select_anchors(demo_kb, "Caroline MedLLM")
    assert sel.entities[0].anchor.canonical_name == "Caroline"
    brute = sorted(((oracles.naive_cosine(compact_text(p), "Caroline MedLLM"), p.canonical_name)
                    for p in demo_kb.entities.profiles.values()), key=lambda t: (-t[0], t[1]))
    assert brute[0][1] == "Caroline"


def test_selection_is_pure(demo_kb):
    a = select_anchors(demo_kb, "When did Caroline go camping?")
    b = select_anchors(demo_kb, "When did Caroline go camping?")
    assert a.to_dict() == b.to_dict()
    assert isinstance(a, AnchorSelection)
