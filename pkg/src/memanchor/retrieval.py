"""Inference step 1: native matching, embedding rerank and temporal slots."""
from __future__ import annotations

import re
from dataclasses import dataclass, field

from .backend.embedding import hashed_embedding
from .entities import native_match_entities, template_summary
from .errors import ArgumentError, StateError
from .events import native_match_events
from .temporal import (
    absolute_interval,
    detect_temporal,
    intervals_intersect,
    normalize_field,
    resolve_relative,
)
from .topics import native_match_topics

DEFAULT_K = 5
DEFAULT_SIGMA = 0.25
DEFAULT_CAP = 50
DEFAULT_RESERVED = 2

_SENTENCE_END = re.compile(r"(?<=[.!?])\s+")


@dataclass(frozen=True)
class RetrievalConfig:
    k_entity: int = DEFAULT_K
    k_event: int = DEFAULT_K
    k_topic: int = DEFAULT_K
    sigma: float = DEFAULT_SIGMA
    candidate_cap: int = DEFAULT_CAP
    temporal_reserved: int = DEFAULT_RESERVED

    def __post_init__(self):
        for name in ("k_entity", "k_event", "k_topic", "candidate_cap", "temporal_reserved"):
            if getattr(self, name) < 0:
                raise ArgumentError(f"{name} must be >= 0")
        if not 0 <= self.sigma <= 1:
            raise ArgumentError(f"sigma must be in [0, 1], got {self.sigma!r}")
        if self.temporal_reserved > self.k_event:
            raise ArgumentError("temporal_reserved cannot exceed k_event")

    @classmethod
    def uniform(cls, k=DEFAULT_K, sigma=DEFAULT_SIGMA, candidate_cap=DEFAULT_CAP, temporal_reserved=None):
        if temporal_reserved is None:
            temporal_reserved = min(DEFAULT_RESERVED, k)
        return cls(k, k, k, sigma, candidate_cap, temporal_reserved)


@dataclass(frozen=True)
class Scored:
    anchor: object
    similarity: float
    temporal_reserved: bool = False


@dataclass
class AnchorSelection:
    entities: list[Scored] = field(default_factory=list)
    events: list[Scored] = field(default_factory=list)
    topics: list[Scored] = field(default_factory=list)

    def is_empty(self):
        return not (self.entities or self.events or self.topics)

    def to_dict(self):
        return {
            "entities": [{"name": s.anchor.canonical_name, "similarity": s.similarity} for s in self.entities],
            "events": [
                {"event_id": s.anchor.event_id, "similarity": s.similarity, "temporal_reserved": s.temporal_reserved}
                for s in self.events
            ],
            "topics": [
                {"topic_id": s.anchor.topic_id, "label": s.anchor.label, "similarity": s.similarity}
                for s in self.topics
            ],
        }


def anchor_id(anchor) -> str:
    for attr in ("canonical_name", "event_id", "topic_id"):
        if hasattr(anchor, attr):
            return getattr(anchor, attr)
    return str(anchor)


def compact_text(anchor) -> str:
    """Short text embedded for reranking."""
    if hasattr(anchor, "canonical_name"):
        return anchor.summary or template_summary(anchor)
    if hasattr(anchor, "event_id"):
        head = anchor.description or " ".join([*anchor.who, anchor.what])
        flat = anchor.when.flattened()
        return f"{head} {flat}".strip()
    parts = [anchor.label]
    if anchor.summary:
        parts.append(_SENTENCE_END.split(anchor.summary.narrative.strip(), maxsplit=1)[0])
    parts.append(" ".join(sorted(anchor.keywords)))
    return " ".join(p for p in parts if p)


def _embed_or_none(embed, text):
    try:
        return embed(text)
    except ArgumentError:
        # texts without a single token have no direction
        return None


def similarities(candidates, query, embed=hashed_embedding):
    qv = _embed_or_none(embed, query)
    out = []
    for anchor, text in candidates:
        tv = _embed_or_none(embed, text)
        out.append(0.0 if qv is None or tv is None else qv.dot(tv))
    return out


def _rank(scored, k, sigma):
    kept = [(a, s) for a, s in scored if s >= sigma]
    kept.sort(key=lambda p: (-p[1], anchor_id(p[0])))
    return [Scored(a, s) for a, s in kept[:max(k, 0)]]


def rerank(candidates, query, k, sigma, embed=hashed_embedding) -> list[Scored]:
    """Drop candidates below sigma, then keep the k most similar (ties by id)."""
    if k < 0:
        raise ArgumentError("k must be >= 0")
    sims = similarities(candidates, query, embed)
    return _rank([(a, s) for (a, _), s in zip(candidates, sims)], k, sigma)


def event_matches(ev, expr) -> bool:
    """True if the event's when spec matches one detected query expression."""
    if expr.kind == "relative":
        return normalize_field(ev.when.relative, "relative") == expr.normalized
    if expr.kind == "recurrence":
        return normalize_field(ev.when.recurrence, "recurrence") == expr.normalized
    query_span = absolute_interval(expr.normalized)
    if query_span is None:
        return False
    if ev.when.absolute:
        span = absolute_interval(normalize_field(ev.when.absolute, "absolute") or "")
        if span and intervals_intersect(span, query_span):
            return True
    if ev.when.relative:
        span = resolve_relative(normalize_field(ev.when.relative, "relative"), ev.recorded_at)
        if span and intervals_intersect(span, query_span):
            return True
    return False


def temporal_matches(events, query) -> list:
    exprs = detect_temporal(query)
    if not exprs:
        return []
    return [ev for ev in events if any(event_matches(ev, e) for e in exprs)]


def select_events_with_preservation(candidates, query, cfg: RetrievalConfig, embed=hashed_embedding) -> list[Scored]:
    """Rerank events, reserving slots for ones whose when matches the query."""
    pairs = [(ev, compact_text(ev)) for ev in candidates]
    sims = similarities(pairs, query, embed)
    scored = list(zip(candidates, sims))
    exprs = detect_temporal(query)
    if not exprs:
        return _rank(scored, cfg.k_event, cfg.sigma)
    matching = [(ev, s) for ev, s in scored if any(event_matches(ev, e) for e in exprs)]
    matching.sort(key=lambda p: (-p[1], p[0].event_id))
    reserved = matching[:min(cfg.temporal_reserved, cfg.k_event)]
    reserved_ids = {ev.event_id for ev, _ in reserved}
    rest = _rank([(ev, s) for ev, s in scored if ev.event_id not in reserved_ids],
                 cfg.k_event - len(reserved), cfg.sigma)
    return [Scored(ev, s, True) for ev, s in reserved] + rest


def select_anchors(kb, query: str, cfg: RetrievalConfig | None = None, embed=hashed_embedding) -> AnchorSelection:
    """Top anchors per module for ``query``; a pure function of kb, query and cfg."""
    cfg = cfg or RetrievalConfig()
    if kb is None or not getattr(kb, "loaded", False):
        raise StateError("knowledge base is not loaded")
    cap = cfg.candidate_cap

    ents = [p for p, _ in native_match_entities(kb.entities, query, cap)]
    topics = [c for c, _ in native_match_topics(kb.topics, query, cap)]
    events = [e for e, _ in native_match_events(kb.events, query, cap)]
    seen = {e.event_id for e in events}
    for ev in temporal_matches(kb.events.sorted_events(), query)[:cap]:
        if ev.event_id not in seen:
            seen.add(ev.event_id)
            events.append(ev)

    return AnchorSelection(
        entities=rerank([(p, compact_text(p)) for p in ents], query, cfg.k_entity, cfg.sigma, embed),
        events=select_events_with_preservation(events, query, cfg, embed),
        topics=rerank([(c, compact_text(c)) for c in topics], query, cfg.k_topic, cfg.sigma, embed),
    )
