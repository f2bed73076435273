"""Dynamic entity profiles: incremental merging and offline consolidation."""
from __future__ import annotations

import logging
from collections import defaultdict
from dataclasses import dataclass, field

from .errors import ProviderError, SchemaError, StateError
from .text import content_word_set
from .timeutil import chrono_sort

log = logging.getLogger(__name__)

OBS_CONFIDENCE = 0.6
STATUS_CHANGE_CONFIDENCE = 0.8
COOCCUR_THRESHOLD = 3
INFERRED_RELATION = "associated_with"


@dataclass
class AttributeValue:
    value: str
    confidence: float
    evidence_seq_ids: list[int] = field(default_factory=list)


@dataclass
class ArchivedAttribute:
    key: str
    old_value: str
    superseded_at_seq: int
    old_confidence: float


@dataclass
class Relation:
    source: str
    target: str
    relation_type: str
    inferred: bool = False

    def key(self):
        return (self.source.casefold(), self.target.casefold(), self.relation_type.casefold())


@dataclass
class TimelineEntry:
    description: str
    timestamp: str
    seq_id: int
    kind: str = "status_change"


@dataclass
class EntityProfile:
    canonical_name: str
    entity_type: str = "other"
    attributes: dict[str, AttributeValue] = field(default_factory=dict)
    attribute_history: list[ArchivedAttribute] = field(default_factory=list)
    # observations that lost a confidence comparison and were never held
    attribute_candidates: list[ArchivedAttribute] = field(default_factory=list)
    relations: list[Relation] = field(default_factory=list)
    timeline: list[TimelineEntry] = field(default_factory=list)
    co_occurrences: dict[str, int] = field(default_factory=dict)
    summary: str = ""

    def sorted_attributes(self):
        """(key, AttributeValue) pairs by descending confidence, then key."""
        return sorted(self.attributes.items(), key=lambda kv: (-kv[1].confidence, kv[0]))

    def to_dict(self):
        return {
            "canonical_name": self.canonical_name,
            "entity_type": self.entity_type,
            "attributes": {
                k: {"value": v.value, "confidence": v.confidence, "evidence_seq_ids": list(v.evidence_seq_ids)}
                for k, v in self.attributes.items()
            },
            "attribute_history": [vars(a).copy() for a in self.attribute_history],
            "attribute_candidates": [vars(a).copy() for a in self.attribute_candidates],
            "relations": [vars(r).copy() for r in self.relations],
            "timeline": [vars(t).copy() for t in self.timeline],
            "co_occurrences": dict(self.co_occurrences),
            "summary": self.summary,
        }

    @classmethod
    def from_dict(cls, d):
        return cls(
            canonical_name=d["canonical_name"],
            entity_type=d.get("entity_type", "other"),
            attributes={
                k: AttributeValue(v["value"], float(v["confidence"]), [int(s) for s in v["evidence_seq_ids"]])
                for k, v in d.get("attributes", {}).items()
            },
            attribute_history=[ArchivedAttribute(**a) for a in d.get("attribute_history", [])],
            attribute_candidates=[ArchivedAttribute(**a) for a in d.get("attribute_candidates", [])],
            relations=[Relation(**r) for r in d.get("relations", [])],
            timeline=[TimelineEntry(**t) for t in d.get("timeline", [])],
            co_occurrences={k: int(v) for k, v in d.get("co_occurrences", {}).items()},
            summary=d.get("summary", ""),
        )


def accumulate_confidence(existing: AttributeValue, repeat_evidence: int, c_obs: float = OBS_CONFIDENCE) -> AttributeValue:
    """Noisy-or update for a repeated observation of the same value."""
    conf = 1.0 - (1.0 - existing.confidence) * (1.0 - c_obs)
    evidence = list(existing.evidence_seq_ids)
    if repeat_evidence not in evidence:
        evidence.append(repeat_evidence)
    return AttributeValue(existing.value, conf, evidence)


def _same_value(a: str, b: str) -> bool:
    return " ".join(a.casefold().split()) == " ".join(b.casefold().split())


@dataclass
class EntityStore:
    profiles: dict[str, EntityProfile] = field(default_factory=dict)
    consolidated: bool = False
    warnings: list[str] = field(default_factory=list, compare=False)

    def get(self, name: str) -> EntityProfile | None:
        return self.profiles.get(name.casefold())

    def resolve(self, name: str) -> str:
        prof = self.get(name)
        return prof.canonical_name if prof else name

    def sorted_profiles(self) -> list[EntityProfile]:
        return [self.profiles[k] for k in sorted(self.profiles)]

    def _profile(self, name: str, entity_type: str) -> EntityProfile:
        key = name.casefold()
        prof = self.profiles.get(key)
        if prof is None:
            prof = self.profiles[key] = EntityProfile(name, entity_type)
        elif prof.entity_type == "other" and entity_type != "other":
            prof.entity_type = entity_type
        return prof

    def to_dict(self):
        return {
            "consolidated": self.consolidated,
            "profiles": [p.to_dict() for p in self.sorted_profiles()],
        }

    @classmethod
    def from_dict(cls, d):
        store = cls(consolidated=bool(d.get("consolidated", False)))
        for p in d.get("profiles", []):
            prof = EntityProfile.from_dict(p)
            store.profiles[prof.canonical_name.casefold()] = prof
        return store


def _observe(prof: EntityProfile, key: str, value: str, c_obs: float, seq: int):
    current = prof.attributes.get(key)
    if current is None:
        prof.attributes[key] = AttributeValue(value, c_obs, [seq])
    elif _same_value(current.value, value):
        prof.attributes[key] = accumulate_confidence(current, seq, c_obs)
    elif c_obs > current.confidence:
        prof.attribute_history.append(ArchivedAttribute(key, current.value, seq, current.confidence))
        prof.attributes[key] = AttributeValue(value, c_obs, [seq])
    else:
        prof.attribute_candidates.append(ArchivedAttribute(key, value, seq, c_obs))


def merge_extraction(store: EntityStore, extraction, batch) -> EntityStore:
    """Fold one batch's entity extraction into the store.

    Records are applied in ``source_id`` order, so splitting a sequence of
    batches into calls differently yields the same profiles.
    """
    if store.consolidated:
        raise StateError("cannot merge into a consolidated entity store")
    by_seq = batch.by_seq()
    records = sorted(extraction.entities, key=lambda r: r.source_id)
    for rec in records:
        if rec.source_id not in by_seq:
            raise SchemaError(
                f"entity {rec.entity_name!r} cites source_id {rec.source_id} outside batch "
                f"{batch.start_seq}-{batch.end_seq}"
            )

    per_utterance = defaultdict(list)
    for rec in records:
        utt = by_seq[rec.source_id]
        prof = store._profile(store.resolve(rec.entity_name), rec.entity_type)
        name = prof.canonical_name
        if name not in per_utterance[rec.source_id]:
            per_utterance[rec.source_id].append(name)

        observations = {k: (v, OBS_CONFIDENCE) for k, v in rec.attributes.items()}
        for ch in rec.status_changes:
            observations[ch.attribute] = (ch.new, STATUS_CHANGE_CONFIDENCE)
            before = ch.old if ch.old is not None else "(unset)"
            prof.timeline.append(TimelineEntry(f"{ch.attribute}: {before} -> {ch.new}", utt.timestamp, rec.source_id))
        for key, (value, c_obs) in observations.items():
            _observe(prof, key, value, c_obs, rec.source_id)

        for rel in rec.relations:
            target = store.resolve(rel.target)
            if target.casefold() != name.casefold():
                prof.relations.append(Relation(name, target, rel.relation))

        prof.timeline = chrono_sort(prof.timeline, lambda t: t.timestamp, lambda t: t.seq_id)

    for seq in sorted(per_utterance):
        names = per_utterance[seq]
        for i, a in enumerate(names):
            for b in names[i + 1:]:
                pa, pb = store.get(a), store.get(b)
                pa.co_occurrences[pb.canonical_name] = pa.co_occurrences.get(pb.canonical_name, 0) + 1
                pb.co_occurrences[pa.canonical_name] = pb.co_occurrences.get(pa.canonical_name, 0) + 1
    return store


def attach_event_mentions(store: EntityStore, events) -> EntityStore:
    """Add an event_mention timeline entry to every profile named in an event's participants."""
    for ev in events:
        for name in ev.who:
            prof = store.get(name)
            if prof is None:
                continue
            desc = ev.description or ev.what
            if any(t.kind == "event_mention" and t.seq_id == ev.source_seq_id and t.description == desc
                   for t in prof.timeline):
                continue
            prof.timeline.append(TimelineEntry(desc, ev.recorded_at, ev.source_seq_id, "event_mention"))
    for prof in store.profiles.values():
        prof.timeline = chrono_sort(prof.timeline, lambda t: t.timestamp, lambda t: t.seq_id)
    return store


def template_summary(prof: EntityProfile) -> str:
    parts = [f"{k}={v.value}" for k, v in prof.sorted_attributes()]
    rels = [f"{r.relation_type} {r.target}" for r in prof.relations]
    if rels:
        parts.append("relations: " + ", ".join(rels))
    head = f"{prof.canonical_name} ({prof.entity_type})"
    return head + (": " + "; ".join(parts) if parts else "")


def _related(store: EntityStore, a: str, b: str) -> bool:
    ka, kb = a.casefold(), b.casefold()
    for prof in (store.get(a), store.get(b)):
        if prof is None:
            continue
        for r in prof.relations:
            pair = {r.source.casefold(), r.target.casefold()}
            if pair == {ka, kb}:
                return True
    return False


def consolidate(store: EntityStore, extractor=None, cooccur_threshold: int = COOCCUR_THRESHOLD) -> EntityStore:
    """Deduplicate relations, infer co-occurrence relations, write summaries.

    Summaries come from the provider unless it declares template summaries
    (the mock) or there is no extractor; provider failures fall back to the
    template and record a warning.
    """
    for prof in store.profiles.values():
        seen = set()
        kept = []
        for r in prof.relations:
            if r.key() not in seen:
                seen.add(r.key())
                kept.append(r)
        prof.relations = kept

    names = sorted(store.profiles)
    for i, ka in enumerate(names):
        pa = store.profiles[ka]
        for kb in names[i + 1:]:
            pb = store.profiles[kb]
            count = pa.co_occurrences.get(pb.canonical_name, 0)
            if count >= cooccur_threshold and not _related(store, pa.canonical_name, pb.canonical_name):
                pa.relations.append(Relation(pa.canonical_name, pb.canonical_name, INFERRED_RELATION, inferred=True))

    use_provider = extractor is not None and not getattr(extractor.provider, "template_summaries", True)
    for key in names:
        prof = store.profiles[key]
        summary = template_summary(prof)
        if use_provider:
            from .backend.prompts import render_prompt

            prof.summary = ""
            try:
                summary = extractor.run(render_prompt("profile_summary", prof), "profile_summary")
            except (ProviderError, SchemaError) as exc:
                msg = f"profile summary for {prof.canonical_name!r} fell back to template: {exc}"
                log.warning(msg)
                store.warnings.append(msg)
        prof.summary = summary
    store.consolidated = True
    return store


def profile_tokens(prof: EntityProfile) -> set[str]:
    words = content_word_set(prof.canonical_name)
    for v in prof.attributes.values():
        words |= content_word_set(v.value)
    words |= content_word_set(prof.summary)
    return words


def native_match_entities(store: EntityStore, query: str, cap: int):
    """Profiles sharing content words with the query, best overlap first."""
    q = content_word_set(query)
    scored = []
    for prof in store.profiles.values():
        score = len(q & profile_tokens(prof))
        if score > 0:
            scored.append((prof, score))
    scored.sort(key=lambda ps: (-ps[1], ps[0].canonical_name))
    return scored[:max(cap, 0)]
