"""Parse provider completions into typed extraction records.

Every malformed input maps onto ``ExtractionParseError`` (not a JSON
document) or ``SchemaError`` (a document with the wrong shape).
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field

from ..errors import ArgumentError, ExtractionParseError, SchemaError

ENTITY_TYPES = ("person", "concept", "task", "event", "item", "location", "organization", "other")
EVENT_TYPES = ("action", "experience", "state_change", "plan", "routine", "social", "achievement", "other")
IMPORTANCE = ("high", "medium", "low")
WHEN_FIELDS = ("absolute", "relative", "duration", "recurrence")

_NULLISH = {"", "null", "none", "n/a", "na", "unknown", "-"}


@dataclass
class RelationRecord:
    target: str
    relation: str


@dataclass
class StatusChange:
    attribute: str
    old: str | None
    new: str


@dataclass
class EntityRecord:
    source_id: int
    entity_name: str
    entity_type: str = "other"
    attributes: dict[str, str] = field(default_factory=dict)
    relations: list[RelationRecord] = field(default_factory=list)
    status_changes: list[StatusChange] = field(default_factory=list)


@dataclass
class EventRecord:
    source_id: int
    description: str = ""
    who: list[str] = field(default_factory=list)
    what: str = ""
    when: dict[str, str | None] = field(default_factory=lambda: dict.fromkeys(WHEN_FIELDS))
    where: str | None = None
    outcome: str | None = None
    event_type: str = "other"
    importance: str = "medium"


@dataclass
class TopicRecord:
    topic_id: str
    label: str
    keywords: list[str] = field(default_factory=list)
    utterance_indices: list[int] = field(default_factory=list)


@dataclass
class EntityExtraction:
    entities: list[EntityRecord] = field(default_factory=list)


@dataclass
class EventExtraction:
    events: list[EventRecord] = field(default_factory=list)


@dataclass
class TopicExtraction:
    topics: list[TopicRecord] = field(default_factory=list)


@dataclass
class TripleExtraction:
    entities: EntityExtraction
    events: EventExtraction
    topics: TopicExtraction


def strip_fence(raw: str) -> str:
    """Remove a surrounding Markdown code fence, if there is one."""
    text = raw.strip()
    if not text.startswith("```"):
        return text
    lines = text.splitlines()
    lines = lines[1:]
    if lines and lines[-1].strip().startswith("```"):
        lines = lines[:-1]
    return "\n".join(lines).strip()


def clean_optional(value):
    if value is None:
        return None
    if isinstance(value, (int, float)) and not isinstance(value, bool):
        value = str(value)
    if not isinstance(value, str):
        return None
    value = value.strip()
    return None if value.lower() in _NULLISH else value


def _as_int(value, where):
    if isinstance(value, bool):
        raise SchemaError(f"{where}: expected an integer, got {value!r}")
    if isinstance(value, int):
        return value
    if isinstance(value, float) and value.is_integer():
        return int(value)
    if isinstance(value, str) and value.strip().lstrip("-").isdigit():
        return int(value.strip())
    raise SchemaError(f"{where}: expected an integer, got {value!r}")


def _as_list(value, where):
    if value is None:
        return []
    if not isinstance(value, list):
        raise SchemaError(f"{where}: expected a list")
    return value


def _obj(value, where):
    if not isinstance(value, dict):
        raise SchemaError(f"{where}: expected an object")
    return value


def _entity(item, i):
    where = f"entities[{i}]"
    item = _obj(item, where)
    if "source_id" not in item:
        raise SchemaError(f"{where}: missing 'source_id'")
    name = clean_optional(item.get("entity_name"))
    if not name:
        raise SchemaError(f"{where}: missing 'entity_name'")
    etype = str(item.get("entity_type") or "other").strip().lower()
    if etype not in ENTITY_TYPES:
        etype = "other"
    attrs = {}
    raw_attrs = item.get("attributes") or {}
    if not isinstance(raw_attrs, dict):
        raise SchemaError(f"{where}.attributes: expected an object")
    for key, val in raw_attrs.items():
        if isinstance(val, list):
            val = ", ".join(str(v) for v in val)
        val = clean_optional(val)
        if val is not None and str(key).strip():
            attrs[str(key).strip()] = val
    rels = []
    for j, rel in enumerate(_as_list(item.get("relations"), f"{where}.relations")):
        rel = _obj(rel, f"{where}.relations[{j}]")
        target = clean_optional(rel.get("target"))
        rtype = clean_optional(rel.get("relation"))
        if target and rtype:
            rels.append(RelationRecord(target, rtype))
    changes = []
    for j, ch in enumerate(_as_list(item.get("status_changes"), f"{where}.status_changes")):
        ch = _obj(ch, f"{where}.status_changes[{j}]")
        attr = clean_optional(ch.get("attribute"))
        new = clean_optional(ch.get("to"))
        if attr and new:
            changes.append(StatusChange(attr, clean_optional(ch.get("from")), new))
    return EntityRecord(_as_int(item["source_id"], f"{where}.source_id"), name, etype, attrs, rels, changes)


def _when(value, where):
    when = dict.fromkeys(WHEN_FIELDS)
    if value is None:
        return when
    if isinstance(value, str):
        when["relative"] = clean_optional(value)
        return when
    value = _obj(value, where)
    for key in WHEN_FIELDS:
        when[key] = clean_optional(value.get(key))
    return when


def _event(item, i):
    where = f"events[{i}]"
    item = _obj(item, where)
    if "source_id" not in item:
        raise SchemaError(f"{where}: missing 'source_id'")
    who_raw = item.get("who")
    if isinstance(who_raw, str):
        who_raw = [who_raw]
    who = []
    for name in _as_list(who_raw, f"{where}.who"):
        name = clean_optional(name)
        if name and name not in who:
            who.append(name)
    etype = str(item.get("event_type") or "other").strip().lower().replace(" ", "_")
    if etype not in EVENT_TYPES:
        etype = "other"
    importance = str(item.get("importance") or "medium").strip().lower()
    if importance not in IMPORTANCE:
        importance = "medium"
    rec = EventRecord(
        source_id=_as_int(item["source_id"], f"{where}.source_id"),
        description=clean_optional(item.get("description")) or "",
        who=who,
        what=clean_optional(item.get("what")) or "",
        when=_when(item.get("when"), f"{where}.when"),
        where=clean_optional(item.get("where")),
        outcome=clean_optional(item.get("outcome")),
        event_type=etype,
        importance=importance,
    )
    if not rec.who and not rec.description:
        raise SchemaError(f"{where}: needs 'who' or 'description'")
    return rec


def _topic(item, i):
    where = f"topics[{i}]"
    item = _obj(item, where)
    label = clean_optional(item.get("topic_label")) or ""
    if not label:
        raise SchemaError(f"{where}: missing 'topic_label'")
    kws = []
    for kw in _as_list(item.get("topic_keywords"), f"{where}.topic_keywords"):
        kw = clean_optional(kw)
        if kw and kw.lower() not in kws:
            kws.append(kw.lower())
    idx = [_as_int(v, f"{where}.utterance_indices") for v in _as_list(item.get("utterance_indices"), f"{where}.utterance_indices")]
    tid = item.get("topic_id", i)
    return TopicRecord(str(tid), label, kws, idx)


_REQUIRED = {
    "entity": ("entities",),
    "event": ("events",),
    "topic_id": ("topics",),
    "triple": ("entities", "events", "topics"),
    "topic_summary": ("narrative",),
    "profile_summary": ("summary",),
}


def load_document(raw: str):
    text = strip_fence(raw or "")
    try:
        doc = json.loads(text)
    except (json.JSONDecodeError, TypeError) as exc:
        raise ExtractionParseError(f"completion is not valid JSON: {exc}", raw) from exc
    if not isinstance(doc, dict):
        raise ExtractionParseError("completion must be a JSON object", raw)
    return doc


def parse_extraction(raw: str, mode_tag: str):
    """Parse a completion produced for ``mode_tag`` into its typed payload."""
    if mode_tag not in _REQUIRED:
        raise ArgumentError(f"unknown mode tag {mode_tag!r}")
    doc = load_document(raw)
    for key in _REQUIRED[mode_tag]:
        if key not in doc:
            raise SchemaError(f"{mode_tag} document is missing required key {key!r}")

    def entities():
        return EntityExtraction([_entity(e, i) for i, e in enumerate(_as_list(doc["entities"], "entities"))])

    def events():
        return EventExtraction([_event(e, i) for i, e in enumerate(_as_list(doc["events"], "events"))])

    def topics():
        return TopicExtraction([_topic(t, i) for i, t in enumerate(_as_list(doc["topics"], "topics"))])

    if mode_tag == "entity":
        return entities()
    if mode_tag == "event":
        return events()
    if mode_tag == "topic_id":
        return topics()
    if mode_tag == "triple":
        return TripleExtraction(entities(), events(), topics())
    if mode_tag == "profile_summary":
        summary = clean_optional(doc["summary"])
        if not summary:
            raise SchemaError("profile_summary document has an empty 'summary'")
        return summary
    return _topic_summary(doc)


def _str_list(value, where):
    out = []
    for v in _as_list(value, where):
        v = clean_optional(v)
        if v:
            out.append(v)
    return out


def _topic_summary(doc):
    narrative = clean_optional(doc.get("narrative"))
    if not narrative:
        raise SchemaError("topic_summary document has an empty 'narrative'")
    facts = _str_list(doc.get("key_facts"), "key_facts")
    if not facts:
        raise SchemaError("topic_summary document needs at least one key fact")
    importance = str(doc.get("importance") or "medium").strip().lower()
    return {
        "narrative": narrative,
        "key_facts": facts,
        "participants": _str_list(doc.get("participants"), "participants"),
        "temporal_span": clean_optional(doc.get("temporal_span")) or "",
        "sentiment": clean_optional(doc.get("sentiment")) or "neutral",
        "importance": importance if importance in IMPORTANCE else "medium",
        "extra_keywords": _str_list(doc.get("keywords"), "keywords"),
    }
