"""Event tuples (who, what, when, where, outcome), deduplication and traces."""
from __future__ import annotations

import hashlib
from dataclasses import dataclass, field

from .backend.parsing import EVENT_TYPES, IMPORTANCE, WHEN_FIELDS
from .errors import ArgumentError, SchemaError
from .temporal import absolute_interval, normalize_field, resolve_relative
from .text import content_word_set, content_words, jaccard, squash, tokens
from .timeutil import chrono_sort, parse_date

DEDUP_TAU = 0.6


@dataclass
class WhenSpec:
    absolute: str | None = None
    relative: str | None = None
    duration: str | None = None
    recurrence: str | None = None

    def fields(self):
        return {k: getattr(self, k) for k in WHEN_FIELDS}

    def is_empty(self):
        return not any(self.fields().values())

    def flattened(self):
        return " ".join(v for v in self.fields().values() if v)


@dataclass
class EventTuple:
    event_id: str
    who: list[str]
    what: str
    when: WhenSpec = field(default_factory=WhenSpec)
    where: str | None = None
    outcome: str | None = None
    description: str = ""
    event_type: str = "other"
    importance: str = "medium"
    source_seq_id: int = 0
    recorded_at: str = ""
    trace_id: str | None = None

    def __post_init__(self):
        if not self.who and not self.description:
            raise ArgumentError("an event needs participants or a description")
        if self.event_type not in EVENT_TYPES:
            raise ArgumentError(f"unknown event_type {self.event_type!r}")

    def to_dict(self):
        d = {k: getattr(self, k) for k in (
            "event_id", "what", "where", "outcome", "description", "event_type",
            "importance", "source_seq_id", "recorded_at", "trace_id")}
        d["who"] = list(self.who)
        d["when"] = self.when.fields()
        return d

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        d["when"] = WhenSpec(**d.get("when", {}))
        d["who"] = list(d.get("who", []))
        return cls(**d)


@dataclass
class TemporalTrace:
    trace_id: str
    title: str
    event_ids: list[str] = field(default_factory=list)
    participants: set[str] = field(default_factory=set)
    keywords: set[str] = field(default_factory=set)

    def to_dict(self):
        return {
            "trace_id": self.trace_id,
            "title": self.title,
            "event_ids": list(self.event_ids),
            "participants": sorted(self.participants),
            "keywords": sorted(self.keywords),
        }

    @classmethod
    def from_dict(cls, d):
        return cls(d["trace_id"], d["title"], list(d["event_ids"]), set(d["participants"]), set(d["keywords"]))


def make_event_id(source_seq_id: int, what: str) -> str:
    return "ev_" + hashlib.sha1(f"{source_seq_id}|{what}".encode("utf-8")).hexdigest()[:12]


def event_from_record(rec, recorded_at: str) -> EventTuple:
    """Build an EventTuple from a parsed extraction record."""
    return EventTuple(
        event_id=make_event_id(rec.source_id, rec.what),
        who=list(rec.who),
        what=rec.what,
        when=WhenSpec(**rec.when),
        where=rec.where,
        outcome=rec.outcome,
        description=rec.description,
        event_type=rec.event_type,
        importance=rec.importance,
        source_seq_id=rec.source_id,
        recorded_at=recorded_at,
    )


def _norm_when(when: WhenSpec):
    if when.absolute:
        norm = normalize_field(when.absolute, "absolute")
        return ("absolute", norm)
    if when.relative:
        return ("relative", squash(when.relative).lower())
    return None


def _when_eq(a: WhenSpec, b: WhenSpec) -> float:
    na, nb = _norm_when(a), _norm_when(b)
    if na is None or nb is None or na[0] != nb[0]:
        return 0.0
    if na[0] == "absolute":
        # compare at day granularity when both sides name a day
        da, db = parse_date(na[1]), parse_date(nb[1])
        if da is not None and db is not None:
            return float(da == db)
    return float(na[1] == nb[1])


def _norm_where(where):
    return squash(where).casefold() if where else None


def _where_eq(a, b) -> float:
    na, nb = _norm_where(a), _norm_where(b)
    if na is None or nb is None:
        return 0.0
    return float(na == nb)


def dedup_score(a: EventTuple, b: EventTuple) -> float:
    """Mean of who-Jaccard, what-word Jaccard, when equality and where equality."""
    who = jaccard({w.casefold() for w in a.who}, {w.casefold() for w in b.who})
    what = jaccard(content_word_set(a.what), content_word_set(b.what))
    return (who + what + _when_eq(a.when, b.when) + _where_eq(a.where, b.where)) / 4


def _richer(old, new):
    if not new:
        return old
    if not old:
        return new
    return new if len(new) > len(old) else old


def merge_fields(into: EventTuple, incoming: EventTuple) -> None:
    """Field-wise merge keeping the more complete value."""
    seen = {w.casefold() for w in into.who}
    for w in incoming.who:
        if w.casefold() not in seen:
            into.who.append(w)
            seen.add(w.casefold())
    into.what = _richer(into.what, incoming.what)
    into.description = _richer(into.description, incoming.description)
    into.where = _richer(into.where, incoming.where)
    into.outcome = _richer(into.outcome, incoming.outcome)
    for key in WHEN_FIELDS:
        setattr(into.when, key, _richer(getattr(into.when, key), getattr(incoming.when, key)))
    if into.event_type == "other":
        into.event_type = incoming.event_type
    if IMPORTANCE.index(incoming.importance) < IMPORTANCE.index(into.importance):
        into.importance = incoming.importance


def resolved_time(ev: EventTuple) -> str:
    """ISO day the event happened at, falling back to its recording time."""
    if ev.when.absolute:
        interval = absolute_interval(normalize_field(ev.when.absolute, "absolute") or "")
        if interval:
            return interval[0].isoformat()
    if ev.when.relative:
        interval = resolve_relative(normalize_field(ev.when.relative, "relative"), ev.recorded_at)
        if interval:
            return interval[0].isoformat()
    day = parse_date(ev.recorded_at)
    return day.isoformat() if day else ev.recorded_at


@dataclass
class EventStore:
    events: list[EventTuple] = field(default_factory=list)
    traces: list[TemporalTrace] = field(default_factory=list)
    # incoming event_id -> stored event_id it was merged into (or itself)
    merge_log: dict[str, str] = field(default_factory=dict, compare=False)

    def get(self, event_id):
        for ev in self.events:
            if ev.event_id == event_id:
                return ev
        return None

    def trace(self, trace_id):
        for tr in self.traces:
            if tr.trace_id == trace_id:
                return tr
        return None

    def sorted_events(self):
        return sorted(self.events, key=lambda e: (e.source_seq_id, e.event_id))

    def to_dict(self):
        return {"events": [e.to_dict() for e in self.sorted_events()]}

    def traces_dict(self):
        return {"traces": [t.to_dict() for t in self.traces]}

    @classmethod
    def from_dicts(cls, events_doc, traces_doc):
        return cls(
            [EventTuple.from_dict(e) for e in events_doc.get("events", [])],
            [TemporalTrace.from_dict(t) for t in traces_doc.get("traces", [])],
        )


def dedup_merge(store: EventStore, incoming: EventTuple, tau: float = DEDUP_TAU) -> EventStore:
    """Merge ``incoming`` into its best match if that match scores above tau."""
    if not 0 < tau <= 1:
        raise ArgumentError(f"tau must be in (0, 1], got {tau!r}")
    best, best_score = None, -1.0
    for ev in store.events:
        score = dedup_score(ev, incoming)
        if score > best_score or (score == best_score and ev.source_seq_id < best.source_seq_id):
            best, best_score = ev, score
    if best is not None and best_score > tau:
        merge_fields(best, incoming)
        store.merge_log[incoming.event_id] = best.event_id
        if best.trace_id:
            tr = store.trace(best.trace_id)
            tr.participants |= set(best.who)
            tr.keywords |= content_word_set(best.what)
            _sort_trace(store, tr)
    else:
        base, n = incoming.event_id, 1
        while store.get(incoming.event_id) is not None:
            # same seq and action phrase but not a duplicate by score
            n += 1
            incoming.event_id = f"{base}_{n}"
        store.events.append(incoming)
        store.merge_log[incoming.event_id] = incoming.event_id
    return store


def _trace_title(ev: EventTuple) -> str:
    head = " ".join(content_words(ev.what)[:2]) or " ".join(content_words(ev.description)[:2])
    who = ev.who[0] if ev.who else "Unknown"
    return f"{who}'s {head} trace"


def _sort_trace(store: EventStore, tr: TemporalTrace):
    members = [store.get(eid) for eid in tr.event_ids]
    members = chrono_sort(members, resolved_time, lambda e: (e.source_seq_id, e.event_id))
    tr.event_ids = [e.event_id for e in members]


def link_to_trace(store: EventStore, ev: EventTuple):
    """Attach ``ev`` to the first overlapping trace or open a new one."""
    if store.get(ev.event_id) is None:
        store.events.append(ev)
    who = set(ev.who)
    words = content_word_set(ev.what)
    target = None
    for tr in store.traces:
        if tr.participants & who or tr.keywords & words:
            target = tr
            break
    if target is None:
        target = TemporalTrace(f"tr_{len(store.traces) + 1:04d}", _trace_title(ev))
        store.traces.append(target)
    if ev.event_id not in target.event_ids:
        target.event_ids.append(ev.event_id)
    target.participants |= who
    target.keywords |= words
    ev.trace_id = target.trace_id
    _sort_trace(store, target)
    return store, target.trace_id


def add_event(store: EventStore, ev: EventTuple, tau: float = DEDUP_TAU) -> EventStore:
    """Deduplicate then, if the event is new, link it into a trace."""
    dedup_merge(store, ev, tau)
    if store.merge_log[ev.event_id] == ev.event_id and ev.trace_id is None:
        link_to_trace(store, ev)
    return store


def merge_event_extraction(store: EventStore, extraction, batch, tau: float = DEDUP_TAU) -> EventStore:
    by_seq = batch.by_seq()
    for rec in sorted(extraction.events, key=lambda r: r.source_id):
        if rec.source_id not in by_seq:
            raise SchemaError(
                f"event cites source_id {rec.source_id} outside batch {batch.start_seq}-{batch.end_seq}"
            )
        add_event(store, event_from_record(rec, by_seq[rec.source_id].timestamp), tau)
    return store


def event_tokens(ev: EventTuple) -> set[str]:
    words = set()
    for name in ev.who:
        words |= set(tokens(name))
    return words | content_word_set(ev.what) | content_word_set(ev.description)


def native_match_events(store: EventStore, query: str, cap: int):
    """Events sharing tokens with the query, best overlap first."""
    q = content_word_set(query)
    scored = []
    for ev in store.events:
        score = len(q & event_tokens(ev))
        if score > 0:
            scored.append((ev, score))
    scored.sort(key=lambda p: (-p[1], p[0].source_seq_id, p[0].event_id))
    return scored[:max(cap, 0)]
