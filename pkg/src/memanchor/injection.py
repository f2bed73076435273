"""Inference steps 2 and 3: query expansion, context blocks, prompt assembly."""
from __future__ import annotations

import re
from dataclasses import dataclass, field

from .backend.parsing import WHEN_FIELDS
from .backend.templates import ANSWER_TEMPLATE
from .errors import ArgumentError, SchemaError
from .text import squash

DEFAULT_BUDGET = 9
DEFAULT_REPLACE = 9
MODULE_ORDER = ("topic", "entity", "event")
NONE_AVAILABLE = "None available."
MAX_RELATIONS = 5
MAX_TIMELINE = 5
MAX_FACTS = 5

_PLACEHOLDER = re.compile(r"\{(\w+)\}")
_SECTION = re.compile(r"^===\s*(.+?)\s*===\s*$")


@dataclass
class ExpandedQuerySet:
    queries: list[str] = field(default_factory=list)
    provenance: list[str] = field(default_factory=list)

    def to_dict(self):
        return {"queries": list(self.queries), "provenance": list(self.provenance)}


@dataclass(frozen=True)
class InjectionContext:
    topic_block: str
    entity_block: str
    event_block: str


@dataclass(frozen=True)
class RetrievedEntry:
    text: str
    similarity: float
    source: str = "original"

    def __post_init__(self):
        if not -1 <= self.similarity <= 1:
            raise ArgumentError(f"similarity {self.similarity!r} outside [-1, 1]")
        if self.source not in ("original", "expanded"):
            raise ArgumentError(f"unknown entry source {self.source!r}")


@dataclass
class HostMemories:
    speaker_1_name: str = "Speaker 1"
    speaker_1_memories: str = ""
    speaker_2_name: str = "Speaker 2"
    speaker_2_memories: str = ""


def _unique(items):
    return list(dict.fromkeys(i for i in items if i))


def _first_when(ev):
    for key in WHEN_FIELDS:
        value = getattr(ev.when, key)
        if value:
            return value
    return None


def generate_module_queries(selection):
    """Candidate expansion queries per module as (topic, entity, event) lists."""
    entity_q = []
    for s in selection.entities:
        prof = s.anchor
        entity_q += [f"{prof.canonical_name} {v.value}" for _, v in prof.sorted_attributes()]
        entity_q += [f"{prof.canonical_name} {r.relation_type} {r.target}" for r in prof.relations]
    event_q = []
    for s in selection.events:
        ev = s.anchor
        base = squash(" ".join([*ev.who, ev.what]))
        event_q.append(base)
        when = _first_when(ev)
        if when:
            event_q.append(f"{base} {when}")
    topic_q = []
    for s in selection.topics:
        c = s.anchor
        if c.summary:
            topic_q += list(c.summary.key_facts)
            topic_q += [f"{p} {c.label}" for p in c.summary.participants]
    return _unique(topic_q), _unique(entity_q), _unique(event_q)


def round_robin_merge(topic_q, entity_q, event_q, budget: int = DEFAULT_BUDGET) -> ExpandedQuerySet:
    """Interleave one query per module per round in topic, entity, event order.

    A duplicate of an already chosen query is skipped inside the module's
    turn and does not use up budget.
    """
    if budget < 0:
        raise ArgumentError("budget must be >= 0")
    sources = {"topic": list(topic_q), "entity": list(entity_q), "event": list(event_q)}
    cursor = dict.fromkeys(MODULE_ORDER, 0)
    live = [m for m in MODULE_ORDER if sources[m]]
    out = ExpandedQuerySet()
    chosen = set()
    while live and len(out.queries) < budget:
        for module in list(live):
            if len(out.queries) >= budget:
                break
            items = sources[module]
            while cursor[module] < len(items) and items[cursor[module]] in chosen:
                cursor[module] += 1
            if cursor[module] >= len(items):
                live.remove(module)
                continue
            query = items[cursor[module]]
            cursor[module] += 1
            chosen.add(query)
            out.queries.append(query)
            out.provenance.append(module)
            if cursor[module] >= len(items):
                live.remove(module)
    return out


def merge_retrieval(original, expanded, replace_count: int = DEFAULT_REPLACE):
    """Swap the weakest original entries for the strongest expanded ones.

    The output always has the same length as ``original``; removed entries
    come back when there are not enough distinct expanded entries.
    """
    original, expanded = list(original), list(expanded)
    if replace_count < 0 or replace_count > len(original):
        raise ArgumentError(f"replace_count must be in [0, {len(original)}], got {replace_count}")
    order = sorted(range(len(original)), key=lambda i: (original[i].similarity, -i))
    removed_idx = set(order[:replace_count])
    survivors = [e for i, e in enumerate(original) if i not in removed_idx]
    texts = {e.text for e in survivors}
    inserted = []
    for e in sorted(expanded, key=lambda e: -e.similarity):
        if len(inserted) == replace_count:
            break
        if e.text not in texts:
            texts.add(e.text)
            inserted.append(e)
    removed = sorted(removed_idx, key=lambda i: (-original[i].similarity, i))
    refill = []
    for i in removed:
        if len(inserted) + len(refill) == replace_count:
            break
        refill.append(original[i])
    out = survivors + inserted + refill
    out.sort(key=lambda e: -e.similarity)
    return out


def _clean(value):
    return squash(value) if value else "-"


def format_entity(prof) -> str:
    attrs = "; ".join(f"{k}={squash(v.value)}" for k, v in prof.sorted_attributes()) or "-"
    rels = "; ".join(f"{r.relation_type} {r.target}" for r in prof.relations[:MAX_RELATIONS]) or "-"
    timeline = "; ".join(squash(t.description) for t in prof.timeline[-MAX_TIMELINE:]) or "-"
    return (
        f"- {prof.canonical_name} [{prof.entity_type}] | attrs: {attrs} | rel: {rels} "
        f"| timeline: {timeline} | {_clean(prof.summary)}"
    )


def format_event(ev) -> str:
    w = ev.when
    when = f"abs={_clean(w.absolute)};rel={_clean(w.relative)};dur={_clean(w.duration)};rec={_clean(w.recurrence)}"
    who = ",".join(ev.who) or "-"
    return (
        f"- [{ev.event_type}/{ev.importance}] {_clean(ev.description)} | Who: {who} | What: {_clean(ev.what)} "
        f"| When: {when} | Where: {_clean(ev.where)} | Outcome: {_clean(ev.outcome)} "
        f"| at {_clean(ev.recorded_at)} | trace {_clean(ev.trace_id)}"
    )


def format_topic(cluster) -> str:
    s = cluster.summary
    kw = ",".join(sorted(cluster.keywords)) or "-"
    if s is None:
        return f"- {cluster.label} | participants: - | span: - | - | facts: - | kw: {kw}"
    participants = ",".join(s.participants) or "-"
    facts = "; ".join(squash(f) for f in s.key_facts[:MAX_FACTS]) or "-"
    return (
        f"- {cluster.label} | participants: {participants} | span: {_clean(s.temporal_span)} "
        f"| {_clean(s.narrative)} | facts: {facts} | kw: {kw}"
    )


def _block(lines):
    return "\n".join(lines) if lines else NONE_AVAILABLE


def format_injection(selection) -> InjectionContext:
    return InjectionContext(
        topic_block=_block([format_topic(s.anchor) for s in selection.topics]),
        entity_block=_block([format_entity(s.anchor) for s in selection.entities]),
        event_block=_block([format_event(s.anchor) for s in selection.events]),
    )


def parse_memories(text: str) -> HostMemories:
    """Read a two-section memories file with ``=== Name ===`` headers."""
    sections = []
    for line in text.splitlines():
        m = _SECTION.match(line)
        if m:
            sections.append([m.group(1), []])
        elif sections:
            sections[-1][1].append(line)
        elif line.strip():
            raise SchemaError("memories file must start with a '=== <speaker> ===' header")
    if len(sections) > 2:
        raise SchemaError(f"memories file has {len(sections)} sections; expected at most 2")
    mem = HostMemories()
    for n, (name, lines) in enumerate(sections, 1):
        setattr(mem, f"speaker_{n}_name", name)
        setattr(mem, f"speaker_{n}_memories", "\n".join(lines).strip("\n"))
    return mem


def assemble_prompt(question: str, host_memories: HostMemories | None, ctx: InjectionContext) -> str:
    """Fill the answer template; substitution is single-pass so braces in values stay literal."""
    if not question or not question.strip():
        raise ArgumentError("question must be non-empty")
    mem = host_memories or HostMemories()
    values = {
        "speaker_1_name": mem.speaker_1_name,
        "speaker_1_memories": mem.speaker_1_memories,
        "speaker_2_name": mem.speaker_2_name,
        "speaker_2_memories": mem.speaker_2_memories,
        "topic_context": ctx.topic_block,
        "entity_context": ctx.entity_block,
        "event_context": ctx.event_block,
        "question": question.strip(),
    }
    return _PLACEHOLDER.sub(lambda m: values.get(m.group(1), m.group(0)), ANSWER_TEMPLATE)
