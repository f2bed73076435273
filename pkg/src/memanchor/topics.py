"""Cross-session topic clusters: per-batch identification, merging, summaries."""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

from .errors import ArgumentError, ProviderError, SchemaError
from .text import content_word_set, content_words, jaccard
from .timeutil import parse_timestamp

log = logging.getLogger(__name__)

KEYWORD_JACCARD = 0.5
SHARED_UTTERANCES = 2
UNASSIGNED_LABEL = "Unassigned"


@dataclass
class TopicSummary:
    narrative: str
    key_facts: list[str]
    participants: list[str] = field(default_factory=list)
    temporal_span: str = ""
    sentiment: str = "neutral"
    importance: str = "medium"
    extra_keywords: list[str] = field(default_factory=list)

    def __post_init__(self):
        if not self.narrative:
            raise ArgumentError("a topic summary needs a narrative")
        if not self.key_facts:
            raise ArgumentError("a topic summary needs at least one key fact")

    def to_dict(self):
        return {
            "narrative": self.narrative,
            "key_facts": list(self.key_facts),
            "participants": list(self.participants),
            "temporal_span": self.temporal_span,
            "sentiment": self.sentiment,
            "importance": self.importance,
            "extra_keywords": list(self.extra_keywords),
        }


@dataclass
class TopicCluster:
    topic_id: str
    label: str
    keywords: set[str]
    utterance_seq_ids: list[int]
    summary: TopicSummary | None = None
    batch_index: int = 0

    def to_dict(self):
        return {
            "topic_id": self.topic_id,
            "label": self.label,
            "keywords": sorted(self.keywords),
            "utterance_seq_ids": list(self.utterance_seq_ids),
            "summary": self.summary.to_dict() if self.summary else None,
            "batch_index": self.batch_index,
        }

    @classmethod
    def from_dict(cls, d):
        summary = TopicSummary(**d["summary"]) if d.get("summary") else None
        return cls(d["topic_id"], d["label"], set(d["keywords"]), [int(s) for s in d["utterance_seq_ids"]],
                   summary, int(d.get("batch_index", 0)))


@dataclass
class TopicStore:
    clusters: list[TopicCluster] = field(default_factory=list)
    warnings: list[str] = field(default_factory=list, compare=False)

    def to_dict(self):
        return {"topics": [c.to_dict() for c in self.clusters]}

    @classmethod
    def from_dict(cls, d):
        return cls([TopicCluster.from_dict(c) for c in d.get("topics", [])])

    def assignment(self) -> dict[int, str]:
        return {seq: c.topic_id for c in self.clusters for seq in c.utterance_seq_ids}


def _label_keywords(label):
    return set(content_words(label)) or {"misc"}


def clusters_from_extraction(extraction, batch) -> list[TopicCluster]:
    """Turn parsed topic records into exclusive, exhaustive batch clusters.

    Indices outside the batch are dropped, an utterance listed under several
    topics stays with the first, and anything left over goes to a synthetic
    cluster so every batch utterance is covered.
    """
    in_batch = set(batch.seq_ids)
    taken = set()
    clusters = []
    for rec in extraction.topics:
        seqs = []
        for seq in rec.utterance_indices:
            if seq in in_batch and seq not in taken:
                taken.add(seq)
                seqs.append(seq)
        if not seqs:
            continue
        keywords = set(rec.keywords) or _label_keywords(rec.label)
        clusters.append(TopicCluster(f"b{batch.batch_index}_{len(clusters)}", rec.label, keywords,
                                     sorted(seqs), None, batch.batch_index))
    leftover = sorted(in_batch - taken)
    if leftover:
        clusters.append(TopicCluster(f"b{batch.batch_index}_{len(clusters)}", UNASSIGNED_LABEL,
                                     {"unassigned"}, leftover, None, batch.batch_index))
    return clusters


def identify_topics(batch, extractor) -> list[TopicCluster]:
    from .backend.prompts import render_prompt

    if batch.kind != "topic":
        raise ArgumentError(f"identify_topics needs a topic batch, got kind {batch.kind!r}")
    extraction = extractor.run(render_prompt("topic_id", batch), "topic_id", (batch.start_seq, batch.end_seq))
    return clusters_from_extraction(extraction, batch)


def _should_merge(a: TopicCluster, b: TopicCluster) -> bool:
    if jaccard(a.keywords, b.keywords) >= KEYWORD_JACCARD:
        return True
    return len(set(a.utterance_seq_ids) & set(b.utterance_seq_ids)) >= SHARED_UTTERANCES


def _order_key(c: TopicCluster):
    return (c.batch_index, min(c.utterance_seq_ids) if c.utterance_seq_ids else -1, c.label)


def merge_topic_batches(clusters: list[TopicCluster]) -> list[TopicCluster]:
    """Merge clusters from consecutive batches and make assignment exclusive.

    Merging repeats until no pair of merged clusters qualifies, which makes
    the operation idempotent. Summaries are dropped; they are regenerated
    for the merged clusters.
    """
    groups = [
        TopicCluster(c.topic_id, c.label, set(c.keywords), sorted(set(c.utterance_seq_ids)), None, c.batch_index)
        for c in sorted(clusters, key=_order_key)
    ]
    changed = True
    while changed:
        changed = False
        for i in range(len(groups)):
            for j in range(i + 1, len(groups)):
                if _should_merge(groups[i], groups[j]):
                    a, b = groups[i], groups[j]
                    a.keywords |= b.keywords
                    a.utterance_seq_ids = sorted(set(a.utterance_seq_ids) | set(b.utterance_seq_ids))
                    a.batch_index = min(a.batch_index, b.batch_index)
                    del groups[j]
                    changed = True
                    break
            if changed:
                break

    owner = {}
    for pos, g in enumerate(groups):
        for seq in g.utterance_seq_ids:
            if seq not in owner or (g.batch_index, pos) < owner[seq]:
                owner[seq] = (g.batch_index, pos)
    merged = []
    for pos, g in enumerate(groups):
        g.utterance_seq_ids = [s for s in g.utterance_seq_ids if owner[s] == (g.batch_index, pos)]
        if g.utterance_seq_ids:
            merged.append(g)
    merged.sort(key=_order_key)
    for n, g in enumerate(merged, 1):
        g.topic_id = f"topic_{n:03d}"
    return merged


def _span(utts):
    parsed = [parse_timestamp(u.timestamp) for u in utts]
    if all(p is not None for p in parsed):
        lo = utts[min(range(len(utts)), key=lambda i: (parsed[i], utts[i].seq_id))].timestamp
        hi = utts[max(range(len(utts)), key=lambda i: (parsed[i], utts[i].seq_id))].timestamp
    else:
        lo, hi = utts[0].timestamp, utts[-1].timestamp
    return lo if lo == hi else f"{lo} to {hi}"


def template_topic_summary(cluster: TopicCluster, utts) -> TopicSummary:
    sessions = sorted({u.session_id for u in utts})
    participants = sorted({u.speaker for u in utts})
    n = len(utts)
    narrative = (
        f"{cluster.label}: {n} utterances across sessions {', '.join(sessions)}; "
        f"participants {', '.join(participants)}"
    )
    return TopicSummary(
        narrative=narrative,
        key_facts=[f"{u.speaker}: {u.content}" for u in utts[:5]],
        participants=participants,
        temporal_span=_span(utts),
        sentiment="neutral",
        importance="high" if n >= 10 else "medium" if n >= 4 else "low",
        extra_keywords=[],
    )


def summarize_topic(cluster: TopicCluster, utts, extractor=None, warnings=None) -> TopicCluster:
    """Attach a summary built from the cluster's own utterances."""
    members = set(cluster.utterance_seq_ids)
    utts = sorted((u for u in utts if u.seq_id in members), key=lambda u: u.seq_id)
    if not utts:
        raise ArgumentError(f"topic {cluster.topic_id!r} has no utterances to summarize")
    summary = template_topic_summary(cluster, utts)
    if extractor is not None and not getattr(extractor.provider, "template_summaries", True):
        from .backend.prompts import render_prompt

        payload = {"utterances": utts, "label": cluster.label, "keywords": sorted(cluster.keywords)}
        try:
            fields = extractor.run(render_prompt("topic_summary", payload), "topic_summary")
            summary = TopicSummary(**fields)
        except (ProviderError, SchemaError, ArgumentError) as exc:
            msg = f"topic summary for {cluster.label!r} fell back to template: {exc}"
            log.warning(msg)
            if warnings is not None:
                warnings.append(msg)
    cluster.summary = summary
    return cluster


def topic_tokens(cluster: TopicCluster) -> set[str]:
    words = content_word_set(cluster.label)
    for kw in cluster.keywords:
        words |= content_word_set(kw)
    if cluster.summary:
        for fact in cluster.summary.key_facts:
            words |= content_word_set(fact)
    return words


def native_match_topics(store: TopicStore, query: str, cap: int):
    """Clusters sharing tokens with the query, best overlap first."""
    q = content_word_set(query)
    scored = []
    for c in store.clusters:
        score = len(q & topic_tokens(c))
        if score > 0:
            scored.append((c, score))
    scored.sort(key=lambda p: (-p[1], p[0].label, p[0].topic_id))
    return scored[:max(cap, 0)]
