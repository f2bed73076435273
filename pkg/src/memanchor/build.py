"""Build phase orchestration: batches, extraction, merging, consolidation."""
from __future__ import annotations

import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass
from datetime import datetime, timezone

from .backend.prompts import render_prompt
from .entities import COOCCUR_THRESHOLD, EntityStore, attach_event_mentions, consolidate, merge_extraction
from .errors import ArgumentError
from .events import DEDUP_TAU, EventStore, merge_event_extraction
from .ingest import make_batches
from .kb import AnchorKB, make_manifest
from .timeutil import parse_timestamp
from .topics import TopicStore, clusters_from_extraction, identify_topics, merge_topic_batches, summarize_topic

MODES = ("default", "parallel", "triple")


@dataclass(frozen=True)
class BuildConfig:
    batch_entity: int = 60
    batch_event: int = 60
    batch_topic: int = 150
    overlap: float = 0.2
    tau: float = DEDUP_TAU
    cooccur_threshold: int = COOCCUR_THRESHOLD

    def __post_init__(self):
        for name in ("batch_entity", "batch_event", "batch_topic"):
            if getattr(self, name) < 1:
                raise ArgumentError(f"{name} must be >= 1")
        if not 0 <= self.overlap < 1:
            raise ArgumentError("overlap must be in [0, 1)")
        if not 0 < self.tau <= 1:
            raise ArgumentError("tau must be in (0, 1]")
        if self.cooccur_threshold < 1:
            raise ArgumentError("cooccur_threshold must be >= 1")


@dataclass
class BuildReport:
    wall_s: float
    pipeline_s: dict
    warnings: list


def _span(batch):
    return (batch.start_seq, batch.end_seq)


def entity_pipeline(utts, extractor, cfg: BuildConfig) -> EntityStore:
    store = EntityStore()
    for batch in make_batches(utts, cfg.batch_entity):
        extraction = extractor.run(render_prompt("entity", batch), "entity", _span(batch))
        merge_extraction(store, extraction, batch)
    return store


def event_pipeline(utts, extractor, cfg: BuildConfig) -> EventStore:
    store = EventStore()
    for batch in make_batches(utts, cfg.batch_event):
        extraction = extractor.run(render_prompt("event", batch), "event", _span(batch))
        merge_event_extraction(store, extraction, batch, cfg.tau)
    return store


def topic_pipeline(utts, extractor, cfg: BuildConfig) -> list:
    clusters = []
    for batch in make_batches(utts, cfg.batch_topic, cfg.overlap, kind="topic"):
        clusters += identify_topics(batch, extractor)
    return merge_topic_batches(clusters)


def triple_pipeline(utts, extractor, cfg: BuildConfig):
    """One fused call per batch; topics merge across batches by keyword overlap."""
    entities, events, clusters = EntityStore(), EventStore(), []
    for batch in make_batches(utts, cfg.batch_entity):
        doc = extractor.run(render_prompt("triple", batch), "triple", _span(batch))
        merge_extraction(entities, doc.entities, batch)
        merge_event_extraction(events, doc.events, batch, cfg.tau)
        clusters += clusters_from_extraction(doc.topics, batch)
    return entities, events, merge_topic_batches(clusters)


def created_at(utts, environ=None) -> str:
    """Build timestamp that depends only on the input unless SOURCE_DATE_EPOCH is set."""
    environ = os.environ if environ is None else environ
    epoch = environ.get("SOURCE_DATE_EPOCH")
    if epoch:
        return datetime.fromtimestamp(int(epoch), tz=timezone.utc).strftime("%Y-%m-%dT%H:%M:%SZ")
    parsed = [(parse_timestamp(u.timestamp), u.timestamp) for u in utts]
    known = [p for p in parsed if p[0] is not None]
    if known:
        return max(known)[1]
    return utts[-1].timestamp


def build_kb(conversation, extractor, cfg: BuildConfig | None = None, mode: str = "default"):
    """Run the whole build phase and return ``(kb, report)``.

    ``parallel`` runs the three extraction pipelines on worker threads; it
    produces the same KB as ``default``, so both record build_mode
    "default" in the manifest.
    """
    cfg = cfg or BuildConfig()
    if mode not in MODES:
        raise ArgumentError(f"unknown build mode {mode!r}")
    utts = list(conversation.utterances)
    timings = {}

    def timed(name, fn, *args):
        t0 = time.perf_counter()
        result = fn(*args)
        timings[name] = time.perf_counter() - t0
        return result

    start = time.perf_counter()
    if mode == "triple":
        entities, events, clusters = timed("triple", triple_pipeline, utts, extractor, cfg)
    elif mode == "parallel":
        with ThreadPoolExecutor(max_workers=3) as pool:
            fe = pool.submit(timed, "entity", entity_pipeline, utts, extractor, cfg)
            fv = pool.submit(timed, "event", event_pipeline, utts, extractor, cfg)
            ft = pool.submit(timed, "topic", topic_pipeline, utts, extractor, cfg)
            entities, events, clusters = fe.result(), fv.result(), ft.result()
    else:
        entities = timed("entity", entity_pipeline, utts, extractor, cfg)
        events = timed("event", event_pipeline, utts, extractor, cfg)
        clusters = timed("topic", topic_pipeline, utts, extractor, cfg)

    t0 = time.perf_counter()
    attach_event_mentions(entities, events.events)
    consolidate(entities, extractor, cfg.cooccur_threshold)
    topics = TopicStore(clusters)
    for cluster in clusters:
        summarize_topic(cluster, utts, extractor, topics.warnings)
    timings["consolidate"] = time.perf_counter() - t0

    config = asdict(cfg)
    config["provider"] = getattr(extractor.provider, "name", type(extractor.provider).__name__)
    manifest = make_manifest(
        conversation.conversation_id,
        "triple" if mode == "triple" else "default",
        created_at(utts),
        config,
        (utts[0].seq_id, utts[-1].seq_id),
    )
    kb = AnchorKB(manifest, entities, events, topics, extractor.meter.to_dict())
    report = BuildReport(time.perf_counter() - start, timings, entities.warnings + topics.warnings)
    return kb, report


def format_usage(usage: dict, wall_s: float) -> str:
    """Per-module cost table: calls, characters, approximate tokens, time."""
    rows = [("module", "calls", "prompt_chars", "response_chars", "approx_tokens", "wall_ms")]
    for mode, rec in usage.get("by_mode", {}).items():
        rows.append((mode, str(usage["calls"][mode]), str(rec["prompt_chars"]), str(rec["response_chars"]),
                     str(rec["approx_tokens"]), str(rec["wall_ms"])))
    total = usage.get("total", {})
    rows.append(("total", str(sum(usage.get("calls", {}).values())), str(total.get("prompt_chars", 0)),
                 str(total.get("response_chars", 0)), str(total.get("approx_tokens", 0)),
                 str(total.get("wall_ms", 0))))
    widths = [max(len(r[i]) for r in rows) for i in range(len(rows[0]))]
    lines = ["  ".join(cell.ljust(w) if i == 0 else cell.rjust(w) for i, (cell, w) in enumerate(zip(r, widths)))
             for r in rows]
    lines.append(f"build wall time: {wall_s:.3f} s")
    return "\n".join(lines)
