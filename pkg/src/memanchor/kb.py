"""Portable knowledge-base directory: one JSON file per store plus a manifest."""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

from .entities import EntityStore
from .errors import KBValidationError, KBVersionError, SchemaError, StateError
from .events import EventStore
from .topics import TopicStore

FORMAT_VERSION = "1.0"
BUILD_MODES = ("default", "parallel", "triple")
KB_FILES = ("manifest.json", "entities.json", "events.json", "traces.json", "topics.json", "usage.json")


@dataclass
class AnchorKB:
    manifest: dict
    entities: EntityStore = field(default_factory=EntityStore)
    events: EventStore = field(default_factory=EventStore)
    topics: TopicStore = field(default_factory=TopicStore)
    usage: dict = field(default_factory=dict)
    loaded: bool = field(default=True, compare=False)

    @property
    def consolidated(self) -> bool:
        return self.entities.consolidated and all(c.summary is not None for c in self.topics.clusters)

    def documents(self) -> dict[str, object]:
        return {
            "manifest.json": self.manifest,
            "entities.json": self.entities.to_dict(),
            "events.json": self.events.to_dict(),
            "traces.json": self.events.traces_dict(),
            "topics.json": self.topics.to_dict(),
            "usage.json": self.usage,
        }


def make_manifest(conversation_id, build_mode, created_at, config, seq_range) -> dict:
    if build_mode not in BUILD_MODES:
        raise SchemaError(f"unknown build mode {build_mode!r}")
    return {
        "format_version": FORMAT_VERSION,
        "conversation_id": conversation_id,
        "build_mode": build_mode,
        "created_at": created_at,
        "config": dict(config),
        "utterance_seq_range": list(seq_range),
    }


def dumps(doc) -> str:
    return json.dumps(doc, sort_keys=True, indent=2, ensure_ascii=False) + "\n"


def save_kb(kb: AnchorKB, directory) -> Path:
    """Write every store file; output bytes depend only on the KB contents."""
    if not kb.consolidated:
        raise StateError("knowledge base must be consolidated before saving")
    out = Path(directory)
    out.mkdir(parents=True, exist_ok=True)
    for name, doc in kb.documents().items():
        (out / name).write_text(dumps(doc), encoding="utf-8")
    return out


def _read(directory: Path, name: str):
    path = directory / name
    if not path.is_file():
        raise FileNotFoundError(f"knowledge base file missing: {path}")
    try:
        return json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise SchemaError(f"{path}: invalid JSON ({exc})") from exc


def check_version(version) -> None:
    supported = FORMAT_VERSION.split(".")[0]
    if not isinstance(version, str) or version.split(".")[0] != supported:
        raise KBVersionError(f"unsupported knowledge base format_version {version!r} (expected {supported}.x)")


def validate(kb: AnchorKB) -> list[str]:
    """Every broken cross reference in the KB, as readable messages."""
    problems = []
    lo, hi = kb.manifest.get("utterance_seq_range", [None, None])

    def in_range(seq):
        return lo is None or hi is None or lo <= seq <= hi

    event_ids = {e.event_id for e in kb.events.events}
    trace_ids = {t.trace_id for t in kb.events.traces}
    for ev in kb.events.events:
        if ev.trace_id is not None and ev.trace_id not in trace_ids:
            problems.append(f"event {ev.event_id} references missing trace {ev.trace_id}")
        if not in_range(ev.source_seq_id):
            problems.append(f"event {ev.event_id} cites seq_id {ev.source_seq_id} outside the conversation")
    for tr in kb.events.traces:
        for eid in tr.event_ids:
            if eid not in event_ids:
                problems.append(f"trace {tr.trace_id} references missing event {eid}")
            elif kb.events.get(eid).trace_id != tr.trace_id:
                problems.append(f"trace {tr.trace_id} lists event {eid} which belongs to {kb.events.get(eid).trace_id}")
    for prof in kb.entities.profiles.values():
        for key, attr in prof.attributes.items():
            for seq in attr.evidence_seq_ids:
                if not in_range(seq):
                    problems.append(f"entity {prof.canonical_name} attribute {key} cites seq_id {seq} outside the conversation")
        for other in prof.co_occurrences:
            if kb.entities.get(other) is None:
                problems.append(f"entity {prof.canonical_name} co-occurs with unknown entity {other}")
    seen = {}
    for c in kb.topics.clusters:
        for seq in c.utterance_seq_ids:
            if not in_range(seq):
                problems.append(f"topic {c.topic_id} cites seq_id {seq} outside the conversation")
            if seq in seen:
                problems.append(f"seq_id {seq} assigned to both {seen[seq]} and {c.topic_id}")
            seen[seq] = c.topic_id
    return problems


def load_kb(directory) -> AnchorKB:
    """Load and validate a KB directory written by :func:`save_kb`."""
    directory = Path(directory)
    if not directory.is_dir():
        raise FileNotFoundError(f"knowledge base directory not found: {directory}")
    manifest = _read(directory, "manifest.json")
    check_version(manifest.get("format_version"))
    try:
        kb = AnchorKB(
            manifest=manifest,
            entities=EntityStore.from_dict(_read(directory, "entities.json")),
            events=EventStore.from_dicts(_read(directory, "events.json"), _read(directory, "traces.json")),
            topics=TopicStore.from_dict(_read(directory, "topics.json")),
            usage=_read(directory, "usage.json"),
        )
    except (KeyError, TypeError, ValueError) as exc:
        if isinstance(exc, SchemaError):
            raise
        raise SchemaError(f"{directory}: malformed store file ({exc})") from exc
    problems = validate(kb)
    if problems:
        raise KBValidationError(problems)
    return kb
