"""Conversation loading and batching."""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path

from .errors import ArgumentError, EmptyInputError, SchemaError

BATCH_KINDS = ("entity_event", "topic")


@dataclass(frozen=True)
class Utterance:
    seq_id: int
    speaker: str
    content: str
    session_id: str
    timestamp: str


@dataclass(frozen=True)
class Batch:
    batch_index: int
    utterances: tuple[Utterance, ...]
    kind: str = "entity_event"

    @property
    def start_seq(self) -> int:
        return self.utterances[0].seq_id

    @property
    def end_seq(self) -> int:
        return self.utterances[-1].seq_id

    @property
    def seq_ids(self) -> list[int]:
        return [u.seq_id for u in self.utterances]

    def by_seq(self) -> dict[int, Utterance]:
        return {u.seq_id: u for u in self.utterances}

    def __len__(self):
        return len(self.utterances)


@dataclass
class Conversation:
    conversation_id: str
    utterances: list[Utterance] = field(default_factory=list)


def _require_str(rec, key, idx, allow_empty=False):
    if key not in rec:
        raise SchemaError(f"utterances[{idx}]: missing field {key!r}")
    val = rec[key]
    if not isinstance(val, str):
        raise SchemaError(f"utterances[{idx}]: field {key!r} must be a string")
    if not allow_empty and not val.strip():
        raise SchemaError(f"utterances[{idx}]: field {key!r} must be non-empty")
    return val


def parse_conversation(doc, source="<document>") -> Conversation:
    if not isinstance(doc, dict):
        raise SchemaError(f"{source}: top level must be an object")
    records = doc.get("utterances")
    if not isinstance(records, list):
        raise SchemaError(f"{source}: 'utterances' must be a list")
    if not records:
        raise EmptyInputError(f"{source}: conversation has no utterances")
    conv_id = doc.get("conversation_id", "")
    if not isinstance(conv_id, str):
        raise SchemaError(f"{source}: 'conversation_id' must be a string")

    explicit = [isinstance(r, dict) and "seq_id" in r for r in records]
    if any(explicit) and not all(explicit):
        idx = explicit.index(False)
        raise SchemaError(f"utterances[{idx}]: seq_id must be given for all records or none")

    utts = []
    prev = None
    for idx, rec in enumerate(records):
        if not isinstance(rec, dict):
            raise SchemaError(f"utterances[{idx}]: record must be an object")
        speaker = _require_str(rec, "speaker", idx)
        content = _require_str(rec, "content", idx)
        session_id = _require_str(rec, "session_id", idx, allow_empty=True)
        timestamp = _require_str(rec, "timestamp", idx, allow_empty=True)
        if explicit[0]:
            seq = rec["seq_id"]
            if isinstance(seq, bool) or not isinstance(seq, int) or seq < 0:
                raise SchemaError(f"utterances[{idx}]: seq_id must be a non-negative integer")
            if prev is not None and seq == prev:
                raise SchemaError(f"utterances[{idx}]: duplicate seq_id {seq}")
            if prev is not None and seq < prev:
                raise SchemaError(f"utterances[{idx}]: seq_id {seq} is not increasing")
            prev = seq
        else:
            seq = idx
        utts.append(Utterance(seq, speaker, content, session_id, timestamp))
    return Conversation(conv_id, utts)


def load_conversation_document(path) -> Conversation:
    path = Path(path)
    try:
        raw = path.read_text(encoding="utf-8")
    except UnicodeDecodeError as exc:
        raise SchemaError(f"{path}: not valid UTF-8") from exc
    try:
        doc = json.loads(raw)
    except json.JSONDecodeError as exc:
        raise SchemaError(f"{path}: invalid JSON ({exc})") from exc
    return parse_conversation(doc, str(path))


def load_conversation(path) -> list[Utterance]:
    """Read a conversation file and return its utterances in seq order."""
    return load_conversation_document(path).utterances


def batch_stride(size: int, overlap_fraction: float) -> int:
    # exact decimal arithmetic so 150 * (1 - 0.2) floors to 120, not 119
    frac = Fraction(repr(float(overlap_fraction)))
    return math.floor(size * (1 - frac))


def make_batches(utts, size: int, overlap_fraction: float = 0.0, kind: str = "entity_event") -> list[Batch]:
    """Split utterances into fixed-size batches.

    Consecutive batches start ``floor(size * (1 - overlap_fraction))`` apart;
    the final batch is whatever remains and is not padded.
    """
    if isinstance(size, bool) or not isinstance(size, int) or size < 1:
        raise ArgumentError(f"batch size must be an integer >= 1, got {size!r}")
    if not 0 <= overlap_fraction < 1:
        raise ArgumentError(f"overlap_fraction must be in [0, 1), got {overlap_fraction!r}")
    if kind not in BATCH_KINDS:
        raise ArgumentError(f"unknown batch kind {kind!r}")
    stride = batch_stride(size, overlap_fraction)
    if stride < 1:
        raise ArgumentError(f"size {size} with overlap {overlap_fraction} gives a zero stride")

    utts = list(utts)
    batches = []
    start = 0
    while start < len(utts):
        chunk = tuple(utts[start:start + size])
        batches.append(Batch(len(batches), chunk, kind))
        if start + size >= len(utts):
            break
        start += stride
    return batches
