"""Prompt rendering: template text followed by the formatted input block."""
import json

from ..errors import ArgumentError
from ..ingest import Batch
from ..timeutil import weekday_name
from .templates import TEMPLATES

MODE_TAGS = tuple(TEMPLATES)


def format_segment_line(u):
    day = weekday_name(u.timestamp)
    stamp = f"{u.timestamp}, {day}" if day else u.timestamp
    return f"[{stamp}] {u.seq_id}.{u.speaker}: {u.content}"


def format_segments(utterances):
    """Group utterances by session under ``--- Topic <session> ---`` headers."""
    lines = []
    current = object()
    for u in utterances:
        if u.session_id != current:
            current = u.session_id
            lines.append(f"--- Topic {u.session_id} ---")
        lines.append(format_segment_line(u))
    return "\n".join(lines)


def format_numbered(utterances):
    return "\n".join(
        f"[{u.session_id}, {u.timestamp}] {u.seq_id}. {u.speaker}: {u.content}"
        for u in utterances
    )


def _utterances_of(payload):
    if isinstance(payload, Batch):
        return list(payload.utterances)
    if isinstance(payload, dict) and "utterances" in payload:
        return list(payload["utterances"])
    raise ArgumentError("payload must be a Batch or a mapping with 'utterances'")


def render_prompt(template_id, payload):
    """Return the template for ``template_id`` with its input block appended."""
    if template_id not in TEMPLATES:
        raise ArgumentError(f"unknown template {template_id!r}")
    template = TEMPLATES[template_id]

    if template_id == "profile_summary":
        profile = payload.to_dict() if hasattr(payload, "to_dict") else payload
        if not profile:
            raise ArgumentError("profile_summary needs a non-empty profile")
        block = "Entity profile:\n" + json.dumps(profile, indent=2, sort_keys=True, ensure_ascii=False)
        return f"{template}\n\n{block}\n"

    utts = _utterances_of(payload)
    if not utts:
        raise ArgumentError(f"{template_id} prompt needs at least one utterance")

    if template_id == "topic_id":
        block = "Conversation utterances:\n" + format_numbered(utts)
    elif template_id == "topic_summary":
        label = payload.get("label", "")
        keywords = ", ".join(payload.get("keywords", []))
        block = (
            f"Topic label: {label}\nTopic keywords: {keywords}\n\n"
            "Topic utterances:\n" + format_segments(utts)
        )
    else:
        block = "Conversation segments:\n" + format_segments(utts)
    return f"{template}\n\n{block}\n"
