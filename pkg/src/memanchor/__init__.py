"""Structured entity, event and topic anchors for long conversational memory."""

__version__ = "0.1.0"

from .build import BuildConfig, build_kb  # noqa: E402
from .ingest import load_conversation, make_batches  # noqa: E402
from .injection import (  # noqa: E402
    assemble_prompt,
    format_injection,
    generate_module_queries,
    merge_retrieval,
    round_robin_merge,
)
from .kb import AnchorKB, load_kb, save_kb  # noqa: E402
from .retrieval import AnchorSelection, RetrievalConfig, select_anchors  # noqa: E402

__all__ = [
    "AnchorKB",
    "AnchorSelection",
    "BuildConfig",
    "RetrievalConfig",
    "assemble_prompt",
    "build_kb",
    "format_injection",
    "generate_module_queries",
    "load_conversation",
    "load_kb",
    "make_batches",
    "merge_retrieval",
    "round_robin_merge",
    "save_kb",
    "select_anchors",
]
