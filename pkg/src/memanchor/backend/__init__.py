"""Provider contract, prompt rendering and completion parsing."""
from .embedding import EmbeddingVector, fnv1a_64, hashed_embedding
from .parsing import parse_extraction, strip_fence
from .prompts import render_prompt
from .providers import (
    Completion,
    CompletionRequest,
    Extractor,
    MockProvider,
    RemoteConfig,
    RemoteProvider,
    UsageMeter,
    UsageRecord,
)

__all__ = [
    "Completion",
    "CompletionRequest",
    "EmbeddingVector",
    "Extractor",
    "MockProvider",
    "RemoteConfig",
    "RemoteProvider",
    "UsageMeter",
    "UsageRecord",
    "fnv1a_64",
    "hashed_embedding",
    "parse_extraction",
    "render_prompt",
    "strip_fence",
]
