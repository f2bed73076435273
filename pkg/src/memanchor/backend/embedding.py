"""Embedding vectors and the deterministic hashed bag-of-words embedder."""
from __future__ import annotations

import math
from dataclasses import dataclass

from ..errors import ArgumentError
from ..text import tokens

FNV64_OFFSET = 0xCBF29CE484222325
FNV64_PRIME = 0x100000001B3
_MASK64 = 0xFFFFFFFFFFFFFFFF

MOCK_DIMS = 256


def fnv1a_64(data: bytes) -> int:
    h = FNV64_OFFSET
    for byte in data:
        h ^= byte
        h = (h * FNV64_PRIME) & _MASK64
    return h


@dataclass(frozen=True)
class EmbeddingVector:
    dims: int
    values: tuple[float, ...]

    def __post_init__(self):
        if len(self.values) != self.dims:
            raise ArgumentError(f"embedding has {len(self.values)} values, expected {self.dims}")

    @classmethod
    def normalized(cls, values):
        values = [float(v) for v in values]
        norm = math.sqrt(math.fsum(v * v for v in values))
        if norm == 0.0:
            raise ArgumentError("cannot normalize a zero vector")
        return cls(len(values), tuple(v / norm for v in values))

    def norm(self) -> float:
        return math.sqrt(math.fsum(v * v for v in self.values))

    def dot(self, other: "EmbeddingVector") -> float:
        if other.dims != self.dims:
            raise ArgumentError(f"dimension mismatch: {self.dims} vs {other.dims}")
        return math.fsum(a * b for a, b in zip(self.values, other.values))


def token_bucket(token: str, dims: int = MOCK_DIMS) -> int:
    return fnv1a_64(token.encode("utf-8")) % dims


def hashed_embedding(text: str, dims: int = MOCK_DIMS) -> EmbeddingVector:
    """Count tokens into FNV-1a buckets and L2-normalize."""
    if not isinstance(text, str) or not text.strip():
        raise ArgumentError("cannot embed empty text")
    toks = tokens(text)
    if not toks:
        raise ArgumentError(f"text has no alphanumeric tokens: {text!r}")
    counts = [0] * dims
    for tok in toks:
        counts[token_bucket(tok, dims)] += 1
    return EmbeddingVector.normalized(counts)
