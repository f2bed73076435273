"""Model providers: the fixture-backed mock and an HTTP remote provider."""
from __future__ import annotations

import json
import logging
import math
import os
import threading
import time
from dataclasses import dataclass, field
from pathlib import Path

import httpx

from ..errors import ArgumentError, ExtractionParseError, FixtureMissingError, ProviderError, TransportError
from .embedding import MOCK_DIMS, EmbeddingVector, hashed_embedding
from .parsing import parse_extraction
from .templates import TEMPLATES

log = logging.getLogger(__name__)

DEFAULT_MAX_TOKENS = 4096


@dataclass(frozen=True)
class CompletionRequest:
    prompt: str
    mode_tag: str
    max_tokens: int = DEFAULT_MAX_TOKENS
    temperature: float = 0.0
    # (first, last) seq_id of the batch; the mock provider keys fixtures on it
    seq_range: tuple[int, int] | None = None

    def __post_init__(self):
        if not self.prompt or not self.prompt.strip():
            raise ArgumentError("prompt must be non-empty")
        if self.temperature != 0:
            raise ArgumentError("extraction calls run at temperature 0")
        if self.mode_tag not in TEMPLATES:
            raise ArgumentError(f"unknown mode tag {self.mode_tag!r}")


@dataclass(frozen=True)
class UsageRecord:
    prompt_chars: int = 0
    response_chars: int = 0
    approx_tokens: int = 0
    wall_ms: int = 0

    @classmethod
    def for_call(cls, prompt: str, response: str, wall_ms: int = 0) -> "UsageRecord":
        p, r = len(prompt), len(response)
        return cls(p, r, math.ceil((p + r) / 4), int(wall_ms))

    def __add__(self, other: "UsageRecord") -> "UsageRecord":
        return UsageRecord(
            self.prompt_chars + other.prompt_chars,
            self.response_chars + other.response_chars,
            self.approx_tokens + other.approx_tokens,
            self.wall_ms + other.wall_ms,
        )

    def to_dict(self):
        return {
            "prompt_chars": self.prompt_chars,
            "response_chars": self.response_chars,
            "approx_tokens": self.approx_tokens,
            "wall_ms": self.wall_ms,
        }

    @classmethod
    def from_dict(cls, d):
        return cls(int(d["prompt_chars"]), int(d["response_chars"]), int(d["approx_tokens"]), int(d["wall_ms"]))


@dataclass(frozen=True)
class Completion:
    text: str
    usage: UsageRecord


class MockProvider:
    """Replays pre-authored completions from ``<fixtures>/<mode>/<start>-<end>.json``.

    Summary modes have no fixtures; callers render deterministic template
    summaries instead (``template_summaries`` is True).
    """

    template_summaries = True
    name = "mock"

    def __init__(self, fixtures_dir=None, dims: int = MOCK_DIMS):
        self.fixtures_dir = Path(fixtures_dir) if fixtures_dir is not None else None
        self.dims = dims

    def fixture_path(self, mode_tag, seq_range):
        if self.fixtures_dir is None:
            raise FixtureMissingError("mock provider has no fixtures directory")
        if seq_range is None:
            raise FixtureMissingError(f"mock {mode_tag} call carries no seq range")
        start, end = seq_range
        return self.fixtures_dir / mode_tag / f"{start}-{end}.json"

    def complete(self, request: CompletionRequest) -> Completion:
        path = self.fixture_path(request.mode_tag, request.seq_range)
        try:
            text = path.read_text(encoding="utf-8")
        except FileNotFoundError:
            raise FixtureMissingError(f"no fixture for {request.mode_tag} {request.seq_range}: {path}") from None
        return Completion(text, UsageRecord.for_call(request.prompt, text, 0))

    def embed(self, text: str) -> EmbeddingVector:
        return hashed_embedding(text, self.dims)


@dataclass
class RemoteConfig:
    endpoint: str
    model: str
    embedding_model: str = ""
    api_key_env: str = "MEMANCHOR_API_KEY"
    timeout_s: float = 120.0

    @classmethod
    def load(cls, path=None, environ=None):
        """Read a JSON config file, then let MEMANCHOR_* variables override it."""
        environ = os.environ if environ is None else environ
        data = {}
        if path:
            data = json.loads(Path(path).read_text(encoding="utf-8"))
            data = data.get("provider", data)
        env_map = {
            "endpoint": "MEMANCHOR_ENDPOINT",
            "model": "MEMANCHOR_MODEL",
            "embedding_model": "MEMANCHOR_EMBEDDING_MODEL",
            "api_key_env": "MEMANCHOR_API_KEY_ENV",
        }
        for key, var in env_map.items():
            if environ.get(var):
                data[key] = environ[var]
        missing = [k for k in ("endpoint", "model") if not data.get(k)]
        if missing:
            raise ArgumentError(f"remote provider config missing {', '.join(missing)}")
        known = {k: data[k] for k in ("endpoint", "model", "embedding_model", "api_key_env", "timeout_s") if k in data}
        return cls(**known)


_RETRYABLE_STATUS = {408, 429, 500, 502, 503, 504}


class RemoteProvider:
    """OpenAI-compatible chat-completions and embeddings client.

    Transport failures are retried up to ``attempts`` times in total, sleeping
    ``backoff[i]`` seconds before retry ``i``.
    """

    template_summaries = False
    name = "remote"

    def __init__(self, config: RemoteConfig, client: httpx.Client | None = None,
                 attempts: int = 3, backoff=(1.0, 2.0, 4.0), sleep=time.sleep, environ=None):
        self.config = config
        environ = os.environ if environ is None else environ
        self._api_key = environ.get(config.api_key_env, "")
        self._client = client or httpx.Client(timeout=config.timeout_s)
        self.attempts = attempts
        self.backoff = tuple(backoff)
        self._sleep = sleep

    def _headers(self):
        headers = {"Content-Type": "application/json"}
        if self._api_key:
            headers["Authorization"] = f"Bearer {self._api_key}"
        return headers

    def _post(self, path, payload):
        url = self.config.endpoint.rstrip("/") + path
        last_status = None
        last_exc = None
        for attempt in range(1, self.attempts + 1):
            try:
                resp = self._client.post(url, json=payload, headers=self._headers())
            except httpx.TransportError as exc:
                last_exc = exc
                log.warning("transport error on %s (attempt %d/%d): %s", path, attempt, self.attempts, exc)
            else:
                if resp.status_code < 400:
                    try:
                        return resp.json()
                    except ValueError as exc:
                        raise ProviderError(f"{path}: response is not JSON") from exc
                last_status = resp.status_code
                if resp.status_code not in _RETRYABLE_STATUS:
                    raise TransportError(f"{path}: HTTP {resp.status_code}", attempts=attempt, last_status=last_status)
                log.warning("HTTP %d on %s (attempt %d/%d)", resp.status_code, path, attempt, self.attempts)
            if attempt < self.attempts:
                self._sleep(self.backoff[min(attempt - 1, len(self.backoff) - 1)])
        detail = f"HTTP {last_status}" if last_exc is None else str(last_exc)
        raise TransportError(f"{path}: giving up after {self.attempts} attempts ({detail})",
                             attempts=self.attempts, last_status=last_status)

    def complete(self, request: CompletionRequest) -> Completion:
        payload = {
            "model": self.config.model,
            "messages": [{"role": "user", "content": request.prompt}],
            "temperature": request.temperature,
            "max_tokens": request.max_tokens,
        }
        t0 = time.perf_counter()
        data = self._post("/chat/completions", payload)
        wall_ms = round((time.perf_counter() - t0) * 1000)
        try:
            text = data["choices"][0]["message"]["content"] or ""
        except (KeyError, IndexError, TypeError) as exc:
            raise ProviderError("chat completion response has no message content") from exc
        return Completion(text, UsageRecord.for_call(request.prompt, text, wall_ms))

    def embed(self, text: str) -> EmbeddingVector:
        if not isinstance(text, str) or not text.strip():
            raise ArgumentError("cannot embed empty text")
        data = self._post("/embeddings", {"model": self.config.embedding_model or self.config.model, "input": text})
        try:
            values = data["data"][0]["embedding"]
        except (KeyError, IndexError, TypeError) as exc:
            raise ProviderError("embedding response has no vector") from exc
        return EmbeddingVector.normalized(values)


class UsageMeter:
    """Thread-safe usage accumulator keyed by mode tag."""

    def __init__(self):
        self._lock = threading.Lock()
        self.by_mode: dict[str, UsageRecord] = {}
        self.calls: dict[str, int] = {}

    def record(self, mode_tag: str, usage: UsageRecord):
        with self._lock:
            self.by_mode[mode_tag] = self.by_mode.get(mode_tag, UsageRecord()) + usage
            self.calls[mode_tag] = self.calls.get(mode_tag, 0) + 1

    @property
    def total(self) -> UsageRecord:
        out = UsageRecord()
        for mode in sorted(self.by_mode):
            out = out + self.by_mode[mode]
        return out

    def to_dict(self):
        return {
            "total": self.total.to_dict(),
            "calls": dict(sorted(self.calls.items())),
            "by_mode": {m: self.by_mode[m].to_dict() for m in sorted(self.by_mode)},
        }


@dataclass
class Extractor:
    """Sends prompts through a provider and parses the replies.

    A reply that fails to parse is re-requested once with the same prompt.
    """

    provider: object
    meter: UsageMeter = field(default_factory=UsageMeter)
    max_tokens: int = DEFAULT_MAX_TOKENS

    def run(self, prompt: str, mode_tag: str, seq_range=None):
        request = CompletionRequest(prompt, mode_tag, self.max_tokens, 0.0, seq_range)
        last_exc = None
        for _ in range(2):
            completion = self.provider.complete(request)
            self.meter.record(mode_tag, completion.usage)
            try:
                return parse_extraction(completion.text, mode_tag)
            except ExtractionParseError as exc:
                last_exc = exc
                log.warning("unparseable %s completion for %s; retrying once", mode_tag, seq_range)
        raise last_exc

    def embed(self, text):
        return self.provider.embed(text)
