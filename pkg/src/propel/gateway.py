"""Provider-agnostic chat gateway with a record/replay transcript store.

Every request has a stable identity: the SHA-256 digest of its canonical
JSON serialization (sorted keys, compact separators, only the semantic
fields). The transcript store keeps one file per digest, so recorded runs
replay byte-for-byte without network access and cache lookups are O(1).

Modes:

* ``LIVE``: always call the provider.
* ``RECORD``: call the provider and persist the response.
* ``REPLAY``: serve from the store; fall back to the provider on a miss.
* ``REPLAY_STRICT``: serve from the store; a miss is an error.

Credentials come from the environment only (``PROPEL_API_KEY``), never
from flags or configuration files.
"""

from __future__ import annotations

import hashlib
import json
import os
import time
import uuid
from dataclasses import dataclass, replace
from enum import Enum
from pathlib import Path
from typing import Callable, Protocol

from .errors import CacheMiss, CredentialMissing, ProviderError

API_KEY_ENV = "PROPEL_API_KEY"
BASE_URL_ENV = "PROPEL_BASE_URL"
DEFAULT_BASE_URL = "https://api.openai.com/v1/chat/completions"

DEFAULT_TEMPERATURE = 0.1
DEFAULT_MAX_OUTPUT_TOKENS = 8192
DEFAULT_TIMEOUT_SECONDS = 120.0
MAX_RETRIES = 3

_ROLES = ("system", "user", "assistant")


@dataclass(frozen=True, slots=True)
class ChatMessage:
    role: str
    content: str


@dataclass(frozen=True, slots=True)
class TokenUsage:
    input: int = 0
    output: int = 0


@dataclass(frozen=True, slots=True)
class ChatResponse:
    content: str
    finish_reason: str = "stop"
    token_usage: TokenUsage = TokenUsage()


@dataclass(frozen=True, slots=True)
class ChatRequest:
    model_id: str
    system_prompt: str
    messages: tuple[ChatMessage, ...]
    temperature: float = DEFAULT_TEMPERATURE
    response_mime: str = "application/json"
    max_output_tokens: int = DEFAULT_MAX_OUTPUT_TOKENS

    def __post_init__(self) -> None:
        if not self.messages:
            raise ValueError("messages must be non-empty")
        if not 0.0 <= self.temperature <= 2.0:
            raise ValueError("temperature must be within [0, 2]")
        if self.max_output_tokens <= 0:
            raise ValueError("max_output_tokens must be positive")
        for msg in self.messages:
            if msg.role not in _ROLES:
                raise ValueError(f"unknown message role: {msg.role!r}")
        # After any leading system context the conversation must alternate
        # user/assistant, starting with user.
        rest = [m.role for m in self.messages if m.role != "system"]
        for i, role in enumerate(rest):
            expected = "user" if i % 2 == 0 else "assistant"
            if role != expected:
                raise ValueError("messages must alternate user/assistant")

    def append(self, *messages: ChatMessage) -> ChatRequest:
        return replace(self, messages=self.messages + tuple(messages))


@dataclass(frozen=True, slots=True)
class TranscriptKey:
    """SHA-256 digest (hex) of the canonical request serialization."""

    digest: str

    def __str__(self) -> str:
        return self.digest


def canonical_request_payload(req: ChatRequest) -> dict:
    """The semantic fields of a request, ready for stable serialization.

    Volatile fields (timestamps, retry counters, transport settings) are
    not part of a request's identity.
    """
    return {
        "model_id": req.model_id,
        "system_prompt": req.system_prompt,
        "messages": [{"role": m.role, "content": m.content} for m in req.messages],
        "temperature": req.temperature,
        "response_mime": req.response_mime,
        "max_output_tokens": req.max_output_tokens,
    }


def _dumps_canonical(payload: dict) -> str:
    return json.dumps(payload, sort_keys=True, ensure_ascii=True, separators=(",", ":"))


def transcript_key(req: ChatRequest) -> TranscriptKey:
    raw = _dumps_canonical(canonical_request_payload(req)).encode("utf-8")
    return TranscriptKey(hashlib.sha256(raw).hexdigest())


def content_fingerprint(text: str) -> str:
    return hashlib.sha256(text.encode("utf-8")).hexdigest()


class GatewayMode(Enum):
    LIVE = "live"
    RECORD = "record"
    REPLAY = "replay"
    REPLAY_STRICT = "replay-strict"


class TranscriptStore:
    """One JSON file per transcript key; writes are atomic (temp + rename)."""

    def __init__(self, root: str | Path):
        self.root = Path(root)

    def path_for(self, key: TranscriptKey) -> Path:
        return self.root / f"{key.digest}.json"

    def get(self, key: TranscriptKey) -> ChatResponse | None:
        path = self.path_for(key)
        if not path.exists():
            return None
        entry = json.loads(path.read_text(encoding="utf-8"))
        resp = entry["response"]
        usage = resp.get("token_usage", {})
        return ChatResponse(
            content=resp["content"],
            finish_reason=resp.get("finish_reason", "stop"),
            token_usage=TokenUsage(usage.get("input", 0), usage.get("output", 0)),
        )

    def put(self, key: TranscriptKey, req: ChatRequest, resp: ChatResponse) -> None:
        entry = {
            "key": key.digest,
            "request_fingerprint": canonical_request_payload(req),
            "response": {
                "content": resp.content,
                "finish_reason": resp.finish_reason,
                "token_usage": {
                    "input": resp.token_usage.input,
                    "output": resp.token_usage.output,
                },
            },
        }
        self.root.mkdir(parents=True, exist_ok=True)
        final = self.path_for(key)
        tmp = final.with_name(f".{key.digest}.{uuid.uuid4().hex}.tmp")
        tmp.write_text(
            json.dumps(entry, sort_keys=True, ensure_ascii=True, indent=2) + "\n",
            encoding="utf-8",
        )
        os.replace(tmp, final)


class Transport(Protocol):
    def __call__(self, req: ChatRequest) -> ChatResponse: ...


class HttpTransport:
    """OpenAI-compatible chat-completions client over HTTPS."""

    def __init__(
        self,
        base_url: str | None = None,
        timeout: float = DEFAULT_TIMEOUT_SECONDS,
        client=None,
    ):
        self.base_url = base_url or os.environ.get(BASE_URL_ENV) or DEFAULT_BASE_URL
        self.timeout = timeout
        self._client = client

    def __call__(self, req: ChatRequest) -> ChatResponse:
        import httpx

        api_key = os.environ.get(API_KEY_ENV)
        if not api_key:
            raise CredentialMissing(
                f"set {API_KEY_ENV} in the environment to enable live provider calls"
            )
        body = {
            "model": req.model_id,
            "messages": [{"role": "system", "content": req.system_prompt}]
            + [{"role": m.role, "content": m.content} for m in req.messages],
            "temperature": req.temperature,
            "max_tokens": req.max_output_tokens,
        }
        if req.response_mime == "application/json":
            body["response_format"] = {"type": "json_object"}
        headers = {"Authorization": f"Bearer {api_key}"}
        client = self._client or httpx
        try:
            response = client.post(
                self.base_url, json=body, headers=headers, timeout=self.timeout
            )
        except Exception as exc:  # connection errors and timeouts are transient
            raise ProviderError(f"transport failure: {exc}", transient=True) from exc
        if response.status_code in (429, 500, 502, 503, 504):
            raise ProviderError(
                f"provider returned HTTP {response.status_code}", transient=True
            )
        if response.status_code != 200:
            raise ProviderError(f"provider returned HTTP {response.status_code}")
        data = response.json()
        try:
            choice = data["choices"][0]
            usage = data.get("usage", {})
            return ChatResponse(
                content=choice["message"]["content"],
                finish_reason=choice.get("finish_reason", "stop"),
                token_usage=TokenUsage(
                    usage.get("prompt_tokens", 0), usage.get("completion_tokens", 0)
                ),
            )
        except (KeyError, IndexError, TypeError) as exc:
            raise ProviderError(f"malformed provider response: {exc}") from exc


@dataclass
class GatewayCounters:
    live_calls: int = 0
    cache_hits: int = 0
    cache_misses: int = 0
    recorded: int = 0


class Gateway:
    """Mode-aware completion entry point with bounded retry."""

    def __init__(
        self,
        mode: GatewayMode,
        store: TranscriptStore | None = None,
        transport: Transport | None = None,
        retries: int = MAX_RETRIES,
        sleeper: Callable[[float], None] = time.sleep,
    ):
        if mode is not GatewayMode.LIVE and store is None:
            raise ValueError(f"{mode.value} mode requires a transcript store")
        self.mode = mode
        self.store = store
        self.transport = transport or HttpTransport()
        self.retries = retries
        self.sleeper = sleeper
        self.counters = GatewayCounters()

    def complete(self, req: ChatRequest) -> ChatResponse:
        key = transcript_key(req)
        if self.mode in (GatewayMode.REPLAY, GatewayMode.REPLAY_STRICT):
            assert self.store is not None
            cached = self.store.get(key)
            if cached is not None:
                self.counters.cache_hits += 1
                return cached
            self.counters.cache_misses += 1
            if self.mode is GatewayMode.REPLAY_STRICT:
                raise CacheMiss(f"no transcript for request {key.digest}")
        response = self._call_with_retries(req)
        if self.mode is GatewayMode.RECORD:
            assert self.store is not None
            self.store.put(key, req, response)
            self.counters.recorded += 1
        return response

    def _call_with_retries(self, req: ChatRequest) -> ChatResponse:
        delay = 0.5
        for attempt in range(self.retries + 1):
            try:
                self.counters.live_calls += 1
                return self.transport(req)
            except ProviderError as exc:
                if not exc.transient or attempt == self.retries:
                    raise
                self.sleeper(min(delay, 4.0))
                delay *= 2
        raise AssertionError("unreachable")
