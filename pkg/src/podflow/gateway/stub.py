"""Deterministic scripted provider for offline verification.

Entries are matched in precedence order:

1. exact match on the digest of the incoming message list (reusable),
2. FIFO within the entry's ``model`` (consumed once),
3. global FIFO for unkeyed entries (consumed once).

Per-model queues exist because consortium members often share one
rendered prompt: a digest cannot tell them apart, but their bindings can,
and matching on the model keeps fan-out responses deterministic no matter
which thread arrives first. Every request is logged verbatim for
transcript assertions.
"""

from __future__ import annotations

import json
import threading
from collections import deque
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

from ..errors import (
    AuthError,
    MalformedProviderResponse,
    PodflowError,
    ProviderUnavailable,
    RateLimited,
    StubExhausted,
    Timeout,
)
from . import ChatMessage, ChatResponse, ModelBinding, ToolCall, Usage, messages_digest

_ERROR_KINDS = {
    "rate_limited": lambda doc: RateLimited(retry_after_s=float(doc.get("retry_after_s", 0.0))),
    "timeout": lambda doc: Timeout(doc.get("message", "scripted timeout")),
    "auth": lambda doc: AuthError(doc.get("message", "scripted auth failure")),
    "provider_unavailable": lambda doc: ProviderUnavailable(doc.get("message", "scripted outage")),
    "malformed_response": lambda doc: MalformedProviderResponse(doc.get("message", "scripted garbage")),
}


@dataclass
class StubEntry:
    response: Optional[ChatResponse] = None
    error: Optional[PodflowError] = None
    digest: Optional[str] = None
    model: Optional[str] = None

    def __post_init__(self):
        if (self.response is None) == (self.error is None):
            raise ValueError("stub entry needs exactly one of response / error")

    def produce(self) -> ChatResponse:
        if self.error is not None:
            raise self.error
        return self.response


@dataclass
class StubRequest:
    binding: ModelBinding
    messages: tuple[ChatMessage, ...]
    tool: object
    digest: str


@dataclass
class StubProvider:
    """Scripted provider; also records every request it sees."""

    by_digest: dict[str, StubEntry] = field(default_factory=dict)
    by_model: dict[str, deque] = field(default_factory=dict)
    sequence: deque = field(default_factory=deque)
    requests: list[StubRequest] = field(default_factory=list)
    _lock: threading.Lock = field(default_factory=threading.Lock)

    def chat(self, binding: ModelBinding, messages: Sequence[ChatMessage], tool=None) -> ChatResponse:
        digest = messages_digest(messages)
        with self._lock:
            self.requests.append(StubRequest(binding, tuple(messages), tool, digest))
            entry = self.by_digest.get(digest)
            if entry is None:
                queue = self.by_model.get(binding.model)
                if queue:
                    entry = queue.popleft()
                elif self.sequence:
                    entry = self.sequence.popleft()
        if entry is None:
            raise StubExhausted(f"no scripted reply for model={binding.model} digest={digest[:12]}")
        return entry.produce()

    def request_count(self) -> int:
        with self._lock:
            return len(self.requests)


def stub_script(entries: Sequence[StubEntry]) -> StubProvider:
    provider = StubProvider()
    for entry in entries:
        if entry.digest is not None:
            provider.by_digest[entry.digest] = entry
        elif entry.model is not None:
            provider.by_model.setdefault(entry.model, deque()).append(entry)
        else:
            provider.sequence.append(entry)
    return provider


def scripted_response(content: str | None = None, tool_call: dict | None = None, usage: dict | None = None) -> ChatResponse:
    call = None
    if tool_call is not None:
        call = ToolCall(
            name=tool_call["name"],
            arguments=dict(tool_call.get("arguments", {})),
            call_id=tool_call.get("call_id"),
        )
    used = Usage(**usage) if usage else Usage()
    return ChatResponse(content=content, tool_call=call, usage=used)


def entry_from_jsonable(doc: dict) -> StubEntry:
    error = None
    response = None
    if "error" in doc:
        kind = doc["error"].get("kind")
        factory = _ERROR_KINDS.get(kind)
        if factory is None:
            raise ValueError(f"unknown scripted error kind: {kind!r}")
        error = factory(doc["error"])
    else:
        body = doc.get("response", {})
        response = scripted_response(
            content=body.get("content"),
            tool_call=body.get("tool_call"),
            usage=body.get("usage"),
        )
    return StubEntry(response=response, error=error, digest=doc.get("digest"), model=doc.get("model"))


def load_stub_entries(doc: dict) -> list[StubEntry]:
    return [entry_from_jsonable(entry) for entry in doc.get("entries", [])]


def load_stub_provider(path: str | Path) -> StubProvider:
    doc = json.loads(Path(path).read_text(encoding="utf-8"))
    provider_doc = doc.get("provider", doc)
    return stub_script(load_stub_entries(provider_doc))
