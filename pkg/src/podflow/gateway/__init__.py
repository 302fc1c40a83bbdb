"""Uniform chat-completion abstraction over heterogeneous providers.

All agents speak one neutral representation (messages, optional tool
schema, response with either content or a structured tool call). Adapters
translate to each provider's wire dialect; the deterministic stub makes
the whole verification suite runnable with zero network access.
"""

from __future__ import annotations

import threading
from dataclasses import dataclass, field
from typing import Optional, Protocol, Sequence

from ..canonical import digest_json
from ..errors import ProviderNotConfigured


@dataclass(frozen=True)
class ModelBinding:
    provider: str
    model: str
    temperature: float = 0.0
    max_tokens: int = 1024
    seed: Optional[int] = None

    def __post_init__(self):
        if not 0.0 <= self.temperature <= 2.0:
            raise ValueError("temperature must be in [0, 2]")
        if self.max_tokens <= 0:
            raise ValueError("max_tokens must be positive")

    def summary(self) -> str:
        return f"{self.provider}/{self.model}"

    def to_jsonable(self) -> dict:
        doc = {
            "provider": self.provider,
            "model": self.model,
            "temperature": self.temperature,
            "max_tokens": self.max_tokens,
        }
        if self.seed is not None:
            doc["seed"] = self.seed
        return doc

    @classmethod
    def from_jsonable(cls, doc: dict) -> "ModelBinding":
        return cls(
            provider=doc["provider"],
            model=doc["model"],
            temperature=float(doc.get("temperature", 0.0)),
            max_tokens=int(doc.get("max_tokens", 1024)),
            seed=doc.get("seed"),
        )


@dataclass(frozen=True)
class ToolCall:
    name: str
    arguments: dict
    call_id: Optional[str] = None

    def to_jsonable(self) -> dict:
        doc = {"name": self.name, "arguments": self.arguments}
        if self.call_id is not None:
            doc["call_id"] = self.call_id
        return doc


@dataclass(frozen=True)
class ChatMessage:
    role: str  # system | user | assistant | tool
    content: str = ""
    tool_call: Optional[ToolCall] = None
    tool_result_for: Optional[str] = None

    def __post_init__(self):
        if self.tool_call is not None and self.role != "assistant":
            raise ValueError("tool_call only valid on assistant messages")
        if self.tool_result_for is not None and self.role != "tool":
            raise ValueError("tool_result_for only valid on tool messages")

    def to_jsonable(self) -> dict:
        doc: dict = {"role": self.role, "content": self.content}
        if self.tool_call is not None:
            doc["tool_call"] = self.tool_call.to_jsonable()
        if self.tool_result_for is not None:
            doc["tool_result_for"] = self.tool_result_for
        return doc


@dataclass(frozen=True)
class Usage:
    prompt_tokens: int = 0
    completion_tokens: int = 0

    def to_jsonable(self) -> dict:
        return {"prompt_tokens": self.prompt_tokens, "completion_tokens": self.completion_tokens}


@dataclass(frozen=True)
class ChatResponse:
    content: Optional[str] = None
    tool_call: Optional[ToolCall] = None
    usage: Usage = field(default_factory=Usage)
    provider_latency_s: float = 0.0

    def __post_init__(self):
        if (self.content is None) == (self.tool_call is None):
            raise ValueError("exactly one of content / tool_call must be set")


def messages_digest(messages: Sequence[ChatMessage]) -> str:
    """Stable digest of a message list; the stub's exact-match key."""
    return digest_json([m.to_jsonable() for m in messages])


class Provider(Protocol):
    def chat(self, binding: ModelBinding, messages: Sequence[ChatMessage], tool=None) -> ChatResponse: ...


class Gateway:
    """Routes a chat call to the adapter registered for the binding.

    ``fallback`` captures every provider id not explicitly registered —
    how stub-script mode swaps the real world out from under unchanged
    agent catalogs.
    """

    def __init__(self, providers: dict[str, Provider] | None = None, fallback: Provider | None = None):
        self._providers = dict(providers or {})
        self._fallback = fallback
        self._lock = threading.Lock()

    @property
    def provider_ids(self) -> list[str]:
        return sorted(self._providers)

    @property
    def has_fallback(self) -> bool:
        return self._fallback is not None

    def can_route(self, provider_id: str) -> bool:
        return provider_id in self._providers or self._fallback is not None

    def chat(self, binding: ModelBinding, messages: Sequence[ChatMessage], tool=None) -> ChatResponse:
        if not messages:
            raise ValueError("messages must be non-empty")
        if messages[0].role not in ("system", "user"):
            raise ValueError("first message must be system or user")
        provider = self._providers.get(binding.provider, self._fallback)
        if provider is None:
            raise ProviderNotConfigured(f"no provider registered for {binding.provider!r}")
        return provider.chat(binding, messages, tool=tool)
